#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tsirelson/errors.hpp"
#include "tsirelson/filter.hpp"
#include "tsirelson/format.hpp"

namespace tsirelson {

namespace {

constexpr std::array<char, 4> kMagic = {'T', 'S', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw DimensionError("truncated ensemble file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void put_reals(std::ostream& out, std::span<const double> values) {
  for (double v : values) put_le(out, v);
}

std::vector<double> get_reals(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  for (double& v : values) v = get_le<double>(in);
  return values;
}

}  // namespace

void write_ensemble_csv(const FilterEnsemble& ensemble, std::ostream& out, std::size_t max_paths) {
  const TimeGrid& grid = ensemble.grid();
  out << "path_id,t,B,Y,drift\n";
  const std::size_t count = std::min(max_paths, ensemble.n_paths());
  for (std::size_t i = 0; i < count; ++i) {
    const EnsembleRecord rec = ensemble.record(i);
    const std::string id = std::to_string(i);
    for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
      const std::string drift = k < rec.drift.size() ? format_real(rec.drift[k]) : std::string();
      out << csv_row({id, format_real(grid.node(k)), format_real(rec.B[k]), format_real(rec.Y[k]),
                      drift});
    }
  }
}

void write_ensemble_binary(const FilterEnsemble& ensemble, std::ostream& out,
                           std::size_t max_paths) {
  const std::size_t count = std::min(max_paths, ensemble.n_paths());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, ensemble.grid().n_steps());
  put_le<std::uint64_t>(out, count);
  put_le<std::uint64_t>(out, ensemble.seed());
  for (std::size_t i = 0; i < count; ++i) {
    const EnsembleRecord rec = ensemble.record(i);
    put_reals(out, rec.B.values());
    put_reals(out, rec.Y.values());
    put_reals(out, rec.drift);
    put_le(out, rec.log_doleans);
  }
}

StoredEnsemble read_ensemble_binary(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DimensionError("not an ensemble file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) throw DimensionError("unsupported ensemble file version");
  StoredEnsemble stored;
  stored.n_steps = get_le<std::uint64_t>(in);
  const auto n_paths = get_le<std::uint64_t>(in);
  stored.seed = get_le<std::uint64_t>(in);
  stored.records.reserve(n_paths);
  for (std::uint64_t i = 0; i < n_paths; ++i) {
    StoredRecord rec;
    rec.B = get_reals(in, stored.n_steps + 1);
    rec.Y = get_reals(in, stored.n_steps + 1);
    rec.drift = get_reals(in, stored.n_steps);
    rec.log_doleans = get_le<double>(in);
    stored.records.push_back(std::move(rec));
  }
  return stored;
}

}  // namespace tsirelson
