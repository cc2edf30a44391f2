#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "dpsco/trace.hpp"

namespace dpsco {
namespace {

constexpr std::array<char, 4> kMagic = {'G', 'T', 'R', 'C'};

static_assert(std::endian::native == std::endian::little, "trace files are little-endian");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void GradientTrace::validate() const {
  if (H.rows() < 1 || H.cols() < 1) throw std::invalid_argument("gradient trace must have r >= 1 and p >= 1");
  if (!H.allFinite()) throw std::invalid_argument("gradient trace has non-finite entries");
  if (!step_indices.empty() && step_indices.size() != rows()) {
    throw std::invalid_argument(fmt::format("gradient trace has {} rows but {} step indices", rows(), step_indices.size()));
  }
}

void save_trace_binary(const GradientTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, static_cast<std::uint32_t>(trace.rows()));
  write_u32(out, static_cast<std::uint32_t>(trace.cols()));
  write_u32(out, 0);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = trace.H;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

GradientTrace load_trace_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + ": missing GTRC magic");
  const std::uint32_t rows = read_u32(in);
  const std::uint32_t cols = read_u32(in);
  const std::uint32_t reserved = read_u32(in);
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  if (reserved != 0) throw std::runtime_error(fmt::format("{}: reserved header field is {}, expected 0", path.string(), reserved));
  const auto payload = static_cast<std::uintmax_t>(rows) * cols * sizeof(double);
  if (std::filesystem::file_size(path) != 16 + payload) {
    throw std::runtime_error(fmt::format("{}: expected {}x{} float64 payload", path.string(), rows, cols));
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw std::runtime_error(fmt::format("{}: expected {}x{} float64 payload", path.string(), rows, cols));
  GradientTrace trace{rm, {}};
  trace.validate();
  return trace;
}

void save_trace_csv(const GradientTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < trace.H.rows(); ++i) {
    for (Eigen::Index j = 0; j < trace.H.cols(); ++j) out << (j ? "," : "") << fmt::format("{:.17g}", trace.H(i, j));
    out << '\n';
  }
}

GradientTrace load_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw std::runtime_error(fmt::format("{}: row {} has non-numeric cell '{}'", path.string(), rows, cell));
      }
      values.push_back(v);
      ++c;
    }
    if (rows == 0) cols = c;
    if (c != cols) throw std::runtime_error(fmt::format("{}: row {} has {} columns, expected {}", path.string(), rows, c, cols));
    ++rows;
  }
  GradientTrace trace;
  trace.H = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  trace.validate();
  return trace;
}

GradientTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in && magic == kMagic) return load_trace_binary(path);
  return load_trace_csv(path);
}

}  // namespace dpsco
