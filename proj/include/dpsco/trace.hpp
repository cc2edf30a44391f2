#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace dpsco {

/// r x p matrix of pre-noise averaged clipped gradients, one row per
/// recorded optimizer step.
struct GradientTrace {
  Eigen::MatrixXd H;
  std::vector<std::size_t> step_indices;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(H.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(H.cols()); }

  /// Throws if the trace is empty, non-finite, or the step list disagrees with H.
  void validate() const;
};

/// Binary layout (little-endian): "GTRC", u32 rows, u32 cols, u32 reserved = 0,
/// then rows*cols float64 in row-major order.
void save_trace_binary(const GradientTrace& trace, const std::filesystem::path& path);
GradientTrace load_trace_binary(const std::filesystem::path& path);

/// Comma-separated rows, no header.
void save_trace_csv(const GradientTrace& trace, const std::filesystem::path& path);
GradientTrace load_trace_csv(const std::filesystem::path& path);

/// Dispatches on the leading magic bytes: binary if "GTRC", CSV otherwise.
GradientTrace load_trace(const std::filesystem::path& path);

}  // namespace dpsco
