#pragma once

#include "actbench/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace actbench {

inline constexpr std::uint64_t kDefaultMemoryCap = std::uint64_t{8} << 30;  // 8 GiB
inline constexpr int kMaxSizeExponent = 8;

/// 10^n random instances of width input_dim.
struct Workload {
  int size_exponent = 0;
  std::size_t input_dim = 64;
  std::uint64_t seed = 0;

  std::size_t instances() const;
  std::uint64_t bytes() const;  // float32 storage
  void validate() const;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(std::uint64_t requested, std::uint64_t cap);
  std::uint64_t requested_bytes() const noexcept { return requested_; }
  std::uint64_t cap_bytes() const noexcept { return cap_; }

 private:
  std::uint64_t requested_;
  std::uint64_t cap_;
};

/// Values are i.i.d. on the open interval (-1, 1), generated in fixed blocks of
/// rows so that streamed and whole-matrix generation agree element for element.
/// Throws BudgetExceeded when the matrix would not fit under memory_cap.
Matrix<float> generate(const Workload& w, std::uint64_t memory_cap = kDefaultMemoryCap);

/// Chunked generation for workloads too large to hold at once.
class WorkloadStream {
 public:
  explicit WorkloadStream(Workload w);

  /// Fills `out` with up to max_rows further rows; returns the row count
  /// written (0 once exhausted).
  std::size_t next(Matrix<float>& out, std::size_t max_rows);
  std::size_t rows_remaining() const noexcept { return total_ - position_; }

 private:
  Workload workload_;
  std::size_t total_;
  std::size_t position_ = 0;
};

// On-disk format: 16-byte little-endian header ("ABWL", u32 version, u32 n,
// u32 dim) followed by row-major little-endian float32 values.
inline constexpr std::uint32_t kWorkloadFileVersion = 1;

void save_workload(const std::filesystem::path& path, const Workload& w,
                   const Matrix<float>& data);

struct StoredWorkload {
  int size_exponent = 0;
  std::size_t input_dim = 0;
  Matrix<float> data;
};

StoredWorkload load_workload(const std::filesystem::path& path);

}  // namespace actbench
