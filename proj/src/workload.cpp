#include "actbench/workload.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>

namespace actbench {
namespace {

constexpr std::size_t kBlockRows = 4096;
constexpr std::array<char, 4> kMagic = {'A', 'B', 'W', 'L'};

std::size_t pow10(int n) {
  std::size_t v = 1;
  for (int i = 0; i < n; ++i) v *= 10;
  return v;
}

// Odd multiples of 2^-24 in (-1, 1): exactly representable in float32, never
// reaching either endpoint.
float draw(Rng& rng) {
  const auto k = static_cast<std::int64_t>(rng() >> 40);  // 24 random bits
  return static_cast<float>(static_cast<double>(2 * k + 1 - (std::int64_t{1} << 24)) *
                            0x1.0p-24);
}

// Rows [first, first + count) of the workload, written to dst row-major.
void fill_rows(const Workload& w, std::size_t first, std::size_t count, float* dst) {
  std::size_t row = first;
  const std::size_t end = first + count;
  while (row < end) {
    const std::size_t block = row / kBlockRows;
    Rng rng(mix_seed(w.seed, block));
    const std::size_t block_start = block * kBlockRows;
    // Skip to `row` inside this block.
    for (std::size_t i = 0; i < (row - block_start) * w.input_dim; ++i) rng();
    const std::size_t block_end = std::min(end, block_start + kBlockRows);
    for (; row < block_end; ++row) {
      for (std::size_t c = 0; c < w.input_dim; ++c) *dst++ = draw(rng);
    }
  }
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

}  // namespace

BudgetExceeded::BudgetExceeded(std::uint64_t requested, std::uint64_t cap)
    : std::runtime_error(fmt::format(
          "workload needs {} bytes, over the configured memory cap of {} bytes", requested, cap)),
      requested_(requested),
      cap_(cap) {}

std::size_t Workload::instances() const { return pow10(size_exponent); }

std::uint64_t Workload::bytes() const {
  return static_cast<std::uint64_t>(instances()) * input_dim * sizeof(float);
}

void Workload::validate() const {
  if (size_exponent < 0 || size_exponent > kMaxSizeExponent) {
    throw std::invalid_argument(
        fmt::format("size exponent {} outside 0..{}", size_exponent, kMaxSizeExponent));
  }
  if (input_dim == 0) throw std::invalid_argument("workload input_dim must be >= 1");
}

Matrix<float> generate(const Workload& w, std::uint64_t memory_cap) {
  w.validate();
  if (w.bytes() > memory_cap) throw BudgetExceeded(w.bytes(), memory_cap);
  Matrix<float> out(static_cast<Eigen::Index>(w.instances()),
                    static_cast<Eigen::Index>(w.input_dim));
  fill_rows(w, 0, w.instances(), out.data());
  return out;
}

WorkloadStream::WorkloadStream(Workload w) : workload_(w), total_(0) {
  workload_.validate();
  total_ = workload_.instances();
}

std::size_t WorkloadStream::next(Matrix<float>& out, std::size_t max_rows) {
  const std::size_t rows = std::min(max_rows, rows_remaining());
  out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(workload_.input_dim));
  if (rows > 0) fill_rows(workload_, position_, rows, out.data());
  position_ += rows;
  return rows;
}

void save_workload(const std::filesystem::path& path, const Workload& w,
                   const Matrix<float>& data) {
  w.validate();
  if (static_cast<std::size_t>(data.rows()) != w.instances() ||
      static_cast<std::size_t>(data.cols()) != w.input_dim) {
    throw std::invalid_argument("save_workload: matrix shape does not match the workload");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), 4);
  put_u32(os, kWorkloadFileVersion);
  put_u32(os, static_cast<std::uint32_t>(w.size_exponent));
  put_u32(os, static_cast<std::uint32_t>(w.input_dim));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
  } else {
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      put_u32(os, std::bit_cast<std::uint32_t>(data.data()[i]));
    }
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

StoredWorkload load_workload(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  unsigned char header[16];
  if (!is.read(reinterpret_cast<char*>(header), 16)) {
    throw std::runtime_error(path.string() + ": truncated workload header");
  }
  if (std::memcmp(header, kMagic.data(), 4) != 0) {
    throw std::runtime_error(path.string() + ": not a workload file (bad magic)");
  }
  const std::uint32_t version = get_u32(header + 4);
  if (version != kWorkloadFileVersion) {
    throw std::runtime_error(fmt::format("{}: unsupported workload version {}", path.string(), version));
  }
  StoredWorkload out;
  out.size_exponent = static_cast<int>(get_u32(header + 8));
  out.input_dim = get_u32(header + 12);
  Workload meta{out.size_exponent, out.input_dim, 0};
  meta.validate();
  out.data.resize(static_cast<Eigen::Index>(meta.instances()),
                  static_cast<Eigen::Index>(out.input_dim));
  std::vector<unsigned char> raw(meta.bytes());
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw std::runtime_error(path.string() + ": truncated workload payload");
  }
  for (Eigen::Index i = 0; i < out.data.size(); ++i) {
    out.data.data()[i] = std::bit_cast<float>(get_u32(raw.data() + 4 * i));
  }
  return out;
}

}  // namespace actbench
