#include "tada/rng.hpp"

#include <cmath>

namespace tada::rng {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline std::uint64_t mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t* hi) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  *hi = static_cast<std::uint64_t>(p >> 64);
  return static_cast<std::uint64_t>(p);
}

inline Counter round_once(const Counter& c, const Key& k) {
  std::uint64_t hi0, hi1;
  const std::uint64_t lo0 = mulhilo(kMul0, c[0], &hi0);
  const std::uint64_t lo1 = mulhilo(kMul1, c[2], &hi1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

Counter philox4x64(const Counter& counter, const Key& key) {
  Counter c = counter;
  Key k = key;
  for (int i = 0; i < 10; ++i) {
    if (i > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round_once(c, k);
  }
  return c;
}

Stream::Stream(std::uint64_t seed, StreamId stream, std::uint64_t substream)
    : key_{seed, static_cast<std::uint64_t>(stream)},
      base_{0, substream, static_cast<std::uint64_t>(stream), seed} {}

void Stream::refill() {
  Counter ctr = base_;
  ctr[0] = block_++;
  buf_ = philox4x64(ctr, key_);
  pos_ = 0;
}

std::uint64_t Stream::next_u64() {
  if (pos_ >= 4) refill();
  return buf_[pos_++];
}

double Stream::next_uniform() {
  // (0, 1]: 53 high bits, shifted off zero so log() is safe.
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Stream::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * M_PI * u2;
  spare_ = mag * std::sin(ang);
  has_spare_ = true;
  return mag * std::cos(ang);
}

Vector Stream::normal_vector(int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = next_normal();
  return v;
}

Matrix Stream::normal_matrix(int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = next_normal();
  }
  return m;
}

}  // namespace tada::rng
