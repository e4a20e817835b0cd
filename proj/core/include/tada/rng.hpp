#ifndef TADA_RNG_HPP
#define TADA_RNG_HPP

#include <array>
#include <cstdint>

#include "tada/types.hpp"

// Counter-based random numbers (Philox4x64, 10 rounds). Output for a given
// (key, counter) pair is a pure function, so independent substreams are just
// distinct counter prefixes: batch results do not depend on how a batch is
// partitioned, and any draw can be regenerated in isolation.

namespace tada::rng {

using Counter = std::array<std::uint64_t, 4>;
using Key = std::array<std::uint64_t, 2>;

/// One Philox4x64-10 block. Matches the Random123 / NumPy generator.
Counter philox4x64(const Counter& counter, const Key& key);

// Fixed stream ids; combined with (seed, substream) they address all
// randomness in the project.
enum class StreamId : std::uint64_t {
  Prior = 1,        // prior noise, substream = sample index
  Data = 2,         // ground-truth dataset draws
  Metric = 3,       // random projections for sliced distances
  Analysis = 4,     // Monte Carlo verification draws
  SharedNoise = 5,  // y0-defining noise shared across a k sweep
};

/// A deterministic stream of uniforms / normals addressed by
/// (seed, stream, substream). Normals come from Box-Muller pairs.
class Stream {
 public:
  Stream(std::uint64_t seed, StreamId stream, std::uint64_t substream);

  std::uint64_t next_u64();
  /// Uniform on (0, 1].
  double next_uniform();
  /// Standard normal.
  double next_normal();
  Vector normal_vector(int n);
  /// rows x cols matrix of standard normals, filled row-major.
  Matrix normal_matrix(int rows, int cols);

 private:
  void refill();

  Key key_;
  Counter base_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 4> buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tada::rng

#endif  // TADA_RNG_HPP
