#pragma once

#include <cstdint>

namespace ddlab {

// Counter-based pseudo-random stream. Each draw hashes (seed, stream_id,
// counter) with a splitmix64-style finalizer, so a draw depends only on those
// three integers: streams can be handed to workers in any order and any draw
// can be replayed by restoring the counter. No global state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), counter_(0) {}

  static RngStream restore(std::uint64_t seed, std::uint64_t stream_id,
                           std::uint64_t counter) {
    RngStream s(seed, stream_id);
    s.counter_ = counter;
    return s;
  }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos();
  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
};

}  // namespace ddlab
