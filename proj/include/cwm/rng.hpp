#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cwm {

/**
 * Seedable 64-bit generator used everywhere in this library.
 *
 * The generator is std::mt19937_64 (fully specified by the C++ standard, so
 * the raw 64-bit stream is identical across platforms).  Distributions are
 * NOT taken from <random> because the standard leaves them
 * implementation-defined; instead uniform doubles are derived from the raw
 * stream as (word >> 11) * 2^-53, giving a value in [0, 1) with 53 random
 * mantissa bits.  Everything downstream (matrix entries, Bernoulli masks,
 * task values, reservoir noise) is built from that mapping, so a seed pins
 * the exact double sequence.
 */
class Rng {
 public:
  Rng() : gen_(0) {}
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  bool bernoulli(double p) { return uniform01() < p; }

  bool operator==(const Rng& other) const { return gen_ == other.gen_; }

  /// Serializes the full generator state as the standard's textual form
  /// (625 space-separated integers for mt19937_64).
  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (is.fail()) throw std::invalid_argument("Rng::load_state: malformed state string");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cwm
