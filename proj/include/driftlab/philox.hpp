#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace driftlab {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: the output is a pure
// function of (counter, key), which is what makes replicate streams
// independent of scheduling.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Tags that separate the independent random inputs a replicate may need.
enum class Stream : std::uint32_t {
  noise = 0,             // Paley-Wiener coefficients of the noise X^u
  prior = 1,             // coefficients of a prior-drawn drift
  constant = 2,          // Gaussian vectors for the universal gain constant
  noise_increments = 3,  // grid increments of X^u for non-constant volatility
  prior_increments = 4,  // grid increments of a prior-drawn drift
  averaging = 5,         // sub-replicates of the sample-average estimator
};

/// Standard normal draws addressed by (seed, stream, replicate, index).
///
/// Index pairs (2j, 2j+1) come from one Philox block through Box-Muller, so
/// any prefix of a replicate's stream is independent of how many draws are
/// requested overall.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, Stream stream, std::uint64_t replicate) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(static_cast<std::uint32_t>(stream)),
        replicate_(replicate) {}

  void fill(std::span<double> out, std::uint64_t first_index = 0) const {
    std::size_t i = 0;
    std::uint64_t index = first_index;
    if (index % 2 == 1 && i < out.size()) {
      out[i++] = pair(index / 2)[1];
      ++index;
    }
    for (; i + 1 < out.size(); i += 2, index += 2) {
      const auto z = pair(index / 2);
      out[i] = z[0];
      out[i + 1] = z[1];
    }
    if (i < out.size()) out[i] = pair(index / 2)[0];
  }

  std::vector<double> draw(std::size_t count) const {
    std::vector<double> out(count);
    fill(out);
    return out;
  }

  double operator[](std::uint64_t index) const { return pair(index / 2)[index % 2]; }

 private:
  std::array<double, 2> pair(std::uint64_t block) const {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block), stream_,
                                  static_cast<std::uint32_t>(replicate_),
                                  static_cast<std::uint32_t>(replicate_ >> 32)};
    const auto bits = Philox4x32::generate(ctr, key_);
    const std::uint64_t a = (std::uint64_t{bits[0]} << 32) | bits[1];
    const std::uint64_t b = (std::uint64_t{bits[2]} << 32) | bits[3];
    constexpr double kUnit = 0x1.0p-53;
    const double u = static_cast<double>((a >> 11) + 1) * kUnit;  // (0, 1]
    const double v = static_cast<double>(b >> 11) * kUnit;        // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u));
    const double angle = 2.0 * std::numbers::pi * v;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  Philox4x32::Key key_;
  std::uint32_t stream_;
  std::uint64_t replicate_;
};

}  // namespace driftlab
