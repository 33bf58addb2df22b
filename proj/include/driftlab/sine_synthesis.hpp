#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>

namespace driftlab {

namespace detail {
// The FFTW planner is not reentrant; execution on an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Evaluates S(i) = sum_{m>=1} c_m sin((m - 1/2) pi i / M) at i = 0..M with a
/// type-II discrete sine transform of length M.
///
/// Frequencies above M alias exactly onto the grid: sin is 2M-periodic in m
/// and m -> 2M + 1 - m flips the sign, so any number of coefficients folds
/// into M transform inputs. Not thread-safe; use one instance per worker.
class SineSynthesis {
 public:
  explicit SineSynthesis(std::size_t intervals) : intervals_(intervals) {
    if (intervals < 1) throw std::invalid_argument("SineSynthesis: intervals must be >= 1");
    std::lock_guard lock(detail::fftw_planner_mutex());
    in_ = fftw_alloc_real(intervals_);
    out_ = fftw_alloc_real(intervals_);
    plan_ = fftw_plan_r2r_1d(static_cast<int>(intervals_), in_, out_, FFTW_RODFT10,
                             FFTW_ESTIMATE);
  }

  SineSynthesis(const SineSynthesis&) = delete;
  SineSynthesis& operator=(const SineSynthesis&) = delete;

  SineSynthesis(SineSynthesis&& other) noexcept
      : intervals_(other.intervals_), in_(other.in_), out_(other.out_), plan_(other.plan_) {
    other.in_ = other.out_ = nullptr;
    other.plan_ = nullptr;
  }

  ~SineSynthesis() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (plan_) fftw_destroy_plan(plan_);
    if (in_) fftw_free(in_);
    if (out_) fftw_free(out_);
  }

  std::size_t intervals() const noexcept { return intervals_; }

  /// coeffs[m-1] multiplies the frequency (m - 1/2); out has M + 1 entries.
  void synthesize(std::span<const double> coeffs, std::span<double> out) {
    if (out.size() != intervals_ + 1) {
      throw std::invalid_argument("SineSynthesis: output must hold intervals + 1 values");
    }
    std::fill(in_, in_ + intervals_, 0.0);
    const std::size_t period = 2 * intervals_;
    for (std::size_t m = 0; m < coeffs.size(); ++m) {
      const std::size_t r = m % period;
      // RODFT10 carries a factor 2 on every term.
      if (r < intervals_) {
        in_[r] += 0.5 * coeffs[m];
      } else {
        in_[period - 1 - r] -= 0.5 * coeffs[m];
      }
    }
    fftw_execute_r2r(plan_, in_, out_);
    out[0] = 0.0;
    std::copy(out_, out_ + intervals_, out.begin() + 1);
  }

 private:
  std::size_t intervals_;
  double* in_ = nullptr;
  double* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace driftlab
