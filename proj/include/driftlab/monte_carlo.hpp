#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "driftlab/errors.hpp"

namespace driftlab {

/// Running mean and centered second moment of a fixed-width vector
/// (Welford within a block, Chan et al. when merging).
class Moments {
 public:
  Moments() = default;
  explicit Moments(std::size_t width) : mean_(width, 0.0), m2_(width, 0.0), max_abs_(width, 0.0) {}

  std::size_t width() const noexcept { return mean_.size(); }
  std::uint64_t count() const noexcept { return count_; }

  void add(std::span<const double> values) {
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t k = 0; k < mean_.size(); ++k) {
      const double delta = values[k] - mean_[k];
      mean_[k] += delta * inv;
      m2_[k] += delta * (values[k] - mean_[k]);
      max_abs_[k] = std::max(max_abs_[k], std::abs(values[k]));
    }
  }

  void merge(const Moments& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    for (std::size_t k = 0; k < mean_.size(); ++k) {
      const double delta = other.mean_[k] - mean_[k];
      mean_[k] += delta * nb / n;
      m2_[k] += other.m2_[k] + delta * delta * na * nb / n;
      max_abs_[k] = std::max(max_abs_[k], other.max_abs_[k]);
    }
    count_ += other.count_;
  }

  double mean(std::size_t k) const { return mean_.at(k); }
  std::span<const double> means() const noexcept { return mean_; }
  double max_abs(std::size_t k) const { return max_abs_.at(k); }

  double variance(std::size_t k) const {
    return count_ > 1 ? m2_.at(k) / static_cast<double>(count_ - 1) : 0.0;
  }

  /// Sample standard deviation over sqrt(count).
  double stderr_of_mean(std::size_t k) const {
    return count_ > 1 ? std::sqrt(variance(k) / static_cast<double>(count_)) : 0.0;
  }

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::vector<double> max_abs_;
};

struct EngineOptions {
  std::size_t workers = 1;
  std::size_t block_size = 1024;
};

/// Runs `reps` replicates and returns moments of the `width` quantities each
/// one writes.
///
/// `make_kernel()` is called once per worker and must return a callable
/// `void(std::uint64_t replicate, std::span<double> out)`. Replicates are
/// grouped into fixed blocks reduced in index order, and block results
/// are combined by a fixed pairwise tree, so the output does not depend on
/// the number of workers. A DegenerateSampleError from the lowest failing
/// block is rethrown with its replicate index.
template <class MakeKernel>
Moments run_replicates(std::uint64_t reps, std::size_t width, const EngineOptions& options,
                       MakeKernel&& make_kernel) {
  detail::require(options.block_size >= 1, "run_replicates: block_size must be >= 1");
  const std::uint64_t block = options.block_size;
  const std::uint64_t n_blocks = (reps + block - 1) / block;
  std::vector<Moments> partial(n_blocks, Moments(width));
  std::vector<std::exception_ptr> failures(n_blocks);
  std::atomic<std::uint64_t> next{0};

  auto worker = [&] {
    auto kernel = make_kernel();
    std::vector<double> out(width);
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      const std::uint64_t first = b * block;
      const std::uint64_t last = std::min(reps, first + block);
      try {
        for (std::uint64_t r = first; r < last; ++r) {
          try {
            kernel(r, std::span<double>(out));
          } catch (const DegenerateSampleError& e) {
            throw e.at_replicate(r);
          }
          partial[b].add(out);
        }
      } catch (...) {
        failures[b] = std::current_exception();
      }
    }
  };

  std::vector<std::exception_ptr> setup_failures(std::max<std::size_t>(1, options.workers));
  auto guarded = [&](std::size_t w) {
    try {
      worker();
    } catch (...) {
      setup_failures[w] = std::current_exception();
    }
  };

  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::uint64_t>(options.workers, n_blocks));
  if (n_workers == 1) {
    guarded(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(guarded, w);
  }

  for (const auto& f : setup_failures) {
    if (f) std::rethrow_exception(f);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  while (partial.size() > 1) {
    std::vector<Moments> next_level;
    next_level.reserve((partial.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < partial.size(); i += 2) {
      partial[i].merge(partial[i + 1]);
      next_level.push_back(std::move(partial[i]));
    }
    if (partial.size() % 2 == 1) next_level.push_back(std::move(partial.back()));
    partial = std::move(next_level);
  }
  return partial.empty() ? Moments(width) : std::move(partial.front());
}

}  // namespace driftlab
