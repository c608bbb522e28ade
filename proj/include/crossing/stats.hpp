#pragma once

// Mergeable moment accumulators and a deterministic block-parallel driver.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace crossing {

/// Running means and co-moments of a fixed-width vector statistic. Merging
/// uses the pairwise (Chan et al.) update, so a fixed merge order gives
/// bit-identical results.
template <std::size_t K>
class MomentAccumulator {
public:
    void add(const std::array<double, K>& x) noexcept {
        ++count_;
        const double inv = 1.0 / static_cast<double>(count_);
        std::array<double, K> delta;
        for (std::size_t i = 0; i < K; ++i) {
            delta[i] = x[i] - mean_[i];
            mean_[i] += delta[i] * inv;
        }
        for (std::size_t i = 0; i < K; ++i) {
            const double post = x[i] - mean_[i];
            for (std::size_t j = 0; j < K; ++j) comoment_[i * K + j] += delta[j] * post;
        }
    }

    void merge(const MomentAccumulator& other) noexcept {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const double na = static_cast<double>(count_), nb = static_cast<double>(other.count_);
        const double n = na + nb;
        std::array<double, K> delta;
        for (std::size_t i = 0; i < K; ++i) delta[i] = other.mean_[i] - mean_[i];
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j) {
                comoment_[i * K + j] += other.comoment_[i * K + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (std::size_t i = 0; i < K; ++i) mean_[i] += delta[i] * nb / n;
        count_ += other.count_;
    }

    std::uint64_t count() const noexcept { return count_; }
    double mean(std::size_t i = 0) const noexcept { return mean_[i]; }

    /// Unbiased sample covariance.
    double covariance(std::size_t i, std::size_t j) const noexcept {
        return count_ > 1 ? comoment_[i * K + j] / static_cast<double>(count_ - 1) : 0.0;
    }
    double variance(std::size_t i = 0) const noexcept { return std::max(0.0, covariance(i, i)); }
    double stderr_of_mean(std::size_t i = 0) const noexcept {
        return count_ > 0 ? std::sqrt(variance(i) / static_cast<double>(count_)) : 0.0;
    }
    double correlation(std::size_t i, std::size_t j) const noexcept {
        const double d = std::sqrt(variance(i) * variance(j));
        return d > 0.0 ? covariance(i, j) / d : 0.0;
    }

private:
    std::uint64_t count_ = 0;
    std::array<double, K> mean_{};
    std::array<double, K * K> comoment_{};
};

using ScalarAccumulator = MomentAccumulator<1>;

/// Monte Carlo estimate of a mean.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  ///< sample sd / sqrt(paths)
    std::uint64_t paths = 0;
    std::uint64_t seed = 0;
};

inline McEstimate to_estimate(const ScalarAccumulator& acc, std::uint64_t seed) {
    return {acc.mean(), acc.stderr_of_mean(), acc.count(), seed};
}

struct ParallelOptions {
    unsigned threads = 1;
    std::uint64_t block_size = 4096;
};

/// Splits [0, items) into fixed blocks, runs `work(begin, end)` per block on
/// up to `threads` workers, then merges block results in block order. The
/// partition depends only on items and block_size, never on threads.
/// If blocks throw, the exception of the lowest-indexed failing block is
/// rethrown.
template <class Acc, class Work>
Acc run_blocks(std::uint64_t items, const ParallelOptions& options, Work&& work) {
    const std::uint64_t block = std::max<std::uint64_t>(1, options.block_size);
    const std::uint64_t blocks = (items + block - 1) / block;
    std::vector<Acc> partial(blocks);
    std::vector<std::exception_ptr> errors(blocks);
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= blocks || failed.load(std::memory_order_relaxed)) return;
            const std::uint64_t begin = b * block;
            const std::uint64_t end = std::min(items, begin + block);
            try {
                partial[b] = work(begin, end);
            } catch (...) {
                errors[b] = std::current_exception();
                failed.store(true);
            }
        }
    };

    const unsigned threads = std::max(1u, options.threads);
    if (threads == 1 || blocks <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        const auto count = std::min<std::uint64_t>(threads, blocks);
        pool.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) pool.emplace_back(worker);
    }

    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    Acc total{};
    for (auto& p : partial) total.merge(p);
    return total;
}

/// Kendall rank correlation of (x_i, y_i); ties contribute zero.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0.0;
    auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            s += sign(x[j] - x[i]) * sign(y[j] - y[i]);
        }
    }
    return s / (0.5 * static_cast<double>(n * (n - 1)));
}

}  // namespace crossing
