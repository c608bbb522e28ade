#pragma once

// Problem definition: crossing boundaries, payoffs, increment laws, and the
// formula-level helpers they induce (boundary levels, moments, the f0/f1
// payoff split around a boundary trace).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "crossing/errors.hpp"

namespace crossing {

// ---------------------------------------------------------------------------
// Boundary
// ---------------------------------------------------------------------------

enum class BoundaryKind { affine, affine_plus_perturbation, polynomial };

/// Crossing curve b(t) from a closed parametric catalogue, so b and b' are
/// exact.
///
///   affine:                   b(t) = b0 + slope t
///   affine_plus_perturbation: b(t) = b0 + slope t + amplitude sin(frequency t)
///   polynomial:               b(t) = sum_i c_i t^i, derivative bound taken
///                             over [0, horizon]
class Boundary {
public:
    static Boundary affine(double b0, double slope) {
        Boundary b{BoundaryKind::affine, {b0, slope}};
        b.derivative_bound_ = std::abs(slope);
        b.epsilon_ = slope < 0.0 ? -slope / 2.0 : 0.0;
        return b;
    }

    static Boundary perturbed(double b0, double slope, double amplitude, double frequency) {
        Boundary b{BoundaryKind::affine_plus_perturbation, {b0, slope, amplitude, frequency}};
        b.derivative_bound_ = std::abs(slope) + std::abs(amplitude * frequency);
        b.epsilon_ = slope < 0.0 ? -slope / 2.0 : 0.0;
        return b;
    }

    static Boundary polynomial(std::vector<double> coefficients, double horizon) {
        while (coefficients.size() > 1 && coefficients.back() == 0.0) coefficients.pop_back();
        if (coefficients.empty()) coefficients.push_back(0.0);
        if (!(horizon > 0.0)) throw ConfigError("/boundary/params/horizon", "must be positive");
        Boundary b{BoundaryKind::polynomial, coefficients};
        b.horizon_ = horizon;
        constexpr int samples = 4096;
        double bound = 0.0;
        for (int i = 0; i <= samples; ++i) {
            bound = std::max(bound, std::abs(b.derivative(horizon * i / samples)));
        }
        b.derivative_bound_ = bound;
        const auto degree = coefficients.size() - 1;
        if (degree == 1 && coefficients[1] < 0.0) {
            b.epsilon_ = -coefficients[1] / 2.0;
        } else if (degree >= 2 && coefficients.back() < 0.0) {
            b.epsilon_ = 1.0;
        }
        return b;
    }

    double operator()(double t) const noexcept {
        switch (kind_) {
            case BoundaryKind::affine:
                return params_[0] + params_[1] * t;
            case BoundaryKind::affine_plus_perturbation:
                return params_[0] + params_[1] * t + params_[2] * std::sin(params_[3] * t);
            case BoundaryKind::polynomial: {
                double acc = 0.0;
                for (auto it = params_.rbegin(); it != params_.rend(); ++it) acc = acc * t + *it;
                return acc;
            }
        }
        return 0.0;
    }

    double derivative(double t) const noexcept {
        switch (kind_) {
            case BoundaryKind::affine:
                return params_[1];
            case BoundaryKind::affine_plus_perturbation:
                return params_[1] + params_[2] * params_[3] * std::cos(params_[3] * t);
            case BoundaryKind::polynomial: {
                double acc = 0.0;
                for (std::size_t i = params_.size(); i-- > 1;) acc = acc * t + static_cast<double>(i) * params_[i];
                return acc;
            }
        }
        return 0.0;
    }

    BoundaryKind kind() const noexcept { return kind_; }
    const std::vector<double>& params() const noexcept { return params_; }
    double b0() const noexcept { return (*this)(0.0); }
    /// sup |b'| (over [0, horizon] for polynomials).
    double derivative_bound() const noexcept { return derivative_bound_; }
    double horizon() const noexcept { return horizon_; }

    /// True when b(t) + eps t -> -inf for some eps > 0; this is what makes the
    /// crossing times uniformly integrable.
    bool eventually_crosses() const noexcept { return epsilon_ > 0.0; }
    double crossing_margin() const noexcept { return epsilon_; }

    /// Throws unless b(0) > 0 and b' is bounded.
    void validate() const {
        if (!(b0() > 0.0)) throw AssumptionViolation(3, "boundary requires b(0) > 0");
        if (!std::isfinite(derivative_bound_)) throw AssumptionViolation(3, "boundary derivative is unbounded");
    }

    void require_eventual_crossing() const {
        if (!eventually_crosses()) {
            throw AssumptionViolation(2, "boundary lacks b(t) + eps t -> -inf; crossing times are not uniformly integrable");
        }
    }

    friend bool operator==(const Boundary& a, const Boundary& b) {
        return a.kind_ == b.kind_ && a.params_ == b.params_ && a.horizon_ == b.horizon_;
    }

private:
    Boundary(BoundaryKind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

    BoundaryKind kind_;
    std::vector<double> params_;
    double derivative_bound_ = 0.0;
    double epsilon_ = 0.0;
    double horizon_ = std::numeric_limits<double>::infinity();
};

/// Discrete level sqrt(n) b(k/n) that the unscaled walk S_k is compared with.
inline double boundary_level(const Boundary& boundary, std::int64_t k, std::int64_t n) {
    const double rn = std::sqrt(static_cast<double>(n));
    return rn * boundary(static_cast<double>(k) / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Payoff
// ---------------------------------------------------------------------------

enum class PayoffKind { time_exponential, gaussian_bump, windowed_polynomial };

struct PayoffBounds {
    double f = 0.0;
    double fx = 0.0;
    double ft = 0.0;
    double fxx = 0.0;
};

/// Payoff f(t, x) with analytic partials.
///
///   time_exponential:    A e^{-lambda t}
///   gaussian_bump:       A e^{-lambda t} exp(-(x - m)^2 / (2 w^2))
///   windowed_polynomial: e^{-lambda t} p(x) exp(-x^2 / (2 w^2))
///
/// A time_exponential with lambda = 0 is the constant payoff.
class Payoff {
public:
    static Payoff time_exponential(double amplitude, double rate) {
        if (!(rate >= 0.0)) throw ConfigError("/payoff/params/rate", "must be nonnegative");
        Payoff p{PayoffKind::time_exponential, {amplitude, rate}};
        p.bounds_ = {std::abs(amplitude), 0.0, std::abs(amplitude) * rate, 0.0};
        return p;
    }

    static Payoff gaussian_bump(double amplitude, double rate, double center, double width) {
        if (!(rate >= 0.0)) throw ConfigError("/payoff/params/rate", "must be nonnegative");
        if (!(width > 0.0)) throw ConfigError("/payoff/params/width", "must be positive");
        Payoff p{PayoffKind::gaussian_bump, {amplitude, rate, center, width}};
        const double a = std::abs(amplitude);
        p.bounds_ = {a, a / (width * std::sqrt(std::numbers::e)), a * rate, a / (width * width)};
        return p;
    }

    static Payoff windowed_polynomial(std::vector<double> coefficients, double width, double rate) {
        if (!(rate >= 0.0)) throw ConfigError("/payoff/params/rate", "must be nonnegative");
        if (!(width > 0.0)) throw ConfigError("/payoff/params/width", "must be positive");
        if (coefficients.empty()) throw ConfigError("/payoff/params/coefficients", "must be nonempty");
        std::vector<double> params{width, rate};
        params.insert(params.end(), coefficients.begin(), coefficients.end());
        Payoff p{PayoffKind::windowed_polynomial, std::move(params)};
        // The Gaussian window kills the polynomial well inside +-40 w.
        PayoffBounds b;
        constexpr int samples = 40000;
        for (int i = 0; i <= samples; ++i) {
            const double x = -40.0 * width + 80.0 * width * i / samples;
            b.f = std::max(b.f, std::abs(p.value(0.0, x)));
            b.fx = std::max(b.fx, std::abs(p.dx(0.0, x)));
            b.fxx = std::max(b.fxx, std::abs(p.dxx(0.0, x)));
        }
        // 1% headroom over the sampled maxima.
        b.f *= 1.01;
        b.fx *= 1.01;
        b.fxx *= 1.01;
        b.ft = rate * b.f;
        p.bounds_ = b;
        return p;
    }

    double value(double t, double x) const noexcept {
        switch (kind_) {
            case PayoffKind::time_exponential:
                return params_[0] * std::exp(-params_[1] * t);
            case PayoffKind::gaussian_bump: {
                const double z = (x - params_[2]) / params_[3];
                return params_[0] * std::exp(-params_[1] * t - 0.5 * z * z);
            }
            case PayoffKind::windowed_polynomial:
                return std::exp(-params_[1] * t) * poly(x, 0) * window(x);
        }
        return 0.0;
    }

    double dx(double t, double x) const noexcept {
        switch (kind_) {
            case PayoffKind::time_exponential:
                return 0.0;
            case PayoffKind::gaussian_bump:
                return -(x - params_[2]) / (params_[3] * params_[3]) * value(t, x);
            case PayoffKind::windowed_polynomial: {
                const double w2 = params_[0] * params_[0];
                return std::exp(-params_[1] * t) * (poly(x, 1) - x * poly(x, 0) / w2) * window(x);
            }
        }
        return 0.0;
    }

    double dt(double t, double x) const noexcept {
        return -params_[1] * value(t, x);
    }

    double dxx(double t, double x) const noexcept {
        switch (kind_) {
            case PayoffKind::time_exponential:
                return 0.0;
            case PayoffKind::gaussian_bump: {
                const double w2 = params_[3] * params_[3];
                const double d = x - params_[2];
                return (d * d / (w2 * w2) - 1.0 / w2) * value(t, x);
            }
            case PayoffKind::windowed_polynomial: {
                const double w2 = params_[0] * params_[0];
                const double p0 = poly(x, 0), p1 = poly(x, 1), p2 = poly(x, 2);
                return std::exp(-params_[1] * t) *
                       (p2 - 2.0 * x * p1 / w2 - p0 / w2 + x * x * p0 / (w2 * w2)) * window(x);
            }
        }
        return 0.0;
    }

    /// True when f doesn't depend on x.
    bool time_only() const noexcept { return kind_ == PayoffKind::time_exponential; }

    PayoffKind kind() const noexcept { return kind_; }
    const std::vector<double>& params() const noexcept { return params_; }
    const PayoffBounds& bounds() const noexcept { return bounds_; }

    /// Checks the declared bounds at one point (used by property tests).
    bool within_bounds(double t, double x) const noexcept {
        constexpr double slack = 1e-12;
        return std::abs(value(t, x)) <= bounds_.f + slack && std::abs(dx(t, x)) <= bounds_.fx + slack &&
               std::abs(this->dt(t, x)) <= bounds_.ft + slack && std::abs(dxx(t, x)) <= bounds_.fxx + slack;
    }

private:
    Payoff(PayoffKind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

    // derivative-th derivative of the polynomial part (windowed kind only)
    double poly(double x, int derivative) const noexcept {
        double acc = 0.0;
        const std::size_t first = 2;
        for (std::size_t i = params_.size(); i-- > first;) {
            const auto power = static_cast<int>(i - first);
            if (power < derivative) break;
            double c = params_[i];
            for (int d = 0; d < derivative; ++d) c *= power - d;
            acc = acc * x + c;
        }
        return acc;
    }

    double window(double x) const noexcept {
        const double z = x / params_[0];
        return std::exp(-0.5 * z * z);
    }

    PayoffKind kind_;
    std::vector<double> params_;
    PayoffBounds bounds_;
};

// ---------------------------------------------------------------------------
// Increment distributions
// ---------------------------------------------------------------------------

enum class DistributionKind { standard_normal, centered_exponential, uniform_symmetric, gaussian_mixture, two_point };

struct Moments {
    double m3 = 0.0;  ///< E X^3
    double m4 = 0.0;  ///< E X^4
};

struct NormalSampler {
    boost::random::normal_distribution<double> dist{0.0, 1.0};
    template <class Rng>
    double operator()(Rng& rng) {
        return dist(rng);
    }
};

/// Exp(1) - 1.
struct CenteredExponentialSampler {
    boost::random::exponential_distribution<double> dist{1.0};
    template <class Rng>
    double operator()(Rng& rng) {
        return dist(rng) - 1.0;
    }
};

/// Uniform on [-sqrt 3, sqrt 3].
struct UniformSymmetricSampler {
    template <class Rng>
    double operator()(Rng& rng) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return std::numbers::sqrt3 * (2.0 * u - 1.0);
    }
};

struct MixtureSampler {
    double weight, mean1, sd1, mean2, sd2;
    boost::random::normal_distribution<double> dist{0.0, 1.0};
    template <class Rng>
    double operator()(Rng& rng) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const double z = dist(rng);
        return u < weight ? mean1 + sd1 * z : mean2 + sd2 * z;
    }
};

/// +-1 with probability 1/2 each (lattice).
struct TwoPointSampler {
    template <class Rng>
    double operator()(Rng& rng) {
        return (rng() >> 63) != 0 ? 1.0 : -1.0;
    }
};

/// Deterministic increments, for hand-checkable walks. Not a member of the
/// distribution catalogue (mean is not 0).
struct ConstantSampler {
    double value = 1.0;
    template <class Rng>
    double operator()(Rng&) const noexcept {
        return value;
    }
};

/// Law of the walk increments. Every catalogue member has mean 0 and
/// variance 1; moments are exact.
class IncrementDistribution {
public:
    static IncrementDistribution standard_normal() { return {DistributionKind::standard_normal, {}}; }
    static IncrementDistribution centered_exponential() { return {DistributionKind::centered_exponential, {}}; }
    static IncrementDistribution uniform_symmetric() { return {DistributionKind::uniform_symmetric, {}}; }
    static IncrementDistribution two_point() { return {DistributionKind::two_point, {}}; }

    /// Two Gaussian components: weight p at (mean1, sd1); the second
    /// component's mean and sd are solved so the mixture has mean 0 and
    /// variance 1.
    static IncrementDistribution gaussian_mixture(double weight, double mean1, double sd1) {
        if (!(weight > 0.0 && weight < 1.0)) throw ConfigError("/distribution/params/weight", "must lie in (0, 1)");
        if (!(sd1 > 0.0)) throw ConfigError("/distribution/params/sd1", "must be positive");
        const double mean2 = -weight * mean1 / (1.0 - weight);
        const double var2 = (1.0 - weight * (mean1 * mean1 + sd1 * sd1)) / (1.0 - weight) - mean2 * mean2;
        if (!(var2 > 0.0)) {
            throw ConfigError("/distribution/params", "no second component gives mean 0 and variance 1");
        }
        return {DistributionKind::gaussian_mixture, {weight, mean1, sd1, mean2, std::sqrt(var2)}};
    }

    DistributionKind kind() const noexcept { return kind_; }
    const std::vector<double>& params() const noexcept { return params_; }
    bool non_lattice() const noexcept { return kind_ != DistributionKind::two_point; }

    /// Refuses lattice laws; every expansion operation starts here.
    void require_non_lattice() const {
        if (!non_lattice()) {
            throw AssumptionViolation(1, "increment law '" + name() + "' is lattice, not strongly non-lattice");
        }
    }

    Moments moments() const noexcept {
        switch (kind_) {
            case DistributionKind::standard_normal:
                return {0.0, 3.0};
            case DistributionKind::centered_exponential:
                return {2.0, 9.0};
            case DistributionKind::uniform_symmetric:
                return {0.0, 1.8};
            case DistributionKind::two_point:
                return {0.0, 1.0};
            case DistributionKind::gaussian_mixture: {
                Moments m;
                const double w[2] = {params_[0], 1.0 - params_[0]};
                const double mu[2] = {params_[1], params_[3]};
                const double sd[2] = {params_[2], params_[4]};
                for (int i = 0; i < 2; ++i) {
                    const double m2 = mu[i] * mu[i], s2 = sd[i] * sd[i];
                    m.m3 += w[i] * mu[i] * (m2 + 3.0 * s2);
                    m.m4 += w[i] * (m2 * m2 + 6.0 * m2 * s2 + 3.0 * s2 * s2);
                }
                return m;
            }
        }
        return {};
    }

    std::string name() const {
        switch (kind_) {
            case DistributionKind::standard_normal: return "standard-normal";
            case DistributionKind::centered_exponential: return "centered-exponential";
            case DistributionKind::uniform_symmetric: return "uniform-symmetric";
            case DistributionKind::gaussian_mixture: return "gaussian-mixture";
            case DistributionKind::two_point: return "two-point";
        }
        return "unknown";
    }

    /// Calls fn with a concrete sampler so hot loops avoid per-draw dispatch.
    template <class Fn>
    decltype(auto) with_sampler(Fn&& fn) const {
        switch (kind_) {
            case DistributionKind::standard_normal: return fn(NormalSampler{});
            case DistributionKind::centered_exponential: return fn(CenteredExponentialSampler{});
            case DistributionKind::uniform_symmetric: return fn(UniformSymmetricSampler{});
            case DistributionKind::gaussian_mixture:
                return fn(MixtureSampler{params_[0], params_[1], params_[2], params_[3], params_[4]});
            case DistributionKind::two_point: return fn(TwoPointSampler{});
        }
        return fn(NormalSampler{});
    }

    friend bool operator==(const IncrementDistribution& a, const IncrementDistribution& b) {
        return a.kind_ == b.kind_ && a.params_ == b.params_;
    }

private:
    IncrementDistribution(DistributionKind kind, std::vector<double> params)
        : kind_(kind), params_(std::move(params)) {}

    DistributionKind kind_;
    std::vector<double> params_;
};

inline Moments moments(const IncrementDistribution& dist) noexcept { return dist.moments(); }

// ---------------------------------------------------------------------------
// Time traces and the payoff split
// ---------------------------------------------------------------------------

/// Sampled function of time (e.g. Delta(t) at solver time nodes), read back
/// by monotone piecewise-cubic Hermite (Fritsch-Carlson) interpolation.
class TimeTrace {
public:
    enum class Tail { strict, hold_last };

    TimeTrace() = default;

    TimeTrace(std::vector<double> times, std::vector<double> values, Tail tail = Tail::strict)
        : times_(std::move(times)), values_(std::move(values)), tail_(tail) {
        if (times_.size() != values_.size() || times_.size() < 2) {
            throw DomainError("time trace needs matching times/values with at least two nodes");
        }
        for (std::size_t i = 1; i < times_.size(); ++i) {
            if (!(times_[i] > times_[i - 1])) throw DomainError("time trace nodes must be strictly increasing");
        }
        slopes_ = fritsch_carlson(times_, values_);
        const double span = times_.back() - times_.front();
        const double h = span / static_cast<double>(times_.size() - 1);
        uniform_ = true;
        for (std::size_t i = 0; i < times_.size() && uniform_; ++i) {
            uniform_ = std::abs(times_[i] - (times_.front() + h * static_cast<double>(i))) <= 1e-9 * span;
        }
    }

    double operator()(double t) const {
        if (t < times_.front() || t > times_.back()) {
            if (tail_ == Tail::strict) {
                throw DomainError("time " + std::to_string(t) + " outside trace window [" +
                                  std::to_string(times_.front()) + ", " + std::to_string(times_.back()) + "]");
            }
            return t < times_.front() ? values_.front() : values_.back();
        }
        const std::size_t last = times_.size() - 2;
        std::size_t i;
        if (uniform_) {
            const double s = (t - times_.front()) / (times_[1] - times_[0]);
            i = std::min(last, static_cast<std::size_t>(std::max(0.0, s)));
            if (i < last && t >= times_[i + 1]) ++i;
            if (i > 0 && t < times_[i]) --i;
        } else {
            i = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
            i = std::min(last, i == 0 ? 0 : i - 1);
        }
        const double h = times_[i + 1] - times_[i];
        const double s = (t - times_[i]) / h;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * values_[i] + (s3 - 2 * s2 + s) * h * slopes_[i] +
               (-2 * s3 + 3 * s2) * values_[i + 1] + (s3 - s2) * h * slopes_[i + 1];
    }

    TimeTrace with_tail(Tail tail) const {
        TimeTrace copy = *this;
        copy.tail_ = tail;
        return copy;
    }

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double t_min() const noexcept { return times_.front(); }
    double t_max() const noexcept { return times_.back(); }
    Tail tail() const noexcept { return tail_; }

private:
    static std::vector<double> fritsch_carlson(const std::vector<double>& x, const std::vector<double>& y) {
        const std::size_t n = x.size();
        std::vector<double> secant(n - 1), d(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) secant[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if (n == 2) {
            d[0] = d[1] = secant[0];
            return d;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (secant[i - 1] * secant[i] <= 0.0) continue;
            const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
            const double w0 = 2 * h1 + h0, w1 = h1 + 2 * h0;
            d[i] = (w0 + w1) / (w0 / secant[i - 1] + w1 / secant[i]);
        }
        // three-point end slopes, limited to keep monotonicity
        auto end_slope = [](double h0, double h1, double m0, double m1) {
            double e = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
            if (e * m0 <= 0.0) return 0.0;
            if (m0 * m1 <= 0.0 && std::abs(e) > 3 * std::abs(m0)) return 3 * m0;
            return e;
        };
        d[0] = end_slope(x[1] - x[0], x[2] - x[1], secant[0], secant[1]);
        d[n - 1] = end_slope(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], secant[n - 2], secant[n - 3]);
        return d;
    }

    std::vector<double> times_;
    std::vector<double> values_;
    std::vector<double> slopes_;
    Tail tail_ = Tail::strict;
    bool uniform_ = false;
};

/// f = f0 + f1 with f1(t, x) = Delta(t) (x - b(t)). f0 matches the value
/// function and its x-derivative along the boundary.
class SplitPayoff {
public:
    SplitPayoff(Payoff payoff, Boundary boundary, TimeTrace delta)
        : payoff_(std::move(payoff)), boundary_(std::move(boundary)), delta_(std::move(delta)) {}

    double f0(double t, double x) const { return payoff_.value(t, x) - f1(t, x); }
    double f1(double t, double x) const { return delta_(t) * (x - boundary_(t)); }
    double f0_dx(double t, double x) const { return payoff_.dx(t, x) - delta_(t); }

    const Payoff& payoff() const noexcept { return payoff_; }
    const Boundary& boundary() const noexcept { return boundary_; }
    const TimeTrace& delta() const noexcept { return delta_; }

private:
    Payoff payoff_;
    Boundary boundary_;
    TimeTrace delta_;
};

inline SplitPayoff split_payoff(const Payoff& payoff, const Boundary& boundary, const TimeTrace& delta) {
    return SplitPayoff{payoff, boundary, delta};
}

}  // namespace crossing
