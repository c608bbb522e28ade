#pragma once

// Backward heat-equation solves on the moving domain {x < b(t)}.
//
// Working in y = b(t) - x >= 0 pins the boundary at y = 0; the value
// v(t, y) = u(t, b(t) - y) then solves
//
//     v_t + b'(t) v_y + v_yy / 2 + s(t, y) = 0,   v(t, 0) = data(t),
//
// with terminal row v(t_max, .) = data(t_max) and a zero-flux far field at
// y_max. Time stepping is Crank-Nicolson (central drift) with optional
// Rannacher start-up half steps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crossing/errors.hpp"
#include "crossing/model.hpp"

namespace crossing {

enum class FarField { neumann_zero, constant_extension };

struct GridConfig {
    double y_max = 8.0;   ///< depth below the boundary
    double t_max = 12.0;  ///< horizon truncation
    int ny = 512;         ///< space nodes, y_j = j * hy
    int nt = 1024;        ///< time nodes, t_i = i * dt
    FarField far_field = FarField::neumann_zero;
    /// Largest tolerated bound on the bias from truncating at t_max.
    double truncation_tolerance = 1e-4;
    /// Leading time intervals done as two implicit-Euler half steps.
    int rannacher_steps = 1;

    void validate() const {
        if (!(y_max > 0.0)) throw ConfigError("/grid/y_max", "must be positive");
        if (!(t_max > 0.0)) throw ConfigError("/grid/t_max", "must be positive");
        if (ny < 16) throw ConfigError("/grid/ny", "must be at least 16");
        if (nt < 16) throw ConfigError("/grid/nt", "must be at least 16");
        if (!(truncation_tolerance > 0.0)) throw ConfigError("/grid/truncation_tolerance", "must be positive");
        if (rannacher_steps < 0) throw ConfigError("/grid/rannacher_steps", "must be nonnegative");
    }

    double hy() const noexcept { return y_max / (ny - 1); }
    double dt() const noexcept { return t_max / (nt - 1); }
    double time(int i) const noexcept { return i == nt - 1 ? t_max : i * dt(); }
    double y(int j) const noexcept { return j == ny - 1 ? y_max : j * hy(); }

    /// Same grid with (ny - 1) and (nt - 1) multiplied by `factor`.
    GridConfig refined(int factor) const {
        GridConfig g = *this;
        g.ny = (ny - 1) * factor + 1;
        g.nt = (nt - 1) * factor + 1;
        return g;
    }

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct FieldMetadata {
    std::string kind;              ///< "u", "g", "w", "u_xxx", "survival", "synthetic"
    std::uint64_t source_hash = 0; ///< hash of whatever produced the boundary data
    double tail_probability = std::numeric_limits<double>::quiet_NaN();  ///< P(tau0 > t_max) from (0, 0)
    double truncation_bias_bound = std::numeric_limits<double>::quiet_NaN();
    double far_field_estimate = std::numeric_limits<double>::quiet_NaN();
    double max_abs_third = std::numeric_limits<double>::quiet_NaN();   ///< max |v_yyy|
    double max_abs_fourth = std::numeric_limits<double>::quiet_NaN();  ///< max |v_yyyy|
    std::vector<std::string> warnings;
};

/// Solution on the (time node, space node) grid in boundary-fitted
/// coordinates. Immutable once built.
class Field {
public:
    Field(GridConfig grid, Boundary boundary, std::vector<double> values, FieldMetadata meta = {})
        : grid_(grid), boundary_(std::move(boundary)), values_(std::move(values)), meta_(std::move(meta)) {
        if (grid_.ny < 2 || grid_.nt < 2) throw DomainError("field grid needs at least two nodes per axis");
        if (values_.size() != static_cast<std::size_t>(grid_.ny) * static_cast<std::size_t>(grid_.nt)) {
            throw DomainError("field values do not match the grid shape");
        }
    }

    /// Field sampled from v(t, y).
    template <class Fn>
    static Field from_function(const GridConfig& grid, const Boundary& boundary, Fn&& v, std::string kind = "synthetic") {
        std::vector<double> values(static_cast<std::size_t>(grid.ny) * grid.nt);
        for (int i = 0; i < grid.nt; ++i) {
            for (int j = 0; j < grid.ny; ++j) values[static_cast<std::size_t>(i) * grid.ny + j] = v(grid.time(i), grid.y(j));
        }
        FieldMetadata meta;
        meta.kind = std::move(kind);
        return Field{grid, boundary, std::move(values), std::move(meta)};
    }

    double operator()(int i, int j) const noexcept { return values_[static_cast<std::size_t>(i) * grid_.ny + j]; }
    std::span<const double> row(int i) const noexcept {
        return {values_.data() + static_cast<std::size_t>(i) * grid_.ny, static_cast<std::size_t>(grid_.ny)};
    }
    std::span<const double> values() const noexcept { return values_; }
    const GridConfig& grid() const noexcept { return grid_; }
    const Boundary& boundary() const noexcept { return boundary_; }
    const FieldMetadata& metadata() const noexcept { return meta_; }

    /// v(t, y) by tensor Lagrange interpolation (6 points in y, 4 in t).
    double at_y(double t, double y) const {
        check_window(t, y);
        std::array<double, 6> wy{};
        std::array<double, 4> wt{};
        const int jy = stencil(y / grid_.hy(), grid_.ny, 6, wy);
        const int it = stencil(t / grid_.dt(), grid_.nt, 4, wt);
        const int ky = std::min(6, grid_.ny);
        const int kt = std::min(4, grid_.nt);
        double acc = 0.0;
        for (int a = 0; a < kt; ++a) {
            const double* r = values_.data() + static_cast<std::size_t>(it + a) * grid_.ny + jy;
            double inner = 0.0;
            for (int b = 0; b < ky; ++b) inner += wy[b] * r[b];
            acc += wt[a] * inner;
        }
        return acc;
    }

    /// u(t, x) for x <= b(t).
    double value(double t, double x) const { return at_y(t, boundary_(t) - x); }

    /// Bilinear read-back of u(t, x), for cheap path integrands.
    double bilinear(double t, double x) const {
        const double y = boundary_(t) - x;
        check_window(t, y);
        const double sy = std::min(y / grid_.hy(), grid_.ny - 1.000000001);
        const double st = std::min(t / grid_.dt(), grid_.nt - 1.000000001);
        const int j = static_cast<int>(sy), i = static_cast<int>(st);
        const double fy = sy - j, ft = st - i;
        const double a = (1 - fy) * (*this)(i, j) + fy * (*this)(i, j + 1);
        const double b = (1 - fy) * (*this)(i + 1, j) + fy * (*this)(i + 1, j + 1);
        return (1 - ft) * a + ft * b;
    }

    bool contains(double t, double x) const noexcept {
        const double y = boundary_(t) - x;
        return t >= 0.0 && t <= grid_.t_max && y >= 0.0 && y <= grid_.y_max;
    }

private:
    void check_window(double t, double y) const {
        if (y < -1e-12) throw DomainError("point lies above the boundary (y = " + std::to_string(y) + ")");
        if (y > grid_.y_max * (1 + 1e-12)) throw DomainError("point lies beyond the far field");
        if (t < -1e-12 || t > grid_.t_max * (1 + 1e-12)) throw DomainError("time outside the solved window");
    }

    // Lagrange weights on k consecutive nodes around fractional index s.
    template <std::size_t N>
    static int stencil(double s, int nodes, int k, std::array<double, N>& w) {
        k = std::min(k, nodes);
        int first = static_cast<int>(std::floor(s)) - (k / 2 - 1);
        first = std::clamp(first, 0, nodes - k);
        for (int a = 0; a < k; ++a) {
            double num = 1.0, den = 1.0;
            for (int b = 0; b < k; ++b) {
                if (b == a) continue;
                num *= s - (first + b);
                den *= static_cast<double>(a - b);
            }
            w[a] = num / den;
        }
        return first;
    }

    GridConfig grid_;
    Boundary boundary_;
    std::vector<double> values_;
    FieldMetadata meta_;
};

struct SolveOptions {
    /// sup over s >= t_max of |data(s) - data(t_max)|; sampled when absent.
    std::optional<double> tail_oscillation;
    /// Reuse a previously computed P(tau0 > t_max).
    std::optional<double> tail_probability;
    /// Refuse when the truncation bias bound exceeds grid.truncation_tolerance.
    bool check_truncation = true;
    std::uint64_t source_hash = 0;
    std::string kind = "u";  ///< recorded in the field metadata
};

namespace detail {

/// Thomas algorithm, in place on rhs. Sizes: diag n, lower/upper n (entry 0
/// of lower and n-1 of upper unused).
inline void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs, std::span<double> scratch) {
    const std::size_t n = diag.size();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = i + 1 < n ? upper[i] / m : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

/// One backward step v(t_hi) -> v(t_lo) with theta = 1/2 (Crank-Nicolson)
/// or 1 (implicit Euler). Source rows are optional (empty spans).
class BackwardStepper {
public:
    BackwardStepper(const Boundary& boundary, const GridConfig& grid)
        : boundary_(boundary), grid_(grid), n_(grid.ny - 1), lower_(n_), diag_(n_), upper_(n_), rhs_(n_), scratch_(n_) {}

    void step(std::span<const double> hi, double t_hi, std::span<double> lo, double t_lo, double data_lo,
              std::span<const double> src_hi, std::span<const double> src_lo, double theta) {
        const double h = grid_.hy();
        const double dt = t_hi - t_lo;
        const double diff = 0.5 / (h * h);
        const bool neumann = grid_.far_field == FarField::neumann_zero;
        const int J = grid_.ny - 1;

        // explicit part at t_hi
        const double drift_hi = boundary_.derivative(t_hi) / (2.0 * h);
        const double ex = (1.0 - theta) * dt;
        for (int j = 1; j <= J; ++j) {
            double av;
            if (j < J) {
                av = (diff - drift_hi) * hi[j - 1] - 2.0 * diff * hi[j] + (diff + drift_hi) * hi[j + 1];
            } else {
                av = neumann ? 2.0 * diff * (hi[J - 1] - hi[J]) : 0.0;
            }
            double r = hi[j] + ex * av;
            if (!src_hi.empty()) r += ex * src_hi[j];
            if (!src_lo.empty()) r += theta * dt * src_lo[j];
            rhs_[j - 1] = r;
        }

        // implicit matrix at t_lo
        const double drift_lo = boundary_.derivative(t_lo) / (2.0 * h);
        const double im = theta * dt;
        for (int j = 1; j <= J; ++j) {
            const std::size_t k = static_cast<std::size_t>(j - 1);
            if (j < J) {
                lower_[k] = -im * (diff - drift_lo);
                diag_[k] = 1.0 + im * 2.0 * diff;
                upper_[k] = -im * (diff + drift_lo);
            } else if (neumann) {
                lower_[k] = -im * 2.0 * diff;
                diag_[k] = 1.0 + im * 2.0 * diff;
                upper_[k] = 0.0;
            } else {
                // v_J = v_{J-1}
                lower_[k] = -1.0;
                diag_[k] = 1.0;
                upper_[k] = 0.0;
                rhs_[k] = 0.0;
            }
        }
        // Dirichlet node moves to the right-hand side.
        rhs_[0] -= lower_[0] * data_lo;
        lower_[0] = 0.0;

        solve_tridiagonal(lower_, diag_, upper_, rhs_, scratch_);
        lo[0] = data_lo;
        std::copy(rhs_.begin(), rhs_.end(), lo.begin() + 1);
    }

private:
    const Boundary& boundary_;
    const GridConfig& grid_;
    std::size_t n_;
    std::vector<double> lower_, diag_, upper_, rhs_, scratch_;
};

/// Full backward march. `data` gives v(t, 0); `source` is either empty or
/// nt*ny values of s on the grid.
inline std::vector<double> march(const Boundary& boundary, const GridConfig& grid,
                                 const std::function<double(double)>& data, std::span<const double> terminal,
                                 std::span<const double> source, int rannacher_steps) {
    const int ny = grid.ny, nt = grid.nt;
    std::vector<double> v(static_cast<std::size_t>(ny) * nt);
    std::copy(terminal.begin(), terminal.end(), v.begin() + static_cast<std::size_t>(nt - 1) * ny);
    BackwardStepper stepper(boundary, grid);
    std::vector<double> half(ny), src_half;
    if (!source.empty()) src_half.resize(ny);
    auto row = [&](int i) { return std::span<double>(v.data() + static_cast<std::size_t>(i) * ny, ny); };
    auto src_row = [&](int i) {
        return source.empty() ? std::span<const double>{} : source.subspan(static_cast<std::size_t>(i) * ny, ny);
    };

    for (int i = nt - 2; i >= 0; --i) {
        const double t_lo = grid.time(i), t_hi = grid.time(i + 1);
        if (nt - 2 - i < rannacher_steps) {
            const double t_mid = 0.5 * (t_lo + t_hi);
            std::span<const double> sm{};
            if (!source.empty()) {
                auto a = src_row(i), b = src_row(i + 1);
                for (int j = 0; j < ny; ++j) src_half[j] = 0.5 * (a[j] + b[j]);
                sm = src_half;
            }
            stepper.step(row(i + 1), t_hi, half, t_mid, data(t_mid), {}, sm, 1.0);
            stepper.step(half, t_mid, row(i), t_lo, data(t_lo), {}, src_row(i), 1.0);
        } else {
            stepper.step(row(i + 1), t_hi, row(i), t_lo, data(t_lo), src_row(i + 1), src_row(i), 0.5);
        }
    }
    return v;
}

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// Rough probability that a path started at y0 reaches y_max before the
/// boundary within the horizon (scale function of the mean drift, capped by
/// the driftless reflection bound).
inline double far_field_estimate(const Boundary& boundary, const GridConfig& grid) {
    const double y0 = boundary.b0();
    const double mu = (boundary(grid.t_max) - boundary(0.0)) / grid.t_max;
    double scale;
    if (std::abs(mu) < 1e-12) {
        scale = y0 / grid.y_max;
    } else {
        scale = std::expm1(-2.0 * mu * y0) / std::expm1(-2.0 * mu * grid.y_max);
    }
    const double reach = grid.y_max - y0 - std::max(0.0, mu) * grid.t_max;
    const double reflection = reach > 0.0 ? 2.0 * normal_upper_tail(reach / std::sqrt(grid.t_max)) : 1.0;
    return std::clamp(std::min(scale, reflection), 0.0, 1.0);
}

}  // namespace detail

/// P(tau0 > t_max) for the Brownian path started at (0, 0), from a solve
/// with unit boundary data and zero terminal data.
inline double survival_tail(const Boundary& boundary, const GridConfig& grid) {
    grid.validate();
    std::vector<double> terminal(grid.ny, 0.0);
    terminal[0] = 1.0;
    const auto v = detail::march(boundary, grid, [](double) { return 1.0; }, terminal, {}, std::max(2, grid.rannacher_steps));
    Field f{grid, boundary, v};
    if (boundary.b0() > grid.y_max) throw DomainError("b(0) lies beyond the far field");
    return std::clamp(1.0 - f.at_y(0.0, boundary.b0()), 0.0, 1.0);
}

namespace detail {

inline double tail_oscillation(const std::function<double(double)>& data, const GridConfig& grid) {
    const double end = data(grid.t_max);
    double osc = 0.0;
    try {
        for (int k = 1; k <= 256; ++k) osc = std::max(osc, std::abs(data(grid.t_max * (1.0 + 3.0 * k / 256.0)) - end));
    } catch (const DomainError&) {
        // Data only known on the window (a sampled trace): assume it does not
        // grow past the window and charge its largest magnitude over the last
        // tenth, plus the end value.
        osc = 0.0;
        for (int k = 0; k <= 64; ++k) osc = std::max(osc, std::abs(data(grid.t_max * (0.9 + 0.1 * k / 64.0))));
        osc += std::abs(end);
    }
    return osc;
}

inline void record_derivative_maxima(const std::vector<double>& v, const GridConfig& grid, FieldMetadata& meta) {
    const double h = grid.hy();
    double m3 = 0.0, m4 = 0.0;
    for (int i = 0; i + 1 < grid.nt; ++i) {
        const double* r = v.data() + static_cast<std::size_t>(i) * grid.ny;
        for (int j = 2; j + 2 < grid.ny; ++j) {
            m3 = std::max(m3, std::abs(r[j + 2] - 2 * r[j + 1] + 2 * r[j - 1] - r[j - 2]) / (2 * h * h * h));
            m4 = std::max(m4, std::abs(r[j + 2] - 4 * r[j + 1] + 6 * r[j] - 4 * r[j - 1] + r[j - 2]) / (h * h * h * h));
        }
    }
    meta.max_abs_third = m3;
    meta.max_abs_fourth = m4;
    if (m3 > 0.0 && h * m4 > 0.1 * m3) {
        meta.warnings.push_back("fourth-derivative noise is comparable to the third-derivative signal; refine ny");
    }
}

inline void check_stability(const Boundary& boundary, const GridConfig& grid, FieldMetadata& meta) {
    // Central drift stays monotone while |b'| hy <= 2 * (1/2).
    if (boundary.derivative_bound() * grid.hy() > 1.0) {
        meta.warnings.push_back("cell Peclet number exceeds 1; central drift differencing may oscillate");
    }
}

}  // namespace detail

/// u(t, x) = E data(tau(t, x)) on the grid. The terminal row holds
/// data(t_max) (constant extension).
inline Field solve_value(const Boundary& boundary, const std::function<double(double)>& data, const GridConfig& grid,
                         const SolveOptions& options = {}) {
    grid.validate();
    boundary.validate();
    if (boundary.b0() > grid.y_max) throw ConfigError("/grid/y_max", "must exceed b(0)");

    FieldMetadata meta;
    meta.kind = options.kind;
    meta.source_hash = options.source_hash;
    meta.tail_probability = options.tail_probability ? *options.tail_probability : survival_tail(boundary, grid);
    const double osc = options.tail_oscillation ? *options.tail_oscillation : detail::tail_oscillation(data, grid);
    meta.truncation_bias_bound = meta.tail_probability * osc;
    meta.far_field_estimate = detail::far_field_estimate(boundary, grid);
    detail::check_stability(boundary, grid, meta);
    if (options.check_truncation && meta.truncation_bias_bound > grid.truncation_tolerance) {
        throw NumericalRefusal("horizon truncation bias bound " + std::to_string(meta.truncation_bias_bound) +
                               " (P(tau0 > t_max) = " + std::to_string(meta.tail_probability) +
                               ") exceeds tolerance " + std::to_string(grid.truncation_tolerance) +
                               "; increase t_max");
    }

    std::vector<double> terminal(grid.ny, data(grid.t_max));
    auto v = detail::march(boundary, grid, data, terminal, {}, grid.rannacher_steps);
    detail::record_derivative_maxima(v, grid, meta);
    return Field{grid, boundary, std::move(v), std::move(meta)};
}

/// w(t, x) = E int_t^tau source ds with w = 0 on the boundary. The source
/// must live on exactly this grid and boundary.
inline Field solve_running_cost(const Boundary& boundary, const Field& source, const GridConfig& grid,
                                const SolveOptions& options = {}) {
    grid.validate();
    if (!(source.grid() == grid) || !(source.boundary() == boundary)) {
        throw DomainError("running-cost source lives on a different grid or boundary; refusing to interpolate");
    }
    FieldMetadata meta;
    meta.kind = "w";
    meta.source_hash = options.source_hash;
    meta.tail_probability = options.tail_probability ? *options.tail_probability : survival_tail(boundary, grid);
    double tail_source = 0.0;
    for (double s : source.row(grid.nt - 1)) tail_source = std::max(tail_source, std::abs(s));
    // Paths still alive at t_max lose at most |s| per unit of remaining time;
    // the remaining time is charged at the horizon length.
    meta.truncation_bias_bound = meta.tail_probability * tail_source * grid.t_max;
    meta.far_field_estimate = detail::far_field_estimate(boundary, grid);
    detail::check_stability(boundary, grid, meta);

    std::vector<double> terminal(grid.ny, 0.0);
    auto v = detail::march(boundary, grid, [](double) { return 0.0; }, terminal, source.values(), grid.rannacher_steps);
    return Field{grid, boundary, std::move(v), std::move(meta)};
}

/// u_x(t_i, b(t_i)-) per time node from the one-sided 3-point stencil.
inline TimeTrace boundary_gradient(const Field& field) {
    const auto& g = field.grid();
    if (g.ny < 3) throw DomainError("boundary gradient needs ny >= 3");
    const double h = g.hy();
    std::vector<double> t(g.nt), ux(g.nt);
    for (int i = 0; i < g.nt; ++i) {
        t[i] = g.time(i);
        // u_x = -v_y
        ux[i] = (3.0 * field(i, 0) - 4.0 * field(i, 1) + field(i, 2)) / (2.0 * h);
    }
    return TimeTrace{std::move(t), std::move(ux)};
}

/// u_xxx = -v_yyy on every node: centered differences inside, second-order
/// one-sided stencils on the two edge nodes at each end.
inline Field third_derivative(const Field& field) {
    const auto& g = field.grid();
    if (g.ny < 5) throw DomainError("third derivative needs ny >= 5");
    const int J = g.ny - 1;
    const double h3 = 2.0 * std::pow(g.hy(), 3);
    std::vector<double> out(field.values().size());
    for (int i = 0; i < g.nt; ++i) {
        auto r = field.row(i);
        double* o = out.data() + static_cast<std::size_t>(i) * g.ny;
        o[0] = (-5 * r[0] + 18 * r[1] - 24 * r[2] + 14 * r[3] - 3 * r[4]) / h3;
        o[1] = (-3 * r[0] + 10 * r[1] - 12 * r[2] + 6 * r[3] - r[4]) / h3;
        for (int j = 2; j <= J - 2; ++j) o[j] = (r[j + 2] - 2 * r[j + 1] + 2 * r[j - 1] - r[j - 2]) / h3;
        o[J - 1] = -(-3 * r[J] + 10 * r[J - 1] - 12 * r[J - 2] + 6 * r[J - 3] - r[J - 4]) / h3;
        o[J] = -(-5 * r[J] + 18 * r[J - 1] - 24 * r[J - 2] + 14 * r[J - 3] - 3 * r[J - 4]) / h3;
        for (int j = 0; j <= J; ++j) o[j] = -o[j];
    }
    FieldMetadata meta;
    meta.kind = "u_xxx";
    meta.source_hash = field.metadata().source_hash;
    return Field{g, field.boundary(), std::move(out), std::move(meta)};
}

/// Delta(t_i) = f_x(t_i, b(t_i)) - u_x(t_i, b(t_i)-).
inline TimeTrace compute_delta(const Field& u, const Payoff& payoff) {
    const auto ux = boundary_gradient(u);
    std::vector<double> delta(ux.values().size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double t = ux.times()[i];
        delta[i] = payoff.dx(t, u.boundary()(t)) - ux.values()[i];
    }
    return TimeTrace{ux.times(), std::move(delta)};
}

/// Boundary data t -> f(t, b(t)) of a payoff.
inline std::function<double(double)> boundary_data(const Payoff& payoff, const Boundary& boundary) {
    return [payoff, boundary](double t) { return payoff.value(t, boundary(t)); };
}

}  // namespace crossing
