#pragma once

#include <cmath>
#include <vector>

#include "glwb/common.hpp"

namespace glwb {

// Time-invariant log-spaced grid for the account value.  Index 0 is the
// absorbing zero node; nodes j >= 1 are P*exp((j - j_min)*sigma_F*sqrt(dt)),
// so node j_min is exactly the premium and consecutive positive nodes differ
// by the factor exp(sigma_F*sqrt(dt)).
class AccountGrid {
public:
    AccountGrid() = default;

    static AccountGrid build(double P, double sigma_F, double dt, double f_A) {
        if (P <= 0.0) throw std::domain_error("account grid: P must be positive");
        if (sigma_F <= 0.0) throw std::domain_error("account grid: sigma_F must be positive");
        if (dt <= 0.0) throw std::domain_error("account grid: dt must be positive");
        if (f_A <= 1.0) throw std::domain_error("account grid: f_A must exceed 1");
        AccountGrid g;
        g.P_ = P;
        g.log_step_ = sigma_F * std::sqrt(dt);
        const int half = static_cast<int>(std::floor(std::log(f_A) / g.log_step_));
        g.jmin_ = half + 1;
        g.jmax_ = half + g.jmin_;
        if (g.jmax_ < 5)
            throw std::domain_error("account grid: fewer than five positive nodes; "
                                    "increase f_A or the step count");
        g.ratio_up_ = std::exp(g.log_step_);
        g.ratio_down_ = std::exp(-g.log_step_);
        g.nodes_.resize(g.jmax_ + 1);
        g.nodes_[0] = 0.0;
        for (int j = 1; j <= g.jmax_; ++j)
            g.nodes_[j] = j == g.jmin_ ? P : P * std::exp((j - g.jmin_) * g.log_step_);
        return g;
    }

    int j_min() const { return jmin_; }
    int j_max() const { return jmax_; }
    double premium() const { return P_; }
    double log_step() const { return log_step_; }
    double ratio_up() const { return ratio_up_; }
    double ratio_down() const { return ratio_down_; }
    double node(int j) const { return nodes_[j]; }
    const std::vector<double>& nodes() const { return nodes_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Bracketing successors of the drifted value A_j*(1 + R*dt): the nearest
    // grid index strictly below j (always j-1, floored at 1) and the first
    // index above j whose node value reaches the drifted value (capped at
    // j_max).  Only defined for positive-account nodes.
    struct Successors {
        int j_d;
        int j_u;
    };
    Successors successors(int j, double R, double dt) const {
        if (j < 1 || j > jmax_)
            throw std::invalid_argument("account successors: j out of range");
        const int j_d = j > 1 ? j - 1 : 1;
        if (j == jmax_) return {j_d, jmax_};
        const double drifted = nodes_[j] * (1.0 + R * dt);
        int j_u = j + up_offset(R, dt);
        if (j_u > jmax_) j_u = jmax_;
        // guard the closed-form offset against boundary rounding
        while (j_u > j + 1 && nodes_[j_u - 1] >= drifted) --j_u;
        while (j_u < jmax_ && nodes_[j_u] < drifted) ++j_u;
        return {j_d, j_u};
    }

    // Number of grid cells the drifted value moves up, identical for every
    // interior node (the grid is uniform in log space).
    int up_offset(double R, double dt) const {
        const double delta = std::log1p(R * dt) / log_step_;
        int m = static_cast<int>(std::ceil(delta - 1e-12));
        return m < 1 ? 1 : m;
    }

    // Linear interpolation weights over at most two adjacent indices.
    struct Location {
        int j_lo;
        int j_hi;
        double w_hi;          // weight on j_hi; weight on j_lo is 1 - w_hi
        bool clamped_above;   // value exceeded the top node
    };
    Location locate(double value) const {
        if (value < 0.0) throw std::domain_error("account locate: negative value");
        if (value == 0.0) return {0, 0, 0.0, false};
        if (value >= nodes_[jmax_]) return {jmax_, jmax_, 0.0, value > nodes_[jmax_]};
        if (value <= nodes_[1]) {
            // between the absorbing node and the first positive node
            return {0, 1, value / nodes_[1], false};
        }
        const double xi = jmin_ + std::log(value / P_) / log_step_;
        int j0 = static_cast<int>(std::floor(xi));
        double frac = xi - j0;
        if (frac > 1.0 - 1e-9) { ++j0; frac = 0.0; }
        if (frac < 1e-9) return {j0, j0, 0.0, false};
        const double w = (value - nodes_[j0]) / (nodes_[j0 + 1] - nodes_[j0]);
        return {j0, j0 + 1, w, false};
    }

    // Evaluate a grid-sampled function at an arbitrary account value.
    double interpolate(const double* values, double query) const {
        const Location loc = locate(query);
        return (1.0 - loc.w_hi) * values[loc.j_lo] + loc.w_hi * values[loc.j_hi];
    }
    double interpolate(const std::vector<double>& values, double query) const {
        return interpolate(values.data(), query);
    }

private:
    double P_ = 0.0;
    double log_step_ = 0.0;
    double ratio_up_ = 1.0;
    double ratio_down_ = 1.0;
    int jmin_ = 0;
    int jmax_ = 0;
    std::vector<double> nodes_;
};

} // namespace glwb
