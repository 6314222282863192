#pragma once

#include <cmath>
#include <string>

#include "glwb/account_grid.hpp"
#include "glwb/cir_lattice.hpp"
#include "glwb/common.hpp"
#include "glwb/params.hpp"

namespace glwb {

// Joint one-step transition probabilities for the (account, rate) pair,
// ordered (account move, rate move).
struct JointTransition {
    double p_dd = 0.0;
    double p_du = 0.0;
    double p_ud = 0.0;
    double p_uu = 0.0;

    double sum() const { return p_dd + p_du + p_ud + p_uu; }
    double account_up_marginal() const { return p_ud + p_uu; }
    double rate_up_marginal() const { return p_du + p_uu; }
};

// Near-floor switch for the decoupled product regime.  Below
// theta_star*sqrt(dt) the rate is so close to its reflecting floor that the
// covariance equation is dropped and independence is imposed.
inline double default_theta_star(const MarketParams& market) {
    return 0.5 * std::min(market.theta, market.r0);
}

inline JointTransition product_transition(double p_a_up, double p_r_up) {
    const double ad = 1.0 - p_a_up, ru = p_r_up, rd = 1.0 - p_r_up;
    return {ad * rd, ad * ru, p_a_up * rd, p_a_up * ru};
}

// Attainable range of the joint down-down mass given both marginals.  The
// covariance row can demand a co-movement outside this range at strongly
// drifted nodes (clamped or near-clamped marginals); the solution is then
// projected onto the nearest attainable point, which keeps total mass and
// both marginal equations exact.  At a fully saturated marginal the
// projection coincides with the independent product form.
struct FrechetBounds {
    double lo;
    double hi;
};
inline FrechetBounds frechet_bounds(double p_a_up, double p_r_up) {
    const double p_a_dn = 1.0 - p_a_up, p_r_dn = 1.0 - p_r_up;
    return {std::max(0.0, p_a_dn + p_r_dn - 1.0), std::min(p_a_dn, p_r_dn)};
}

// Closed-form solution of the moment-matching system
//   sum p = 1,   p_dd + p_du = 1 - p_a_up,   p_dd + p_ud = 1 - p_r_up,
//   m_dd*p_dd + m_du*p_du + m_ud*p_ud + m_uu*p_uu = cov_target.
// The first three equations leave one degree of freedom (p_dd); the
// covariance row fixes it, with denominator (m_uu - m_ud - m_du + m_dd) =
// (dA_u - dA_d)*(dR_u - dR_d).
inline JointTransition solve_moment_system(double p_a_up, double p_r_up, double m_dd,
                                           double m_du, double m_ud, double m_uu,
                                           double cov_target) {
    const double p_a_dn = 1.0 - p_a_up;
    const double p_r_dn = 1.0 - p_r_up;
    const double denom = m_dd - m_du - m_ud + m_uu;
    if (denom == 0.0) return product_transition(p_a_up, p_r_up);
    const double p_dd =
        (cov_target - m_du * p_a_dn - m_ud * p_r_dn - m_uu * (1.0 - p_a_dn - p_r_dn)) / denom;
    return {p_dd, p_a_dn - p_dd, p_r_dn - p_dd, 1.0 - p_a_dn - p_r_dn + p_dd};
}

// Moment system solution with the covariance degree of freedom projected onto
// its attainable interval.
inline JointTransition solve_moment_system_feasible(double p_a_up, double p_r_up, double m_dd,
                                                    double m_du, double m_ud, double m_uu,
                                                    double cov_target) {
    JointTransition t =
        solve_moment_system(p_a_up, p_r_up, m_dd, m_du, m_ud, m_uu, cov_target);
    const auto [lo, hi] = frechet_bounds(p_a_up, p_r_up);
    if (t.p_dd < lo || t.p_dd > hi) {
        const double p_dd = t.p_dd < lo ? lo : hi;
        const double p_a_dn = 1.0 - p_a_up, p_r_dn = 1.0 - p_r_up;
        t = {p_dd, p_a_dn - p_dd, p_r_dn - p_dd, 1.0 - p_a_dn - p_r_dn + p_dd};
    }
    return t;
}

// Tolerance below which a negative probability is treated as roundoff and
// clamped; anything more negative is a genuine method failure.
inline constexpr double kNegativeProbabilityTolerance = 1e-10;

inline JointTransition clamp_and_renormalize(JointTransition t, int i, int k, int j) {
    double* entries[4] = {&t.p_dd, &t.p_du, &t.p_ud, &t.p_uu};
    bool touched = false;
    for (double* e : entries) {
        if (*e < 0.0) {
            if (*e < -kNegativeProbabilityTolerance)
                throw NumericalError("joint transition probability " + std::to_string(*e) +
                                     " at node (i=" + std::to_string(i) +
                                     ", k=" + std::to_string(k) + ", j=" + std::to_string(j) +
                                     ") is outside the method's validity");
            *e = 0.0;
            touched = true;
        }
    }
    if (touched) {
        const double s = t.sum();
        for (double* e : entries) *e /= s;
    }
    return t;
}

// Probability of an up move of the account chain at node (j, R).
inline double account_up_probability(const AccountGrid& grid, int j, double R, double dt) {
    const auto [jd, ju] = grid.successors(j, R, dt);
    if (ju == jd) return 1.0;
    const double drifted = grid.node(j) * (1.0 + R * dt);
    const double p = (drifted - grid.node(jd)) / (grid.node(ju) - grid.node(jd));
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

// Full joint transition at account node j >= 1 and rate node (i, k) of a
// built lattice: decoupled product form in the near-floor regime, otherwise
// the unique solution of the covariance-matching system, with tiny negative
// entries repaired and larger ones rejected.
inline JointTransition joint_probabilities(const AccountGrid& grid, const RateLattice& lat,
                                           const MarketParams& market, int i, int k, int j,
                                           double theta_star = -1.0) {
    if (j < 1) throw std::invalid_argument("joint_probabilities: j must be >= 1");
    if (theta_star < 0.0) theta_star = default_theta_star(market);
    const double dt = lat.dt();
    const double R = lat.value(i, k);
    const double p_r_up = lat.up_probability(i, k);
    const double p_a_up = account_up_probability(grid, j, R, dt);
    if (R < theta_star * std::sqrt(dt)) return product_transition(p_a_up, p_r_up);
    const auto [jd, ju] = grid.successors(j, R, dt);
    const double A = grid.node(j);
    const double dAd = grid.node(jd) - A, dAu = grid.node(ju) - A;
    const double Rd = lat.value(i + 1, lat.k_down(i, k));
    const double Ru = lat.value(i + 1, lat.k_up(i, k));
    const double dRd = Rd - R, dRu = Ru - R;
    const double cov = market.rho * market.sigma_r * market.sigma_F * std::sqrt(R) * A * dt;
    JointTransition t = solve_moment_system_feasible(p_a_up, p_r_up, dAd * dRd, dAd * dRu,
                                                     dAu * dRd, dAu * dRu, cov);
    return clamp_and_renormalize(t, i, k, j);
}

// Absorbed account: the pair moves only along the rate axis.
inline JointTransition zero_account_transition(const RateLattice& lat, int i, int k) {
    const double p_r_up = lat.up_probability(i, k);
    return {1.0 - p_r_up, p_r_up, 0.0, 0.0};
}

} // namespace glwb
