#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "glwb/common.hpp"
#include "glwb/contract_mechanics.hpp"
#include "glwb/health_model.hpp"
#include "glwb/params.hpp"

namespace glwb {

// Counter-based generator: every draw is a pure function of
// (seed, path, step, dim), so parallel batches reproduce bit-exactly no
// matter how they are scheduled.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : key_(mix(seed ^ 0x5851f42d4c957f2dULL)) {}

    double uniform(uint64_t path, uint32_t step, uint32_t dim) const {
        const uint64_t ctr = (path << 26) ^ (static_cast<uint64_t>(step) << 2) ^ dim;
        const uint64_t z = mix(key_ ^ ctr);
        // top 53 bits, shifted into (0, 1)
        return (static_cast<double>(z >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double normal(uint64_t path, uint32_t step, uint32_t dim) const {
        return inverse_normal_cdf(uniform(path, step, dim));
    }

    // Wichura's PPND16 rational approximation of the standard normal quantile.
    static double inverse_normal_cdf(double p) {
        const double q = p - 0.5;
        if (std::abs(q) <= 0.425) {
            const double r = 0.180625 - q * q;
            return q *
                   (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                         6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                       1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                     1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
                   (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                         3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                       5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                     4.2313330701600911252e1) * r + 1.0);
        }
        double r = q < 0.0 ? p : 1.0 - p;
        r = std::sqrt(-std::log(r));
        double val;
        if (r <= 5.0) {
            r -= 1.6;
            val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                        2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                      3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                    4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
                  (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                        1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                      6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                    2.05319162663775882187e0) * r + 1.0);
        } else {
            r -= 5.0;
            val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                        1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                      2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                    5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
                  (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                        1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                      1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                    5.99832206555887937690e-1) * r + 1.0);
        }
        return q < 0.0 ? -val : val;
    }

private:
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    uint64_t key_;
};

struct McOptions {
    long paths = 1'000'000;
    int steps_per_year = 1;  // rate-integration substeps; 1 suffices in BS mode
    uint64_t seed = 42;
    int initial_health = 1;
};

struct McEstimate {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * sample std / sqrt(n)
    long n_paths = 0;
    int steps_per_year = 1;
    uint64_t seed = 0;
    double wall_seconds = 0.0;
    bool cv_degraded = false;  // control-variate fit fell back to plain MC
};

namespace mc_detail {

// draw dimensions: 0 health, 1 rate shock, 2 fund shock
inline constexpr uint32_t kDimHealth = 0;
inline constexpr uint32_t kDimRate = 1;
inline constexpr uint32_t kDimFund = 2;

struct PathOutcome {
    double payoff = 0.0;  // discounted cash flows to holder and heirs
    double x_account = 0.0;  // unfloored auxiliary account at death, discounted
    double x_fund = 0.0;     // fund level at death (F_0 = 1)
    double x_income = 0.0;   // sum of guaranteed + allowance amounts to death
    double x_tau = 0.0;      // death anniversary
};

// One simulated contract path under the static strategy (gamma = 1 while
// alive, death benefit at the first anniversary after death).
inline PathOutcome simulate_path(const ContractParams& c, const MarketParams& m,
                                 const HealthSequence& seq, const CounterRng& rng, uint64_t path,
                                 int substeps, int initial_health) {
    const int T = seq.years();
    const double sf = m.sigma_F;
    PathOutcome out;
    int health = initial_health;
    double A3 = fee_step(c.P, c);  // inception fee
    double aux3 = c.P - c.alpha * c.P - c.beta * c.P;
    double fund = 1.0;
    double integral = 0.0;  // accumulated integral of r
    double rate = m.r0;
    const double rho = m.rho, rho_c = std::sqrt(1.0 - m.rho * m.rho);

    for (int n = 1; n <= T; ++n) {
        // fund and rate over the year (n-1, n]
        double fund_ratio;
        if (m.mode == RateModel::BsConstantRate) {
            const double z = rng.normal(path, n - 1, kDimFund);
            fund_ratio = std::exp((m.r0 - 0.5 * sf * sf) + sf * z);
            integral += m.r0;
        } else {
            const double delta = 1.0 / substeps;
            const double sq_delta = std::sqrt(delta);
            double log_ratio = 0.0;
            for (int s = 0; s < substeps; ++s) {
                const uint32_t step = static_cast<uint32_t>((n - 1) * substeps + s);
                const double zr = rng.normal(path, step, kDimRate);
                const double zf = rho * zr + rho_c * rng.normal(path, step, kDimFund);
                const double rp = std::max(rate, 0.0);
                const double rate_next = rate + m.k_r * (m.theta - rp) * delta +
                                         m.sigma_r * std::sqrt(rp * delta) * zr;
                const double seg =
                    0.5 * (rp + std::max(rate_next, 0.0)) * delta;  // trapezoid on r+
                log_ratio += seg - 0.5 * sf * sf * delta + sf * sq_delta * zf;
                integral += seg;
                rate = rate_next;
            }
            fund_ratio = std::exp(log_ratio);
        }
        fund *= fund_ratio;
        const double A_minus = A3 * fund_ratio;
        const double aux_minus = aux3 * fund_ratio;
        const double disc = std::exp(-integral);

        // health over the year
        const double u = rng.uniform(path, n - 1, kDimHealth);
        const Matrix7& tp = seq.year(n - 1);
        double acc = 0.0;
        int next_health = 7;
        for (int hp = 1; hp <= 7; ++hp) {
            acc += tp(health - 1, hp - 1);
            if (u <= acc) {
                next_health = hp;
                break;
            }
        }
        health = next_health;

        if (health == kDeadState) {
            const double db = death_benefit(A_minus, death_benefit_guarantee(n, c));
            out.payoff += disc * db;
            out.x_account = aux_minus * disc;
            out.x_fund = fund;
            out.x_income += guaranteed_amount(n, c);
            out.x_tau = n;
            return out;
        }

        const double A1 = fee_step(A_minus, c);
        const double L = ltc_payment(n, health, c);
        const double A2 = std::max(A1 - L, 0.0);
        const double G = guaranteed_amount(n, c);
        A3 = std::max(A2 - G, 0.0);
        aux3 = (aux_minus - c.alpha * aux_minus - c.beta * c.P) - L - G;
        out.payoff += disc * (L + G);
        out.x_income += G + L;
    }
    // unreachable: the final annual matrix forces absorption
    out.x_tau = T;
    return out;
}

struct ControlMeans {
    double account = 0.0;
    double fund = 0.0;
    double income = 0.0;
    double tau = 0.0;
};

// Exact expectations of the four controls under the constant-rate model,
// computed from the health chain alone.
inline ControlMeans control_means(const ContractParams& c, const MarketParams& m,
                                  const HealthSequence& seq, int initial_health) {
    const int T = seq.years();
    const double r = m.r0;
    // death-time distribution and disabled-state occupancy
    std::vector<double> p_tau(T + 1, 0.0);     // P(tau = n)
    std::vector<double> mass_dead(T + 1, 0.0); // P(M_n = 7)
    std::vector<StateVector> dist(T + 1);
    dist[0] = StateVector{};
    dist[0][initial_health - 1] = 1.0;
    for (int n = 1; n <= T; ++n) {
        dist[n] = propagate(dist[n - 1], seq.year(n - 1));
        mass_dead[n] = dist[n][6];
        p_tau[n] = dist[n][6] - dist[n - 1][6];
    }
    auto disabled_mass = [&](const StateVector& v) { return v[3] + v[4] + v[5]; };

    ControlMeans cm;
    for (int n = 1; n <= T; ++n) {
        cm.fund += p_tau[n] * std::exp(r * n);
        cm.tau += n * p_tau[n];
        const double surv = 1.0 - mass_dead[n - 1];  // P(tau >= n)
        cm.income += guaranteed_amount(n, c) * surv +
                     (c.c > 0.0 ? ltc_payment(n, 4, c) * disabled_mass(dist[n]) : 0.0);
    }
    // discounted unfloored account at death:
    // a_n = (1-alpha)^n P - sum_{m<n} (1-alpha)^(n-1-m) e^{-rm} D_m with
    // D_m = beta*P + G_m [m>=1] + allowance(M_m); allowance needs the joint
    // law of (M_m in 4..6, tau = n).
    std::vector<std::vector<double>> joint(T, std::vector<double>(T + 1, 0.0));
    for (int mth = 0; mth < T; ++mth) {
        StateVector w{};
        for (int h = 4; h <= 6; ++h) w[h - 1] = dist[mth][h - 1];
        double dead_prev = 0.0;
        for (int l = mth; l < T; ++l) {
            w = propagate(w, seq.year(l));
            joint[mth][l + 1] = w[6] - dead_prev;
            dead_prev = w[6];
        }
    }
    // the discounted fund ratio has unit expectation, so e^{-rn} A~_n is an
    // (1-alpha)-damped premium less the accumulated discounted deductions
    const double om = 1.0 - c.alpha;
    for (int n = 1; n <= T; ++n) {
        if (p_tau[n] == 0.0) continue;
        double acc = std::pow(om, n) * c.P * p_tau[n];
        for (int mth = 0; mth < n; ++mth) {
            const double det = c.beta * c.P + (mth >= 1 ? guaranteed_amount(mth, c) : 0.0);
            double term = det * p_tau[n];
            if (c.c > 0.0 && mth >= 1) term += ltc_payment(mth, 4, c) * joint[mth][n];
            acc -= std::pow(om, n - 1 - mth) * std::exp(-r * mth) * term;
        }
        cm.account += acc;
    }
    return cm;
}

inline constexpr long kBatchSize = 16384;

} // namespace mc_detail

// Plain Monte Carlo value of the static-strategy contract.  Deterministic for
// a given (seed, paths): the batch reduction order is fixed.
inline McEstimate simulate_price_static(const ContractParams& contract,
                                        const MarketParams& market, const HealthSequence& seq,
                                        const McOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    contract.validate();
    market.validate();
    if (options.paths < 2) throw ConfigError("mc.paths must be at least 2");
    if (options.steps_per_year < 1) throw ConfigError("mc.steps_per_year must be >= 1");
    const CounterRng rng(options.seed);
    const long nb = (options.paths + mc_detail::kBatchSize - 1) / mc_detail::kBatchSize;
    std::vector<double> sum(nb, 0.0), sumsq(nb, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (long b = 0; b < nb; ++b) {
        const long lo = b * mc_detail::kBatchSize;
        const long hi = std::min(options.paths, lo + mc_detail::kBatchSize);
        double s = 0.0, s2 = 0.0;
        for (long p = lo; p < hi; ++p) {
            const double y = mc_detail::simulate_path(contract, market, seq, rng, p,
                                                      options.steps_per_year,
                                                      options.initial_health)
                                 .payoff;
            s += y;
            s2 += y * y;
        }
        sum[b] = s;
        sumsq[b] = s2;
    }
    double s = 0.0, s2 = 0.0;
    for (long b = 0; b < nb; ++b) {
        s += sum[b];
        s2 += sumsq[b];
    }
    const double n = static_cast<double>(options.paths);
    McEstimate est;
    est.mean = s / n;
    const double var = std::max(0.0, (s2 - n * est.mean * est.mean) / (n - 1.0));
    est.half_width = 1.96 * std::sqrt(var / n);
    est.n_paths = options.paths;
    est.steps_per_year = options.steps_per_year;
    est.seed = options.seed;
    est.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return est;
}

// Monte Carlo with four control variates (account at death, fund at death,
// accumulated guaranteed income, death time), whose expectations are computed
// exactly from the health chain.  Constant-rate model only.
inline McEstimate simulate_price_static_cv(const ContractParams& contract,
                                           const MarketParams& market,
                                           const HealthSequence& seq, const McOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    contract.validate();
    market.validate();
    if (market.mode != RateModel::BsConstantRate)
        throw ConfigError("control variates require the constant-rate model (no closed-form "
                          "control expectations under the stochastic rate)");
    if (options.paths < 8) throw ConfigError("mc.paths must be at least 8");
    const CounterRng rng(options.seed);
    const auto mu = mc_detail::control_means(contract, market, seq, options.initial_health);
    const double mu_x[4] = {mu.account, mu.fund, mu.income, mu.tau};

    const long nb = (options.paths + mc_detail::kBatchSize - 1) / mc_detail::kBatchSize;
    // per batch: sum y, y^2, x_i, x_i*y, x_i*x_j (upper triangle)
    struct Acc {
        double y = 0, yy = 0;
        double x[4] = {0, 0, 0, 0};
        double xy[4] = {0, 0, 0, 0};
        double xx[10] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    };
    std::vector<Acc> acc(nb);
#pragma omp parallel for schedule(dynamic)
    for (long b = 0; b < nb; ++b) {
        const long lo = b * mc_detail::kBatchSize;
        const long hi = std::min(options.paths, lo + mc_detail::kBatchSize);
        Acc a;
        for (long p = lo; p < hi; ++p) {
            const auto o = mc_detail::simulate_path(contract, market, seq, rng, p, 1,
                                                    options.initial_health);
            const double x[4] = {o.x_account, o.x_fund, o.x_income, o.x_tau};
            a.y += o.payoff;
            a.yy += o.payoff * o.payoff;
            int t = 0;
            for (int i = 0; i < 4; ++i) {
                a.x[i] += x[i];
                a.xy[i] += x[i] * o.payoff;
                for (int j = i; j < 4; ++j) a.xx[t++] += x[i] * x[j];
            }
        }
        acc[b] = a;
    }
    Acc tot;
    for (const auto& a : acc) {
        tot.y += a.y;
        tot.yy += a.yy;
        for (int i = 0; i < 4; ++i) {
            tot.x[i] += a.x[i];
            tot.xy[i] += a.xy[i];
        }
        for (int t = 0; t < 10; ++t) tot.xx[t] += a.xx[t];
    }
    const double n = static_cast<double>(options.paths);
    const double ybar = tot.y / n;
    double xbar[4];
    for (int i = 0; i < 4; ++i) xbar[i] = tot.x[i] / n;
    // sample covariances
    double cxx[4][4], cxy[4];
    {
        int t = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) {
                const double v = (tot.xx[t++] - n * xbar[i] * xbar[j]) / (n - 1.0);
                cxx[i][j] = cxx[j][i] = v;
            }
        for (int i = 0; i < 4; ++i) cxy[i] = (tot.xy[i] - n * xbar[i] * ybar) / (n - 1.0);
    }
    const double var_y = std::max(0.0, (tot.yy - n * ybar * ybar) / (n - 1.0));

    // solve cxx * beta = cxy by Gaussian elimination with partial pivoting
    double m4[4][5];
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) m4[i][j] = cxx[i][j];
        m4[i][4] = cxy[i];
    }
    bool singular = false;
    double scale = 0.0;
    for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(cxx[i][i]));
    for (int col = 0; col < 4 && !singular; ++col) {
        int piv = col;
        for (int rrow = col + 1; rrow < 4; ++rrow)
            if (std::abs(m4[rrow][col]) > std::abs(m4[piv][col])) piv = rrow;
        if (std::abs(m4[piv][col]) < 1e-12 * std::max(scale, 1.0)) {
            singular = true;
            break;
        }
        std::swap(m4[col], m4[piv]);
        for (int rrow = col + 1; rrow < 4; ++rrow) {
            const double f = m4[rrow][col] / m4[col][col];
            for (int cc = col; cc < 5; ++cc) m4[rrow][cc] -= f * m4[col][cc];
        }
    }
    McEstimate est;
    est.n_paths = options.paths;
    est.steps_per_year = 1;
    est.seed = options.seed;
    if (singular) {
        est.cv_degraded = true;
        est.mean = ybar;
        est.half_width = 1.96 * std::sqrt(var_y / n);
    } else {
        double beta[4];
        for (int i = 3; i >= 0; --i) {
            double v = m4[i][4];
            for (int j = i + 1; j < 4; ++j) v -= m4[i][j] * beta[j];
            beta[i] = v / m4[i][i];
        }
        double adj = ybar, var_adj = var_y;
        for (int i = 0; i < 4; ++i) {
            adj -= beta[i] * (xbar[i] - mu_x[i]);
            var_adj -= 2.0 * beta[i] * cxy[i];
            for (int j = 0; j < 4; ++j) var_adj += beta[i] * beta[j] * cxx[i][j];
        }
        est.mean = adj;
        est.half_width = 1.96 * std::sqrt(std::max(var_adj, 0.0) / n);
    }
    est.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return est;
}

struct McFairFeeResult {
    double alpha = 0.0;
    double alpha_half_width = 0.0;  // propagated 95% half-width, in rate units
    McEstimate price_at_alpha;
    int iterations = 0;
    double seconds = 0.0;
};

// Secant search for the fair fee on the Monte Carlo price, with common random
// numbers across probes (identical seed, hence identical draws).
inline McFairFeeResult fair_fee_mc(const ContractParams& contract, const MarketParams& market,
                                   const HealthSequence& seq, const McOptions& options,
                                   bool use_cv = false, double price_tol_rel = 2e-5,
                                   int max_iter = 24) {
    const auto t0 = std::chrono::steady_clock::now();
    ContractParams probe = contract;
    McEstimate last;
    auto f = [&](double a) {
        probe.alpha = a;
        last = use_cv ? simulate_price_static_cv(probe, market, seq, options)
                      : simulate_price_static(probe, market, seq, options);
        return last.mean - contract.P;
    };
    McFairFeeResult res;
    const double tol_abs = price_tol_rel * contract.P;
    double a0 = 0.0, a1 = 0.01;
    double f0 = f(a0);
    if (f0 < 0.0)
        throw InfeasibleFeeError("contract value is below the premium at zero account fee");
    double f1 = f(a1);
    int it = 2;
    if (f1 >= f0) throw NumericalError("MC price is not decreasing in alpha");
    double slope = (f1 - f0) / (a1 - a0);
    while (it < max_iter && std::abs(f1) >= tol_abs) {
        double a2 = a1 - f1 / slope;
        if (a2 < 0.0) a2 = 0.0;
        if (std::abs(a2 - a1) < 1e-10) break;
        a0 = a1;
        f0 = f1;
        a1 = a2;
        f1 = f(a1);
        ++it;
        slope = (f1 - f0) / (a1 - a0);
    }
    res.alpha = a1;
    res.price_at_alpha = last;
    res.alpha_half_width = std::abs(slope) > 0.0 ? last.half_width / std::abs(slope) : 0.0;
    res.iterations = it;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace glwb
