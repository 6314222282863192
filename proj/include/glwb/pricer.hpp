#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "glwb/account_grid.hpp"
#include "glwb/cir_lattice.hpp"
#include "glwb/common.hpp"
#include "glwb/contract_mechanics.hpp"
#include "glwb/health_model.hpp"
#include "glwb/joint_lattice.hpp"
#include "glwb/params.hpp"

namespace glwb {

struct PricingOptions {
    int steps_per_year = 100;  // N
    double grid_factor = 100.0;  // f_A: account grid spans [P/f_A, P*f_A]
    Strategy strategy = Strategy::static_withdrawal();
    int initial_health = 1;
    double theta_star = -1.0;  // near-floor switch; <0 picks min(theta, r0)/2
    std::vector<int> action_years;    // anniversaries whose decisions to record
    std::vector<int> action_healths;  // health states whose decisions to record
    bool keep_inception_slice = false;
};

// Contract value surface over (account j, rate k, health h) at one time step.
// Health sheets 1..6 are stored per rate node; the dead-state surface at an
// anniversary is the death benefit, which does not depend on the rate, so it
// is held as a single row over j.
struct ValueSlice {
    int step = 0;
    int k_lo = 0;
    int k_count = 0;   // rate nodes in this step's band
    int k_stride = 0;  // allocated rows per sheet (>= any band in the run)
    int j_count = 0;
    std::vector<double> alive;  // [6][k][j]
    std::vector<double> death;  // [j]

    void resize(int ks, int js) {
        k_stride = k_count = ks;
        j_count = js;
        alive.assign(static_cast<size_t>(6) * ks * js, 0.0);
        death.assign(js, 0.0);
    }
    double* sheet(int h) { return alive.data() + static_cast<size_t>(h - 1) * k_stride * j_count; }
    const double* sheet(int h) const {
        return alive.data() + static_cast<size_t>(h - 1) * k_stride * j_count;
    }
    double at(int j, int k, int h) const {
        if (h == kDeadState) return death[j];
        return sheet(h)[static_cast<size_t>(k - k_lo) * j_count + j];
    }
};

// Withdrawal decisions over the (account, rate) slice at one anniversary for
// one health state.
struct ActionMap {
    int n = 0;
    int h = 1;
    int k_lo = 0;
    int k_count = 0;
    int j_count = 0;
    std::vector<double> rate;     // per k
    std::vector<double> account;  // per j
    std::vector<double> gamma;    // [k][j]
    double at(int j, int k) const { return gamma[static_cast<size_t>(k - k_lo) * j_count + j]; }
};

struct PricingResult {
    double price = 0.0;
    std::optional<double> fair_alpha;
    std::vector<ActionMap> action_maps;
    long steps = 0;
    long node_updates = 0;
    double seconds = 0.0;
    std::optional<ValueSlice> inception_slice;
};

namespace detail {

// Uniform rate-side access: a built CIR lattice, or the single-node constant
// rate chain the Black-Scholes sub-model reduces to.
struct RateView {
    const RateLattice* lat = nullptr;
    double flat_rate = 0.0;

    int k_min(int i) const { return lat ? lat->k_min(i) : 0; }
    int k_max(int i) const { return lat ? lat->k_max(i) : 0; }
    double value(int i, int k) const { return lat ? lat->value(i, k) : flat_rate; }
    int k_down(int i, int k) const { return lat ? lat->k_down(i, k) : 0; }
    int k_up(int i, int k) const { return lat ? lat->k_up(i, k) : 0; }
    double p_up(int i, int k) const { return lat ? lat->up_probability(i, k) : 1.0; }
    int max_band_width(int steps) const {
        if (!lat) return 1;
        int w = 1;
        for (int i = 0; i <= steps; ++i) w = std::max(w, lat->band_width(i));
        return w;
    }
};

// Precomputed linear-interpolation gather: out[j] = scale*(w_lo*in[lo] +
// w_hi*in[hi]) + add[j].
struct InterpPlan {
    std::vector<int> lo, hi;
    std::vector<double> w_hi;
    std::vector<double> add;
    double scale = 1.0;
    bool direct = false;  // out[j] = add[j], no gather

    static InterpPlan from_queries(const AccountGrid& grid, const std::vector<double>& q,
                                   double scale) {
        InterpPlan p;
        const int n = static_cast<int>(q.size());
        p.lo.resize(n);
        p.hi.resize(n);
        p.w_hi.resize(n);
        p.add.assign(n, 0.0);
        p.scale = scale;
        for (int j = 0; j < n; ++j) {
            const auto loc = grid.locate(q[j]);
            p.lo[j] = loc.j_lo;
            p.hi[j] = loc.j_hi;
            p.w_hi[j] = loc.w_hi;
        }
        return p;
    }

    void apply(const double* in, double* out) const {
        if (direct) {
            std::memcpy(out, add.data(), add.size() * sizeof(double));
            return;
        }
        const int n = static_cast<int>(lo.size());
        for (int j = 0; j < n; ++j)
            out[j] = scale * ((1.0 - w_hi[j]) * in[lo[j]] + w_hi[j] * in[hi[j]]) + add[j];
    }
};

// Interior-node joint probabilities for one rate node, valid for every
// account node whose up move stays on the grid.  On the uniform log grid the
// account marginal and all covariance coefficients scale with the account
// value, so the system is solved once per (i, k).
struct StepKernel {
    double w_dd, w_du, w_ud, w_uu;  // joint probabilities times the discount
    double disc;
    double p_r_up;
    int m;  // up-move offset in account cells
};

inline StepKernel make_kernel(const AccountGrid& grid, const RateView& rv,
                              const MarketParams& market, double dt, double theta_star, int i,
                              int k) {
    StepKernel ker{};
    const double R = rv.value(i, k);
    ker.disc = std::exp(-dt * R);
    ker.p_r_up = rv.p_up(i, k);
    ker.m = grid.up_offset(R, dt);
    const double ed = grid.ratio_down();
    const double eu = ker.m == 1 ? grid.ratio_up() : std::exp(ker.m * grid.log_step());
    const double drifted = 1.0 + R * dt;
    double p_a_up = (drifted - ed) / (eu - ed);
    p_a_up = p_a_up < 0.0 ? 0.0 : (p_a_up > 1.0 ? 1.0 : p_a_up);

    JointTransition t;
    if (!rv.lat || R < theta_star * std::sqrt(dt)) {
        t = product_transition(p_a_up, ker.p_r_up);
    } else {
        const double Rd = rv.value(i + 1, rv.k_down(i, k));
        const double Ru = rv.value(i + 1, rv.k_up(i, k));
        const double dRd = Rd - R, dRu = Ru - R;
        const double dAd = ed - 1.0, dAu = eu - 1.0;  // per unit of account value
        const double cov = market.rho * market.sigma_r * market.sigma_F * std::sqrt(R) * dt;
        t = solve_moment_system_feasible(p_a_up, ker.p_r_up, dAd * dRd, dAd * dRu, dAu * dRd,
                                         dAu * dRu, cov);
        t = clamp_and_renormalize(t, i, k, -1);
    }
    ker.w_dd = ker.disc * t.p_dd;
    ker.w_du = ker.disc * t.p_du;
    ker.w_ud = ker.disc * t.p_ud;
    ker.w_uu = ker.disc * t.p_uu;
    return ker;
}

inline void extrapolate_boundaries(double* row, const AccountGrid& grid) {
    const int jmax = grid.j_max();
    const double a1 = grid.node(1), a2 = grid.node(2), a3 = grid.node(3);
    row[1] = row[2] + (row[3] - row[2]) * (a1 - a2) / (a3 - a2);
    const double am = grid.node(jmax), am1 = grid.node(jmax - 1), am2 = grid.node(jmax - 2);
    row[jmax] = row[jmax - 1] + (row[jmax - 2] - row[jmax - 1]) * (am - am1) / (am2 - am1);
}

} // namespace detail

// Backward-induction valuation of the contract.  Returns the inception value
// at (A = P, r = r0, health = initial_health); see PricingOptions for the
// discretization controls.
inline PricingResult price(const ContractParams& contract, const MarketParams& market,
                           const HealthSequence& seq, const PricingOptions& options,
                           const AccountGrid* grid_in = nullptr,
                           const RateLattice* lattice_in = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    contract.validate();
    market.validate();
    options.strategy.validate();
    if (seq.x0 != contract.x0)
        throw ConfigError("health sequence entry age does not match the contract");
    if (options.initial_health < 1 || options.initial_health > 6)
        throw ConfigError("initial health state must be an alive state (1..6)");
    if (options.steps_per_year < 1) throw ConfigError("steps_per_year must be >= 1");

    const int T = contract.years_to_horizon();
    const int N = options.steps_per_year;
    const double dt = 1.0 / N;

    AccountGrid grid_local;
    const AccountGrid* grid = grid_in;
    if (!grid) {
        grid_local = AccountGrid::build(contract.P, market.sigma_F, dt, options.grid_factor);
        grid = &grid_local;
    }
    std::optional<RateLattice> lattice_local;
    detail::RateView rv;
    if (market.mode == RateModel::BsCir) {
        if (lattice_in) {
            rv.lat = lattice_in;
        } else {
            lattice_local = RateLattice::build(market, T, N);
            rv.lat = &*lattice_local;
        }
    } else {
        rv.flat_rate = market.r0;
    }
    const double theta_star =
        options.theta_star >= 0.0 ? options.theta_star : default_theta_star(market);

    const int Js = grid->size();
    const int jmax = grid->j_max();
    const int NT = N * T;
    const int Kmax = rv.max_band_width(NT);
    const bool full_dynamic = options.strategy.allows_intra_year_surrender();
    std::vector<double> mesh = options.strategy.gamma_mesh;
    std::sort(mesh.begin(), mesh.end());

    auto wants_map = [&](int n, int h) {
        return std::find(options.action_years.begin(), options.action_years.end(), n) !=
                   options.action_years.end() &&
               std::find(options.action_healths.begin(), options.action_healths.end(), h) !=
                   options.action_healths.end();
    };
    const bool dynamic_kind = options.strategy.kind == StrategyKind::Dynamic ||
                              options.strategy.kind == StrategyKind::FullDynamic;

    PricingResult result;
    result.steps = NT;

    // working slices: anniversary values for alive states, death row, plus two
    // intra-year buffers per health sheet
    ValueSlice anniv;  // at anniversary n+1 while processing year n
    anniv.resize(Kmax, Js);
    anniv.step = NT;
    anniv.k_lo = rv.k_min(NT);
    anniv.k_count = rv.k_max(NT) - rv.k_min(NT) + 1;
    std::vector<double> buf_a(static_cast<size_t>(6) * Kmax * Js);
    std::vector<double> buf_b(static_cast<size_t>(6) * Kmax * Js);

    // terminal condition: every state is worth the death benefit at T
    {
        const double GT = death_benefit_guarantee(T, contract);
        for (int j = 0; j < Js; ++j)
            anniv.death[j] = death_benefit(grid->node(j), GT);
        const int K = rv.k_max(NT) - rv.k_min(NT) + 1;
        for (int h = 1; h <= 6; ++h) {
            double* sheet = anniv.sheet(h);
            for (int kk = 0; kk < K; ++kk)
                std::copy(anniv.death.begin(), anniv.death.end(), sheet + static_cast<size_t>(kk) * Js);
        }
    }

    long node_updates = 0;

    for (int n = T - 1; n >= 0; --n) {
        const Matrix7& Pn = seq.year(n);
        const double Gn = n >= 1 ? guaranteed_amount(n, contract) : 0.0;
        const double DBn = death_benefit_guarantee(n, contract);
        const double kap = contract.kappa(n);
        const int step_lo = n * N;
        const int K_hi = rv.k_max((n + 1) * N) - rv.k_min((n + 1) * N) + 1;
        const int K_lo = rv.k_max(step_lo) - rv.k_min(step_lo) + 1;

        // 1) mix next-anniversary values over the year-n health transitions
        for (int h = 1; h <= 6; ++h) {
            double* out = buf_a.data() + static_cast<size_t>(h - 1) * Kmax * Js;
            const double p_dead = Pn(h - 1, 6);
            for (int kk = 0; kk < K_hi; ++kk) {
                double* row = out + static_cast<size_t>(kk) * Js;
                for (int j = 0; j < Js; ++j) row[j] = p_dead * anniv.death[j];
                for (int hp = 1; hp <= 6; ++hp) {
                    const double w = Pn(h - 1, hp - 1);
                    if (w == 0.0) continue;
                    const double* src = anniv.sheet(hp) + static_cast<size_t>(kk) * Js;
                    for (int j = 0; j < Js; ++j) row[j] += w * src[j];
                }
            }
        }

        // 2) intra-year backward steps, independent per health sheet
#pragma omp parallel for schedule(static)
        for (int h = 1; h <= 6; ++h) {
            double* cur = buf_a.data() + static_cast<size_t>(h - 1) * Kmax * Js;
            double* nxt = buf_b.data() + static_cast<size_t>(h - 1) * Kmax * Js;
            for (int i = (n + 1) * N - 1; i >= step_lo; --i) {
                const int lo_i = rv.k_min(i), hi_i = rv.k_max(i);
                const int lo_n = rv.k_min(i + 1);
                for (int k = lo_i; k <= hi_i; ++k) {
                    const detail::StepKernel ker =
                        detail::make_kernel(*grid, rv, market, dt, theta_star, i, k);
                    const double* vd = cur + static_cast<size_t>(rv.k_down(i, k) - lo_n) * Js;
                    const double* vu = cur + static_cast<size_t>(rv.k_up(i, k) - lo_n) * Js;
                    double* out = nxt + static_cast<size_t>(k - lo_i) * Js;
                    // absorbed account: rate moves only
                    out[0] = ker.disc * ((1.0 - ker.p_r_up) * vd[0] + ker.p_r_up * vu[0]);
                    const int m = ker.m;
                    const int j_hi = std::min(jmax - 1, jmax - m);
                    for (int j = 2; j <= j_hi; ++j) {
                        out[j] = ker.w_dd * vd[j - 1] + ker.w_du * vu[j - 1] +
                                 ker.w_ud * vd[j + m] + ker.w_uu * vu[j + m];
                    }
                    // top nodes whose up move would leave the grid
                    const double R = rv.value(i, k);
                    for (int j = j_hi + 1; j < jmax; ++j) {
                        const double p_a = account_up_probability(*grid, j, R, dt);
                        const auto [jd, ju] = grid->successors(j, R, dt);
                        JointTransition t;
                        if (!rv.lat || R < theta_star * std::sqrt(dt)) {
                            t = product_transition(p_a, ker.p_r_up);
                        } else {
                            const double A = grid->node(j);
                            const double dAd = grid->node(jd) - A, dAu = grid->node(ju) - A;
                            const double Rd = rv.value(i + 1, rv.k_down(i, k));
                            const double Ru = rv.value(i + 1, rv.k_up(i, k));
                            const double cov = market.rho * market.sigma_r * market.sigma_F *
                                               std::sqrt(R) * A * dt;
                            t = solve_moment_system_feasible(p_a, ker.p_r_up, dAd * (Rd - R),
                                                             dAd * (Ru - R), dAu * (Rd - R),
                                                             dAu * (Ru - R), cov);
                            t = clamp_and_renormalize(t, i, k, j);
                        }
                        out[j] = ker.disc * (t.p_dd * vd[jd] + t.p_du * vu[jd] +
                                             t.p_ud * vd[ju] + t.p_uu * vu[ju]);
                    }
                    detail::extrapolate_boundaries(out, *grid);
                    if (full_dynamic) {
                        const double keep = 1.0 - kap;
                        for (int j = 0; j < Js; ++j)
                            out[j] = std::max(out[j], keep * grid->node(j));
                    }
                }
                std::swap(cur, nxt);
            }
            // make sure the year result for this sheet ends in buf_a
            if (cur != buf_a.data() + static_cast<size_t>(h - 1) * Kmax * Js) {
                std::memcpy(buf_a.data() + static_cast<size_t>(h - 1) * Kmax * Js, cur,
                            static_cast<size_t>(K_lo) * Js * sizeof(double));
            }
        }
        for (int i = (n + 1) * N - 1; i >= step_lo; --i)
            node_updates += static_cast<long>(rv.k_max(i) - rv.k_min(i) + 1) * Js * 6;

        // 3) anniversary events, applied backwards: withdrawal, allowance, fees
        anniv.step = step_lo;
        anniv.k_lo = rv.k_min(step_lo);
        anniv.k_count = K_lo;
        for (int j = 0; j < Js; ++j) anniv.death[j] = death_benefit(grid->node(j), DBn);

        std::vector<detail::InterpPlan> plans;
        std::vector<double> plan_gamma(mesh.size());
        detail::InterpPlan fee_plan, ltc_plan;
        bool has_ltc = false;
        double Ln = 0.0;
        {
            std::vector<double> q(Js);
            if (n >= 1) {
                for (size_t gi = 0; gi < mesh.size(); ++gi) {
                    const double gam = mesh[gi];
                    plan_gamma[gi] = gam;
                    detail::InterpPlan plan;
                    if (gam == 0.0) {
                        for (int j = 0; j < Js; ++j) q[j] = grid->node(j) / (1.0 + contract.b);
                        plan = detail::InterpPlan::from_queries(*grid, q, 1.0 + contract.b);
                    } else if (gam <= 1.0) {
                        const double W = gam * Gn;
                        for (int j = 0; j < Js; ++j) q[j] = std::max(grid->node(j) - W, 0.0);
                        plan = detail::InterpPlan::from_queries(*grid, q, 1.0);
                        for (int j = 0; j < Js; ++j) plan.add[j] = W;
                    } else if (gam < 2.0) {
                        for (int j = 0; j < Js; ++j) {
                            const auto o = apply_withdrawal(gam, grid->node(j), Gn, kap, contract.b);
                            q[j] = o.A_after / (2.0 - gam);
                        }
                        plan = detail::InterpPlan::from_queries(*grid, q, 2.0 - gam);
                        for (int j = 0; j < Js; ++j) {
                            const auto o = apply_withdrawal(gam, grid->node(j), Gn, kap, contract.b);
                            plan.add[j] = o.Y;
                        }
                    } else {
                        plan.direct = true;
                        plan.add.resize(Js);
                        for (int j = 0; j < Js; ++j)
                            plan.add[j] = apply_withdrawal(2.0, grid->node(j), Gn, kap, contract.b).Y;
                    }
                    plans.push_back(std::move(plan));
                }
                Ln = contract.c > 0.0 ? ltc_payment(n, 4, contract) : 0.0;
                has_ltc = Ln > 0.0;
                if (has_ltc) {
                    for (int j = 0; j < Js; ++j) q[j] = std::max(grid->node(j) - Ln, 0.0);
                    ltc_plan = detail::InterpPlan::from_queries(*grid, q, 1.0);
                    for (int j = 0; j < Js; ++j) ltc_plan.add[j] = Ln;
                }
            }
            for (int j = 0; j < Js; ++j) q[j] = fee_step(grid->node(j), contract);
            fee_plan = detail::InterpPlan::from_queries(*grid, q, 1.0);
        }

        std::vector<ActionMap> year_maps;
        year_maps.reserve(6);
#pragma omp parallel for schedule(static)
        for (int h = 1; h <= 6; ++h) {
            double* sheet_in = buf_a.data() + static_cast<size_t>(h - 1) * Kmax * Js;
            double* sheet_out = anniv.sheet(h);
            std::vector<double> best(Js), cand(Js), tmp(Js);
            ActionMap* map = nullptr;
            if (n >= 1 && dynamic_kind && wants_map(n, h)) {
#pragma omp critical
                {
                    year_maps.emplace_back();
                    map = &year_maps.back();
                }
                map->n = n;
                map->h = h;
                map->k_lo = anniv.k_lo;
                map->k_count = K_lo;
                map->j_count = Js;
                map->account = grid->nodes();
                map->rate.resize(K_lo);
                for (int kk = 0; kk < K_lo; ++kk)
                    map->rate[kk] = rv.value(step_lo, anniv.k_lo + kk);
                map->gamma.assign(static_cast<size_t>(K_lo) * Js, 0.0);
            }
            for (int kk = 0; kk < K_lo; ++kk) {
                const double* v3 = sheet_in + static_cast<size_t>(kk) * Js;
                double* out = sheet_out + static_cast<size_t>(kk) * Js;
                if (n >= 1) {
                    std::vector<double> arg;
                    if (map) arg.assign(Js, mesh.front());
                    plans[0].apply(v3, best.data());
                    for (size_t gi = 1; gi < plans.size(); ++gi) {
                        plans[gi].apply(v3, cand.data());
                        for (int j = 0; j < Js; ++j) {
                            if (cand[j] > best[j]) {
                                best[j] = cand[j];
                                if (map) arg[j] = plan_gamma[gi];
                            }
                        }
                    }
                    if (map)
                        std::copy(arg.begin(), arg.end(),
                                  map->gamma.begin() + static_cast<size_t>(kk) * Js);
                    const double* post = best.data();
                    if (has_ltc && h >= 4) {
                        ltc_plan.apply(best.data(), tmp.data());
                        post = tmp.data();
                    }
                    fee_plan.apply(post, out);
                } else {
                    fee_plan.apply(v3, out);
                }
            }
        }
        for (auto& m : year_maps) result.action_maps.push_back(std::move(m));
    }

    std::sort(result.action_maps.begin(), result.action_maps.end(),
              [](const ActionMap& a, const ActionMap& b) {
                  return std::tie(a.n, a.h) < std::tie(b.n, b.h);
              });

    const double v0 = anniv.at(grid->j_min(), 0, options.initial_health);
    if (!std::isfinite(v0))
        throw NumericalError("non-finite contract value at the root node");
    result.price = v0;
    result.node_updates = node_updates;
    if (options.keep_inception_slice) result.inception_slice = anniv;
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

struct FairFeeOptions {
    double price_tol_rel = 1e-6;  // stop when |price - P| < tol * P
    int max_iterations = 50;
    bool two_stage = true;            // coarse pre-estimate on a small setup
    int coarse_steps_per_year = 0;    // 0 picks a model-dependent default
    double coarse_grid_factor = 100.0;
    double bracket_hi = 0.01;  // initial second probe when no pre-estimate
};

struct FairFeeResult {
    double alpha = 0.0;
    double price = 0.0;
    int iterations = 0;
    double seconds = 0.0;
};

namespace detail {

// Secant iteration on the decreasing map alpha -> price(alpha) - P, with a
// bisection fallback once a sign change has been seen.
template <class F>
double secant_root(F&& f, double a0, double a1, double f_target_abs, int max_iter,
                   int* iterations) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double lo = nan, hi = nan;  // f(lo) >= 0 > f(hi), lo < hi for decreasing f
    auto note = [&](double a, double fv) {
        if (fv >= 0.0) {
            if (std::isnan(lo) || a > lo) lo = a;
        } else {
            if (std::isnan(hi) || a < hi) hi = a;
        }
    };
    double f0 = f(a0);
    int it = 1;
    if (a0 == 0.0 && f0 < 0.0)
        throw InfeasibleFeeError(
            "contract value is below the premium even with a zero account fee");
    if (std::abs(f0) < f_target_abs) {
        if (iterations) *iterations = it;
        return a0;
    }
    note(a0, f0);
    double f1 = f(a1);
    ++it;
    note(a1, f1);
    if ((a1 > a0 && f1 >= f0) || (a1 < a0 && f1 <= f0))
        throw NumericalError("price is not decreasing in alpha over the starting bracket");
    while (it < max_iter && std::abs(f1) >= f_target_abs) {
        double a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
        const bool bracketed = !std::isnan(lo) && !std::isnan(hi);
        if (!std::isfinite(a2) || (bracketed && (a2 <= lo || a2 >= hi)))
            a2 = bracketed ? 0.5 * (lo + hi) : std::max(0.0, a1 + 2.0 * (a1 - a0));
        if (a2 < 0.0) a2 = 0.0;
        if (std::abs(a2 - a1) < 1e-12) break;
        a0 = a1;
        f0 = f1;
        a1 = a2;
        f1 = f(a1);
        ++it;
        note(a1, f1);
    }
    if (std::abs(f1) >= f_target_abs)
        throw NumericalError("fair-fee iteration did not converge in " +
                             std::to_string(max_iter) + " evaluations");
    if (iterations) *iterations = it;
    return a1;
}

} // namespace detail

// Account-fee rate that makes the inception value equal the premium,
// found by a secant iteration optionally seeded from a coarse-setup estimate.
inline FairFeeResult fair_fee(const ContractParams& contract, const MarketParams& market,
                              const HealthSequence& seq, const PricingOptions& options,
                              const FairFeeOptions& fee_options = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    FairFeeResult result;
    const double P = contract.P;
    const double tol_abs = fee_options.price_tol_rel * P;
    int total_iter = 0;

    double seed0 = 0.0, seed1 = fee_options.bracket_hi;
    if (fee_options.two_stage) {
        int cn = fee_options.coarse_steps_per_year;
        if (cn <= 0) cn = market.mode == RateModel::BsCir ? 25 : 100;
        if (cn < options.steps_per_year || fee_options.coarse_grid_factor < options.grid_factor) {
            PricingOptions copt = options;
            copt.steps_per_year = cn;
            copt.grid_factor = std::min(fee_options.coarse_grid_factor, options.grid_factor);
            copt.action_years.clear();
            AccountGrid cgrid = AccountGrid::build(P, market.sigma_F, 1.0 / cn, copt.grid_factor);
            std::optional<RateLattice> clat;
            if (market.mode == RateModel::BsCir)
                clat = RateLattice::build(market, contract.years_to_horizon(), cn);
            ContractParams probe = contract;
            auto f = [&](double a) {
                probe.alpha = a;
                return price(probe, market, seq, copt, &cgrid, clat ? &*clat : nullptr).price - P;
            };
            int iters = 0;
            const double a = detail::secant_root(f, 0.0, fee_options.bracket_hi, 10.0 * tol_abs,
                                                 fee_options.max_iterations, &iters);
            total_iter += iters;
            seed0 = a;
            seed1 = a + std::max(1e-4, 0.02 * a);
        }
    }

    AccountGrid grid =
        AccountGrid::build(P, market.sigma_F, 1.0 / options.steps_per_year, options.grid_factor);
    std::optional<RateLattice> lat;
    if (market.mode == RateModel::BsCir)
        lat = RateLattice::build(market, contract.years_to_horizon(), options.steps_per_year);
    ContractParams probe = contract;
    double last_price = 0.0;
    auto f = [&](double a) {
        probe.alpha = a;
        last_price = price(probe, market, seq, options, &grid, lat ? &*lat : nullptr).price;
        return last_price - P;
    };
    int iters = 0;
    result.alpha =
        detail::secant_root(f, seed0, seed1, tol_abs, fee_options.max_iterations, &iters);
    total_iter += iters;
    result.price = last_price;
    result.iterations = total_iter;
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

enum class SweepAxis { EntryAge, SigmaR, SigmaF, Rho, LtcRate };
enum class SweepQuantity { FairAlpha, Price };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::EntryAge: return "entry-age";
        case SweepAxis::SigmaR: return "sigma_r";
        case SweepAxis::SigmaF: return "sigma_F";
        case SweepAxis::Rho: return "rho";
        case SweepAxis::LtcRate: return "c";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& s) {
    if (s == "entry-age") return SweepAxis::EntryAge;
    if (s == "sigma_r") return SweepAxis::SigmaR;
    if (s == "sigma_F") return SweepAxis::SigmaF;
    if (s == "rho") return SweepAxis::Rho;
    if (s == "c") return SweepAxis::LtcRate;
    throw ConfigError("unknown sweep axis '" + s + "'");
}

struct SweepRow {
    double axis_value = 0.0;
    bool ok = false;
    double fair_alpha_bps = 0.0;
    double price = 0.0;
    double seconds = 0.0;
    std::string error;
};

// One fair-fee solve (or pricing) per axis value; failures are recorded in
// the row and the sweep continues.
inline std::vector<SweepRow> sweep(const IntensityTable& table, SweepAxis axis,
                                   const std::vector<double>& values,
                                   const ContractParams& base_contract,
                                   const MarketParams& base_market,
                                   const PricingOptions& options,
                                   const FairFeeOptions& fee_options = {},
                                   SweepQuantity quantity = SweepQuantity::FairAlpha) {
    std::vector<SweepRow> rows;
    HealthSequence seq;
    if (axis != SweepAxis::EntryAge) seq = transition_sequence(table, base_contract.x0);
    for (double v : values) {
        SweepRow row;
        row.axis_value = v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ContractParams contract = base_contract;
            MarketParams market = base_market;
            switch (axis) {
                case SweepAxis::EntryAge: {
                    const int age = static_cast<int>(std::lround(v));
                    if (std::abs(v - age) > 1e-9) throw ConfigError("entry age must be integral");
                    contract = ContractParams::default_calibration(age, base_contract.c,
                                                                   base_contract.alpha);
                    contract.P = base_contract.P;
                    contract.beta = base_contract.beta;
                    contract.pi = base_contract.pi;
                    seq = transition_sequence(table, age);
                    break;
                }
                case SweepAxis::SigmaR: market.sigma_r = v; break;
                case SweepAxis::SigmaF: market.sigma_F = v; break;
                case SweepAxis::Rho: market.rho = v; break;
                case SweepAxis::LtcRate: contract.c = v; break;
            }
            if (quantity == SweepQuantity::FairAlpha) {
                const auto r = fair_fee(contract, market, seq, options, fee_options);
                row.fair_alpha_bps = r.alpha * 1e4;
                row.price = r.price;
            } else {
                row.price = price(contract, market, seq, options).price;
                row.fair_alpha_bps = contract.alpha * 1e4;
            }
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

// Decision surfaces for the dynamic strategies at the requested anniversaries
// and health states.
inline std::vector<ActionMap> optimal_action_map(const ContractParams& contract,
                                                 const MarketParams& market,
                                                 const HealthSequence& seq,
                                                 PricingOptions options,
                                                 const std::vector<int>& anniversaries,
                                                 const std::vector<int>& healths) {
    if (options.strategy.kind != StrategyKind::Dynamic &&
        options.strategy.kind != StrategyKind::FullDynamic)
        throw ConfigError("action maps require a dynamic or full-dynamic strategy");
    options.action_years = anniversaries;
    options.action_healths = healths;
    return price(contract, market, seq, options).action_maps;
}

} // namespace glwb
