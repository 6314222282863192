#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "glwb/common.hpp"

namespace glwb {

// Contract-level parameters.  The benefit base is pinned to the premium P
// throughout (degree-1 homogeneity of the value in (A, B)), so all
// base-proportional quantities are expressed against P.
struct ContractParams {
    double P = 100.0;        // single premium, also initial account value
    double alpha = 0.0;      // annual fee rate on the account value
    double beta = 0.003;     // annual fee rate on the benefit base
    int    x0 = 60;          // entry age, whole years
    double g = 0.03;         // guaranteed withdrawal rate
    double c = 0.06;         // disability allowance rate
    double pi = 0.05;        // inflation indexation of base-linked amounts
    double b = 0.035;        // bonus rate credited when skipping a withdrawal

    // Early-surrender penalty: kappa(n) = penalty_rate * max(0, penalty_years - n),
    // unless an explicit per-anniversary schedule is supplied.
    double penalty_rate = 0.01;
    int    penalty_years = 8;
    std::vector<double> penalty_schedule; // optional override, indexed by n

    // Death benefit: guaranteed component g*(1+pi)^tau*P when true (the
    // convention the maturity condition uses), g*P when false.
    bool indexed_death_benefit = true;

    double kappa(int n) const {
        if (!penalty_schedule.empty()) {
            return n < static_cast<int>(penalty_schedule.size()) ? penalty_schedule[n] : 0.0;
        }
        return penalty_rate * std::max(0, penalty_years - n);
    }

    int years_to_horizon() const { return kMaxAge - x0; }

    // Reference calibration: g indexed to entry age, bonus g + 50bp.
    static ContractParams default_calibration(int entry_age, double ltc_rate,
                                              double account_fee = 0.0) {
        ContractParams p;
        p.x0 = entry_age;
        p.c = ltc_rate;
        p.alpha = account_fee;
        p.g = 0.03 + (entry_age - 60) * 0.001;
        p.b = p.g + 0.005;
        return p;
    }

    void validate() const {
        if (P <= 0.0) throw ConfigError("contract.P must be positive");
        if (x0 < 60 || x0 > 121) throw ConfigError("contract.x0 must lie in [60, 121]");
        if (alpha < 0.0) throw ConfigError("contract.alpha must be nonnegative");
        if (beta < 0.0) throw ConfigError("contract.beta must be nonnegative");
        if (g < 0.0) throw ConfigError("contract.g must be nonnegative");
        if (c < 0.0) throw ConfigError("contract.c must be nonnegative");
        if (pi < 0.0) throw ConfigError("contract.pi must be nonnegative");
        if (b < 0.0) throw ConfigError("contract.b must be nonnegative");
        for (double k : penalty_schedule)
            if (k < 0.0 || k > 1.0) throw ConfigError("contract.penalty_schedule entries must lie in [0,1]");
    }
};

enum class RateModel { BsConstantRate, BsCir };

// Fund / short-rate dynamics.  In BsConstantRate mode only sigma_F and r0 are
// read; r0 doubles as the flat rate.
struct MarketParams {
    RateModel mode = RateModel::BsCir;
    double sigma_F = 0.20;   // fund volatility
    double sigma_r = 0.10;   // rate volatility
    double k_r = 0.5;        // mean-reversion speed
    double theta = 0.05;     // long-run mean rate
    double r0 = 0.05;        // initial (or flat) rate
    double rho = -0.25;      // fund/rate correlation

    static MarketParams black_scholes(double rate, double fund_vol = 0.20) {
        MarketParams m;
        m.mode = RateModel::BsConstantRate;
        m.r0 = rate;
        m.sigma_F = fund_vol;
        return m;
    }

    void validate() const {
        if (sigma_F <= 0.0) throw ConfigError("market.sigma_F must be positive");
        if (rho < -1.0 || rho > 1.0) throw ConfigError("market.rho must lie in [-1, 1]");
        if (mode == RateModel::BsCir) {
            if (sigma_r <= 0.0) throw ConfigError("market.sigma_r must be positive");
            if (k_r <= 0.0) throw ConfigError("market.k_r must be positive");
            if (theta <= 0.0) throw ConfigError("market.theta must be positive");
            if (r0 < 0.0) throw ConfigError("market.r0 must be nonnegative");
        } else {
            if (r0 < 0.0) throw ConfigError("market.r0 must be nonnegative");
        }
    }
};

enum class StrategyKind { Static, Mixed, Dynamic, FullDynamic };

// Withdrawal strategy: which gamma values the holder may pick at an
// anniversary.  Static pins gamma=1, mixed adds total lapse, the dynamic
// kinds optimise over a mesh that must contain {0, 1, 2}.
struct Strategy {
    StrategyKind kind = StrategyKind::Static;
    std::vector<double> gamma_mesh{0.0, 1.0, 2.0};

    static Strategy static_withdrawal() { return {StrategyKind::Static, {1.0}}; }
    static Strategy mixed() { return {StrategyKind::Mixed, {1.0, 2.0}}; }
    static Strategy dynamic(std::vector<double> mesh = {0.0, 1.0, 2.0}) {
        return {StrategyKind::Dynamic, std::move(mesh)};
    }
    static Strategy full_dynamic(std::vector<double> mesh = {0.0, 1.0, 2.0}) {
        return {StrategyKind::FullDynamic, std::move(mesh)};
    }

    static Strategy parse(const std::string& name) {
        if (name == "static") return static_withdrawal();
        if (name == "mixed") return mixed();
        if (name == "dynamic") return dynamic();
        if (name == "full-dynamic") return full_dynamic();
        throw ConfigError("unknown strategy '" + name + "' (expected static|mixed|dynamic|full-dynamic)");
    }

    std::string name() const {
        switch (kind) {
            case StrategyKind::Static: return "static";
            case StrategyKind::Mixed: return "mixed";
            case StrategyKind::Dynamic: return "dynamic";
            case StrategyKind::FullDynamic: return "full-dynamic";
        }
        return "?";
    }

    bool allows_intra_year_surrender() const { return kind == StrategyKind::FullDynamic; }

    void validate() const {
        switch (kind) {
            case StrategyKind::Static:
                if (gamma_mesh != std::vector<double>{1.0})
                    throw ConfigError("static strategy evaluates only gamma=1");
                break;
            case StrategyKind::Mixed:
                if (gamma_mesh != std::vector<double>{1.0, 2.0})
                    throw ConfigError("mixed strategy evaluates only gamma in {1,2}");
                break;
            case StrategyKind::Dynamic:
            case StrategyKind::FullDynamic: {
                for (double gm : gamma_mesh)
                    if (gm < 0.0 || gm > 2.0)
                        throw ConfigError("gamma mesh values must lie in [0,2]");
                auto has = [&](double v) {
                    return std::any_of(gamma_mesh.begin(), gamma_mesh.end(),
                                       [&](double g) { return std::abs(g - v) < 1e-12; });
                };
                if (!has(0.0) || !has(1.0) || !has(2.0))
                    throw ConfigError("dynamic gamma mesh must contain {0, 1, 2}");
                break;
            }
        }
    }
};

} // namespace glwb
