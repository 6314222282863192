#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "glwb/params.hpp"

namespace glwb {

// Anniversary cash-flow rules, with the benefit base pinned to the premium P.
// All functions are pure.

// Account value after the anniversary fee deduction alpha*A + beta*P.
inline double fee_step(double a_minus, const ContractParams& p) {
    if (a_minus < 0.0) throw std::invalid_argument("fee_step: negative account value");
    return std::max(a_minus - p.alpha * a_minus - p.beta * p.P, 0.0);
}

// Disability allowance at anniversary n in health state h; zero in states
// 1..3 and for the dead state (no allowance is paid at the death anniversary).
inline double ltc_payment(int n, int health, const ContractParams& p) {
    if (n < 1) throw std::invalid_argument("ltc_payment: no allowance at inception");
    if (health < 1 || health > 7) throw std::invalid_argument("ltc_payment: bad health state");
    if (health >= 4 && health <= 6) return p.c * p.P * std::pow(1.0 + p.pi, n);
    return 0.0;
}

// Guaranteed withdrawal amount at anniversary n.
inline double guaranteed_amount(int n, const ContractParams& p) {
    if (n < 1) throw std::invalid_argument("guaranteed_amount: withdrawals start at n = 1");
    return p.g * std::pow(1.0 + p.pi, n) * p.P;
}

// Guaranteed component of the death benefit at anniversary n.
inline double death_benefit_guarantee(int n, const ContractParams& p) {
    return p.indexed_death_benefit ? p.g * std::pow(1.0 + p.pi, n) * p.P : p.g * p.P;
}

// Death benefit: the account value floored at the guaranteed amount.
inline double death_benefit(double a_minus, double g_tau) {
    if (a_minus < 0.0 || g_tau < 0.0) throw std::invalid_argument("death_benefit: negative input");
    return std::max(a_minus, g_tau);
}

// Outcome of the gamma-controlled withdrawal decision at one anniversary.
struct AnniversaryOutcome {
    double A_after = 0.0;   // account value after the withdrawal
    double B_factor = 1.0;  // multiplicative change to the benefit base
    double W = 0.0;         // nominal withdrawal
    double Y = 0.0;         // cash actually received
    bool lapsed = false;    // gamma = 2 ends the contract
};

// gamma = 0 skips the withdrawal and earns the bonus; gamma in (0,1] draws a
// fraction of the guaranteed amount; gamma in (1,2] additionally draws down
// the account, with the penalty kappa_n charged on the excess over the
// guarantee; gamma = 2 is total lapse.
inline AnniversaryOutcome apply_withdrawal(double gamma, double a2, double G, double kappa_n,
                                           double bonus) {
    if (gamma < 0.0 || gamma > 2.0)
        throw std::domain_error("apply_withdrawal: gamma must lie in [0, 2]");
    if (a2 < 0.0 || G < 0.0) throw std::invalid_argument("apply_withdrawal: negative input");
    AnniversaryOutcome out;
    if (gamma == 0.0) {
        out.A_after = a2;
        out.B_factor = 1.0 + bonus;
    } else if (gamma <= 1.0) {
        out.W = out.Y = gamma * G;
        out.A_after = std::max(a2 - out.W, 0.0);
        out.B_factor = 1.0;
    } else {
        out.W = (2.0 - gamma) * G + (gamma - 1.0) * a2;
        out.Y = G + (out.W - G) * (1.0 - kappa_n);
        out.A_after = std::max(a2 - out.W, 0.0);
        out.B_factor = 2.0 - gamma;
        if (gamma == 2.0) {
            out.A_after = 0.0;
            out.B_factor = 0.0;
            out.lapsed = true;
        }
    }
    return out;
}

} // namespace glwb
