#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "glwb/common.hpp"
#include "glwb/params.hpp"

namespace glwb {

// Truncated recombining binomial tree for the CIR short rate.
//
// Nodes live on a square-root grid: R_{i,k} = (max(sqrt(r0) + (2k - i)*s, 0))^2
// with s = (sigma_r/2)*sqrt(dt), the Nelson-Ramaswamy step that reproduces the
// local variance sigma_r^2*R*dt of the diffusion.  Per step only the band
// k_min(i)..k_max(i) is stored: below k_min every node value is zero
// (duplicates are dropped), above k_max nodes cannot be reached from the root.
class RateLattice {
public:
    struct Band {
        int lo = 0;
        int hi = 0;
    };

    static RateLattice build(const MarketParams& market, int T, int N) {
        market.validate();
        if (market.mode != RateModel::BsCir)
            throw std::domain_error("rate lattice requires bs-cir mode");
        if (N < 1) throw std::domain_error("rate lattice: N must be >= 1");
        if (T < 1) throw std::domain_error("rate lattice: T must be >= 1");

        RateLattice lat;
        lat.N_ = N;
        lat.T_ = T;
        lat.dt_ = 1.0 / N;
        lat.r0_ = market.r0;
        lat.theta_ = market.theta;
        lat.k_r_ = market.k_r;
        lat.sigma_r_ = market.sigma_r;
        lat.sqrt_r0_ = std::sqrt(market.r0);
        lat.step_ = 0.5 * market.sigma_r * std::sqrt(lat.dt_);
        lat.init_caps();

        const int NT = N * T;
        lat.bands_.resize(NT + 1);
        lat.offsets_.resize(NT + 2, 0);
        lat.bands_[0] = {0, 0};
        for (int i = 1; i <= NT; ++i) lat.bands_[i] = lat.compute_band(i);
        for (int i = 0; i <= NT; ++i)
            lat.offsets_[i + 1] = lat.offsets_[i] + (lat.bands_[i].hi - lat.bands_[i].lo + 1);

        lat.values_.resize(lat.offsets_[NT + 1]);
        lat.kd_.resize(lat.offsets_[NT]);
        lat.ku_.resize(lat.offsets_[NT]);
        lat.pup_.resize(lat.offsets_[NT]);
        for (int i = 0; i <= NT; ++i) {
            const Band b = lat.bands_[i];
            for (int k = b.lo; k <= b.hi; ++k)
                lat.values_[lat.offsets_[i] + (k - b.lo)] = lat.node_value(i, k);
        }
        for (int i = 0; i < NT; ++i) {
            const Band b = lat.bands_[i];
            const Band nb = lat.bands_[i + 1];
            for (int k = b.lo; k <= b.hi; ++k) {
                auto [kd, ku] = lat.raw_successors(i, k);
                kd = std::min(std::max(kd, nb.lo), nb.hi);
                ku = std::min(std::max(ku, nb.lo), nb.hi);
                const size_t at = lat.offsets_[i] + (k - b.lo);
                lat.kd_[at] = kd;
                lat.ku_[at] = ku;
                lat.pup_[at] = lat.probability(i, k, kd, ku);
            }
        }
        return lat;
    }

    int steps() const { return N_ * T_; }
    int steps_per_year() const { return N_; }
    int horizon_years() const { return T_; }
    double dt() const { return dt_; }
    double r_bar() const { return r_bar_; }

    int k_min(int i) const { return bands_[i].lo; }
    int k_max(int i) const { return bands_[i].hi; }
    int band_width(int i) const { return bands_[i].hi - bands_[i].lo + 1; }
    std::vector<Band> bands() const { return bands_; }

    double value(int i, int k) const { return values_[offsets_[i] + (k - bands_[i].lo)]; }
    int k_down(int i, int k) const { return kd_[offsets_[i] + (k - bands_[i].lo)]; }
    int k_up(int i, int k) const { return ku_[offsets_[i] + (k - bands_[i].lo)]; }
    double up_probability(int i, int k) const { return pup_[offsets_[i] + (k - bands_[i].lo)]; }

    // Direct views over one step's stored band, index 0 == k_min(i).
    const double* values_row(int i) const { return values_.data() + offsets_[i]; }
    const int* kd_row(int i) const { return kd_.data() + offsets_[i]; }
    const int* ku_row(int i) const { return ku_.data() + offsets_[i]; }
    const double* pup_row(int i) const { return pup_.data() + offsets_[i]; }

    // True iff, from the root, the index chain can never leave the stored
    // bands: every stored node's successors lie inside the next step's band.
    bool reachability_check() const { return check_successor_containment(bands_); }

    bool check_successor_containment(const std::vector<Band>& bands) const {
        if (bands.size() != bands_.size()) return false;
        if (bands[0].lo > 0 || bands[0].hi < 0) return false;
        for (int i = 0; i < steps(); ++i) {
            for (int k = bands[i].lo; k <= bands[i].hi; ++k) {
                if (k < bands_[i].lo || k > bands_[i].hi) return false;
                const size_t at = offsets_[i] + (k - bands_[i].lo);
                if (kd_[at] < bands[i + 1].lo || kd_[at] > bands[i + 1].hi) return false;
                if (ku_[at] < bands[i + 1].lo || ku_[at] > bands[i + 1].hi) return false;
                if (pup_[at] < 0.0 || pup_[at] > 1.0) return false;
            }
        }
        return true;
    }

    // Raw node value from the closed form (valid for any k, stored or not).
    double node_value(int i, int k) const {
        if (2 * k == i) return r0_;
        const double s = sqrt_r0_ + (2.0 * k - i) * step_;
        return s > 0.0 ? s * s : 0.0;
    }

    double drift(double R) const { return k_r_ * (theta_ - R); }

private:
    void init_caps() {
        // inner = sigma^2 + dt*k_r*(4*theta*k_r - sigma^2); negative only in a
        // deeply Feller-violated regime, where the band cap falls back to i.
        const double s2 = sigma_r_ * sigma_r_;
        cap_inner_ = dt_ * k_r_ * (4.0 * theta_ * k_r_ - s2) + s2;
        if (cap_inner_ > 0.0) {
            const double root = std::sqrt(dt_ * dt_ * s2 * cap_inner_);
            r_bar_ = std::pow(root + 4.0 * dt_ * dt_ * k_r_ * s2 + dt_ * s2, 2) /
                     (4.0 * std::pow(dt_, 3) * k_r_ * k_r_ * s2);
            kbar_const_ = (-2.0 * std::pow(dt_, 1.5) * k_r_ * sqrt_r0_ * sigma_r_ + root +
                           dt_ * s2) /
                          (2.0 * dt_ * dt_ * k_r_ * s2);
            kbar_slope_ = 0.5; // the dt^2*i*k_r*sigma^2 term over the same denominator
        } else {
            r_bar_ = std::numeric_limits<double>::infinity();
        }
    }

    int kbar(int i) const {
        if (cap_inner_ <= 0.0) return i;
        const double v = kbar_slope_ * i + kbar_const_;
        const double c = std::ceil(v - 1e-12);
        return c >= static_cast<double>(i) ? i : static_cast<int>(c);
    }

    int kmin_formula(int i) const {
        const double v = std::floor(0.5 * i - std::sqrt(r0_ / dt_) / sigma_r_);
        return v <= 0.0 ? 0 : static_cast<int>(v);
    }

    // Largest k with node value <= r_bar (extra guard; non-binding when the
    // ceiling cap solves its defining equation exactly).
    int kcap(int i) const {
        if (!std::isfinite(r_bar_)) return i;
        const double v = std::floor(0.5 * i + (std::sqrt(r_bar_) - sqrt_r0_) / (2.0 * step_) + 1e-12);
        return v >= static_cast<double>(i) ? i : static_cast<int>(v);
    }

    Band compute_band(int i) const {
        const int lo = kmin_formula(i);
        int hi = std::min({kbar(i), i, kcap(i)});
        // successors of the previous cap bound the reachable top
        const int top_eval = std::min(kbar(i - 1), i - 1);
        const int ku_top = raw_successors(i - 1, top_eval).second;
        hi = std::min(hi, ku_top);
        if (hi < lo) hi = lo;
        return {lo, hi};
    }

    // Successor levels before band clamping: the largest next-step node not
    // above the drifted value, floored at next step's k_min, and the matching
    // up node (first node at or above the drifted value when R < theta,
    // down-node + 1 otherwise).
    std::pair<int, int> raw_successors(int i, int k) const {
        const double R = node_value(i, k);
        const double v = R + drift(R) * dt_;
        const double sv = std::sqrt(std::max(v, 0.0));
        int cand = static_cast<int>(
            std::floor(0.5 * (i + 1) + (sv - sqrt_r0_) / (2.0 * step_) + 1e-12));
        cand = std::min(cand, k);
        while (cand > 0 && node_value(i + 1, cand) > v) --cand;
        while (cand + 1 <= k && node_value(i + 1, cand + 1) <= v) ++cand;
        const int kd_acz = std::max(cand, 0);
        const int kd = std::max(kd_acz, kmin_formula(i + 1));
        int ku;
        if (R < theta_) {
            int cu = static_cast<int>(
                std::ceil(0.5 * (i + 1) + (sv - sqrt_r0_) / (2.0 * step_) - 1e-12));
            cu = std::max(cu, k + 1);
            while (cu <= i && node_value(i + 1, cu) < v) ++cu;
            while (cu - 1 >= k + 1 && node_value(i + 1, cu - 1) >= v) --cu;
            ku = std::min(cu, i + 1);
        } else {
            ku = kd + 1;
        }
        return {kd, ku};
    }

    double probability(int i, int k, int kd, int ku) const {
        const double R = value(i, k);
        const double Rd = value(i + 1, kd);
        const double Ru = value(i + 1, ku);
        if (Ru <= Rd) return 1.0; // collapsed successors (zero floor / band cap)
        const double p = (drift(R) * dt_ + R - Rd) / (Ru - Rd);
        return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
    }

    int N_ = 0, T_ = 0;
    double dt_ = 0.0, r0_ = 0.0, theta_ = 0.0, k_r_ = 0.0, sigma_r_ = 0.0;
    double sqrt_r0_ = 0.0, step_ = 0.0;
    double cap_inner_ = 0.0, r_bar_ = 0.0, kbar_const_ = 0.0, kbar_slope_ = 0.5;
    std::vector<Band> bands_;
    std::vector<size_t> offsets_;
    std::vector<double> values_;
    std::vector<int> kd_, ku_;
    std::vector<double> pup_;
};

} // namespace glwb
