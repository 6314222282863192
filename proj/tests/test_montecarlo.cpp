#include <cmath>

#include <catch2/catch_amalgamated.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "glwb/montecarlo.hpp"
#include "glwb/pricer.hpp"

using namespace glwb;
using Catch::Approx;

namespace {

const IntensityTable& table() {
    static IntensityTable t = IntensityTable::load(std::string(GLWB_DATA_DIR) +
                                                   "/transition_intensities.csv");
    return t;
}

const HealthSequence& seq60() {
    static HealthSequence s = transition_sequence(table(), 60);
    return s;
}

HealthSequence frozen_health(int x0) {
    HealthSequence seq;
    seq.x0 = x0;
    const int T = kMaxAge - x0;
    for (int n = 0; n < T; ++n) {
        if (x0 + n == kMaxAge - 1) {
            Matrix7 forced;
            for (int i = 0; i < 7; ++i) forced(i, 6) = 1.0;
            seq.annual.push_back(forced);
        } else {
            seq.annual.push_back(Matrix7::identity());
        }
    }
    return seq;
}

} // namespace

TEST_CASE("normal quantile function hits reference values", "[mc]") {
    CHECK(CounterRng::inverse_normal_cdf(0.5) == Approx(0.0).margin(1e-15));
    CHECK(CounterRng::inverse_normal_cdf(0.975) == Approx(1.959963984540054).margin(1e-12));
    CHECK(CounterRng::inverse_normal_cdf(0.025) == Approx(-1.959963984540054).margin(1e-12));
    CHECK(CounterRng::inverse_normal_cdf(0.8413447460685429) == Approx(1.0).margin(1e-12));
    CHECK(CounterRng::inverse_normal_cdf(1e-10) == Approx(-6.361340902404056).margin(1e-9));
}

TEST_CASE("counter generator is reproducible and roughly uniform", "[mc]") {
    const CounterRng a(42), b(42), c(43);
    double mean = 0.0;
    for (int p = 0; p < 20000; ++p) {
        const double u = a.uniform(p, 3, 1);
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(u == b.uniform(p, 3, 1));
        mean += u;
    }
    mean /= 20000;
    CHECK(mean == Approx(0.5).margin(0.01));
    CHECK(a.uniform(7, 3, 1) != c.uniform(7, 3, 1));
}

TEST_CASE("same seed gives bit-identical estimates across thread counts", "[mc]") {
    const MarketParams m = MarketParams::black_scholes(0.05);
    const ContractParams c = ContractParams::default_calibration(60, 0.06, 150e-4);
    McOptions opt;
    opt.paths = 60000;
    opt.seed = 12345;
    const McEstimate first = simulate_price_static(c, m, seq60(), opt);
    const McEstimate second = simulate_price_static(c, m, seq60(), opt);
    CHECK(first.mean == second.mean);
    CHECK(first.half_width == second.half_width);
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const McEstimate serial = simulate_price_static(c, m, seq60(), opt);
    omp_set_num_threads(saved);
    CHECK(serial.mean == first.mean);
    CHECK(serial.half_width == first.half_width);
#endif
    McOptions other = opt;
    other.seed = 999;
    CHECK(simulate_price_static(c, m, seq60(), other).mean != first.mean);
}

TEST_CASE("frozen health and vanishing volatility reduce to annuity arithmetic", "[mc]") {
    MarketParams m = MarketParams::black_scholes(0.05, 1e-12);
    ContractParams c = ContractParams::default_calibration(60, 0.0);
    c.alpha = 0.0;
    c.beta = 0.0;
    const HealthSequence frozen = frozen_health(60);
    McOptions opt;
    opt.paths = 64;
    opt.seed = 7;
    const McEstimate est = simulate_price_static(c, m, frozen, opt);
    // deterministic path: withdraw G_n while alive, death benefit at T
    const int T = c.years_to_horizon();
    double want = 0.0;
    double account = c.P;
    for (int n = 1; n < T; ++n) {
        account = account * std::exp(0.05) - guaranteed_amount(n, c);
        account = std::max(account, 0.0);
        want += std::exp(-0.05 * n) * guaranteed_amount(n, c);
    }
    account *= std::exp(0.05);
    want += std::exp(-0.05 * T) * death_benefit(account, death_benefit_guarantee(T, c));
    CHECK(est.mean == Approx(want).margin(1e-6));
    CHECK(est.half_width == Approx(0.0).margin(1e-6));
}

TEST_CASE("pricing at the tree's fair fee is consistent with the premium", "[mc]") {
    const MarketParams m = MarketParams::black_scholes(0.05);
    const ContractParams c = ContractParams::default_calibration(60, 0.06, 154.46e-4);
    McOptions opt;
    opt.paths = 200000;
    opt.seed = 2024;
    const McEstimate est = simulate_price_static(c, m, seq60(), opt);
    CHECK(std::abs(est.mean - 100.0) <= est.half_width);
}

TEST_CASE("exact control means match simulated control averages", "[mc]") {
    const MarketParams m = MarketParams::black_scholes(0.05);
    const ContractParams c = ContractParams::default_calibration(60, 0.06, 150e-4);
    const auto mu = mc_detail::control_means(c, m, seq60(), 1);
    const CounterRng rng(31337);
    const long n = 150000;
    double s[4] = {0, 0, 0, 0}, s2[4] = {0, 0, 0, 0};
    for (long p = 0; p < n; ++p) {
        const auto o = mc_detail::simulate_path(c, m, seq60(), rng, p, 1, 1);
        const double x[4] = {o.x_account, o.x_fund, o.x_income, o.x_tau};
        for (int i = 0; i < 4; ++i) {
            s[i] += x[i];
            s2[i] += x[i] * x[i];
        }
    }
    const double means[4] = {mu.account, mu.fund, mu.income, mu.tau};
    for (int i = 0; i < 4; ++i) {
        const double mean = s[i] / n;
        const double sd = std::sqrt((s2[i] / n - mean * mean) / n);
        INFO("control " << i << ": sample " << mean << " exact " << means[i] << " sd " << sd);
        CHECK(std::abs(mean - means[i]) <= 4.0 * sd);
    }
}

TEST_CASE("control variates shrink the interval without moving the mean", "[mc]") {
    const MarketParams m = MarketParams::black_scholes(0.05);
    const ContractParams c = ContractParams::default_calibration(60, 0.06, 154.46e-4);
    McOptions opt;
    opt.paths = 200000;
    opt.seed = 555;
    const McEstimate plain = simulate_price_static(c, m, seq60(), opt);
    const McEstimate cv = simulate_price_static_cv(c, m, seq60(), opt);
    CHECK(cv.half_width < plain.half_width);
    CHECK_FALSE(cv.cv_degraded);
    CHECK(std::abs(cv.mean - plain.mean) <= plain.half_width + cv.half_width);
    // reproducibility of the adjusted estimator
    const McEstimate again = simulate_price_static_cv(c, m, seq60(), opt);
    CHECK(again.mean == cv.mean);
}

TEST_CASE("control variates reject the stochastic-rate model", "[mc]") {
    MarketParams m;  // bs-cir
    const ContractParams c = ContractParams::default_calibration(60, 0.06, 150e-4);
    McOptions opt;
    opt.paths = 1000;
    CHECK_THROWS_AS(simulate_price_static_cv(c, m, seq60(), opt), ConfigError);
}

TEST_CASE("stochastic-rate simulation is reproducible and sane", "[mc]") {
    MarketParams m;  // bs-cir reference parameters
    const ContractParams c = ContractParams::default_calibration(60, 0.06, 160e-4);
    McOptions opt;
    opt.paths = 20000;
    opt.steps_per_year = 25;
    opt.seed = 99;
    const McEstimate a = simulate_price_static(c, m, seq60(), opt);
    const McEstimate b = simulate_price_static(c, m, seq60(), opt);
    CHECK(a.mean == b.mean);
    CHECK(a.mean > 50.0);
    CHECK(a.mean < 150.0);
    CHECK(a.half_width > 0.0);
}

TEST_CASE("fair fee search on the simulated price brackets the premium", "[mc]") {
    const MarketParams m = MarketParams::black_scholes(0.05);
    const ContractParams c = ContractParams::default_calibration(60, 0.06);
    McOptions opt;
    opt.paths = 100000;
    opt.seed = 17;
    const auto r = fair_fee_mc(c, m, seq60(), opt);
    CHECK(r.alpha * 1e4 == Approx(154.5).margin(6.0));
    CHECK(r.alpha_half_width > 0.0);
    CHECK(std::abs(r.price_at_alpha.mean - 100.0) < 0.1);
}
