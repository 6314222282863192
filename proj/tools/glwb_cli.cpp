// Batch front end: prices, fee calibrations, parameter sweeps, decision maps
// and Monte Carlo validation runs, driven by a sectioned key=value config
// file plus command-line overrides.  Results land as CSV files under --out.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glwb/csv.hpp"
#include "glwb/health_model.hpp"
#include "glwb/montecarlo.hpp"
#include "glwb/pricer.hpp"
#include "glwb/run_config.hpp"

#ifndef GLWB_DATA_DIR
#define GLWB_DATA_DIR "data"
#endif

namespace {

using namespace glwb;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string intensities;
    std::string engine = "tree";
    std::string strategy;
    int N = 0;
    double fA = 0.0;
    long paths = 0;
    long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "config file (sections [contract] [market] [numeric] [mc] [output])");
    cmd->add_option("--out", a.out_dir, "output directory for CSV artifacts");
    cmd->add_option("--intensities", a.intensities, "transition-intensity coefficient file");
    cmd->add_option("--engine", a.engine, "tree|mc|mc-cv")->check(CLI::IsMember({"tree", "mc", "mc-cv"}));
    cmd->add_option("--strategy", a.strategy, "static|mixed|dynamic|full-dynamic");
    cmd->add_option("--N", a.N, "tree steps per year");
    cmd->add_option("--fA", a.fA, "account grid span factor");
    cmd->add_option("--paths", a.paths, "Monte Carlo paths");
    cmd->add_option("--seed", a.seed, "Monte Carlo seed");
}

RunConfig resolve(const CommonArgs& a) {
    RunConfig cfg = a.config_path.empty() ? RunConfig{} : RunConfig::load(a.config_path);
    if (!a.strategy.empty()) cfg.strategy_name = a.strategy;
    if (a.N > 0) cfg.numeric.steps_per_year = a.N;
    if (a.fA > 0.0) cfg.numeric.grid_factor = a.fA;
    if (a.paths > 0) cfg.mc.paths = a.paths;
    if (a.seed >= 0) cfg.mc.seed = static_cast<uint64_t>(a.seed);
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (!a.intensities.empty()) cfg.intensities_path = a.intensities;
    if (cfg.intensities_path.empty())
        cfg.intensities_path = std::string(GLWB_DATA_DIR) + "/transition_intensities.csv";
    cfg.apply_conventions();
    cfg.contract.validate();
    cfg.market.validate();
    cfg.numeric.strategy.validate();
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

HealthSequence sequence_for(const RunConfig& cfg) {
    const IntensityTable table = IntensityTable::load(cfg.intensities_path);
    return transition_sequence(table, cfg.contract.x0);
}

std::string out_path(const RunConfig& cfg, const std::string& stem) {
    return cfg.out_dir + "/" + stem + "_" + cfg.hash() + ".csv";
}

int cmd_price(const CommonArgs& args) {
    RunConfig cfg = resolve(args);
    const HealthSequence seq = sequence_for(cfg);
    const std::string path = out_path(cfg, "price");
    CsvWriter csv(path, cfg.resolved_text(),
                  {"engine", "strategy", "x0", "c", "alpha_bps", "price", "half_width",
                   "n_paths", "seconds"});
    if (args.engine == "tree") {
        const auto r = price(cfg.contract, cfg.market, seq, cfg.numeric);
        std::printf("price (tree, %s): %.6f   [N=%d f_A=%g, %.2fs]\n",
                    cfg.numeric.strategy.name().c_str(), r.price, cfg.numeric.steps_per_year,
                    cfg.numeric.grid_factor, r.seconds);
        csv.row("tree", cfg.numeric.strategy.name(), cfg.contract.x0, cfg.contract.c,
                cfg.contract.alpha * 1e4, r.price, 0.0, 0L, r.seconds);
    } else {
        if (cfg.numeric.strategy.kind != StrategyKind::Static)
            throw ConfigError("the Monte Carlo engine prices the static strategy only");
        const bool cv = args.engine == "mc-cv";
        const McEstimate est = cv ? simulate_price_static_cv(cfg.contract, cfg.market, seq, cfg.mc)
                                  : simulate_price_static(cfg.contract, cfg.market, seq, cfg.mc);
        std::printf("price (%s): %.6f +/- %.6f   [%ld paths, %.2fs]%s\n", args.engine.c_str(),
                    est.mean, est.half_width, est.n_paths, est.wall_seconds,
                    est.cv_degraded ? "  (warning: singular control covariance, plain MC)" : "");
        csv.row(args.engine, cfg.numeric.strategy.name(), cfg.contract.x0, cfg.contract.c,
                cfg.contract.alpha * 1e4, est.mean, est.half_width, est.n_paths,
                est.wall_seconds);
    }
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

int cmd_fair_fee(const CommonArgs& args) {
    RunConfig cfg = resolve(args);
    const HealthSequence seq = sequence_for(cfg);
    const std::string path = out_path(cfg, "fair_fee");
    CsvWriter csv(path, cfg.resolved_text(),
                  {"engine", "strategy", "x0", "c", "fair_alpha_bps", "ci_bps", "price",
                   "iterations", "seconds"});
    if (args.engine == "tree") {
        const auto r = fair_fee(cfg.contract, cfg.market, seq, cfg.numeric, cfg.fee);
        std::printf("fair alpha (tree, %s): %.4f bps   [%d pricings, %.2fs]\n",
                    cfg.numeric.strategy.name().c_str(), r.alpha * 1e4, r.iterations, r.seconds);
        csv.row("tree", cfg.numeric.strategy.name(), cfg.contract.x0, cfg.contract.c,
                r.alpha * 1e4, 0.0, r.price, r.iterations, r.seconds);
    } else {
        if (cfg.numeric.strategy.kind != StrategyKind::Static)
            throw ConfigError("the Monte Carlo engine calibrates the static strategy only");
        const bool cv = args.engine == "mc-cv";
        const auto r = fair_fee_mc(cfg.contract, cfg.market, seq, cfg.mc, cv);
        std::printf("fair alpha (%s): %.4f +/- %.4f bps   [%d probes, %.2fs]\n",
                    args.engine.c_str(), r.alpha * 1e4, r.alpha_half_width * 1e4, r.iterations,
                    r.seconds);
        csv.row(args.engine, cfg.numeric.strategy.name(), cfg.contract.x0, cfg.contract.c,
                r.alpha * 1e4, r.alpha_half_width * 1e4, r.price_at_alpha.mean, r.iterations,
                r.seconds);
    }
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis_name,
              const std::vector<double>& values, bool price_only) {
    RunConfig cfg = resolve(args);
    if (values.empty()) {
        std::printf("sweep: empty value list, nothing to do\n");
        return 0;
    }
    const SweepAxis axis = parse_sweep_axis(axis_name);
    const IntensityTable table = IntensityTable::load(cfg.intensities_path);
    const auto rows = sweep(table, axis, values, cfg.contract, cfg.market, cfg.numeric, cfg.fee,
                            price_only ? SweepQuantity::Price : SweepQuantity::FairAlpha);
    const std::string path = out_path(cfg, std::string("sweep_") + axis_name);
    CsvWriter csv(path, cfg.resolved_text(),
                  {axis_name, "fair_alpha_bps", "price", "seconds", "error"});
    for (const auto& r : rows) {
        csv.row(r.axis_value, r.ok ? r.fair_alpha_bps : 0.0, r.ok ? r.price : 0.0, r.seconds,
                r.error);
        if (r.ok)
            std::printf("%s=%g  ->  %.4f bps (price %.4f)  [%.2fs]\n", axis_name.c_str(),
                        r.axis_value, r.fair_alpha_bps, r.price, r.seconds);
        else
            std::printf("%s=%g  ->  error: %s\n", axis_name.c_str(), r.axis_value,
                        r.error.c_str());
    }
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

int cmd_action_map(const CommonArgs& args, std::vector<int> years, std::vector<int> healths) {
    RunConfig cfg = resolve(args);
    if (cfg.numeric.strategy.kind == StrategyKind::Static ||
        cfg.numeric.strategy.kind == StrategyKind::Mixed)
        cfg.numeric.strategy = Strategy::dynamic();
    if (years.empty()) years = {1, 8, 20};
    if (healths.empty()) healths = {1, 4};
    const HealthSequence seq = sequence_for(cfg);
    const auto maps = optimal_action_map(cfg.contract, cfg.market, seq, cfg.numeric, years, healths);
    const std::string path = out_path(cfg, "action_map");
    CsvWriter csv(path, cfg.resolved_text(), {"n", "h", "j", "k", "A", "r", "gamma"});
    for (const auto& m : maps)
        for (int kk = 0; kk < m.k_count; ++kk)
            for (int j = 0; j < m.j_count; ++j)
                csv.row(m.n, m.h, j, m.k_lo + kk, m.account[j], m.rate[kk],
                        m.gamma[static_cast<size_t>(kk) * m.j_count + j]);
    std::printf("wrote %s (%zu maps)\n", path.c_str(), maps.size());
    return 0;
}

int cmd_validate_mc(const CommonArgs& args) {
    RunConfig cfg = resolve(args);
    const HealthSequence seq = sequence_for(cfg);
    const auto tree = price(cfg.contract, cfg.market, seq, cfg.numeric);
    const McEstimate est = cfg.mc_cv ? simulate_price_static_cv(cfg.contract, cfg.market, seq, cfg.mc)
                                     : simulate_price_static(cfg.contract, cfg.market, seq, cfg.mc);
    const bool inside = std::abs(tree.price - est.mean) <= est.half_width;
    std::printf("tree price: %.6f   mc: %.6f +/- %.6f   -> tree %s the 95%% interval\n",
                tree.price, est.mean, est.half_width, inside ? "inside" : "OUTSIDE");
    const std::string path = out_path(cfg, "mc_report");
    CsvWriter csv(path, cfg.resolved_text(),
                  {"config_id", "mean", "half_width", "n_paths", "steps_per_year", "seed",
                   "seconds"});
    csv.row(cfg.hash(), est.mean, est.half_width, est.n_paths, est.steps_per_year, est.seed,
            est.wall_seconds);
    std::printf("wrote %s\n", path.c_str());
    return inside ? 0 : 1;
}

int cmd_dump_lattice(const CommonArgs& args) {
    RunConfig cfg = resolve(args);
    if (cfg.market.mode != RateModel::BsCir)
        throw ConfigError("dump-lattice requires market.mode = bs-cir");
    const RateLattice lat =
        RateLattice::build(cfg.market, cfg.contract.years_to_horizon(), cfg.numeric.steps_per_year);
    const std::string path = out_path(cfg, "lattice");
    CsvWriter csv(path, cfg.resolved_text(), {"i", "k", "R", "kd", "ku", "p_up"});
    for (int i = 0; i < lat.steps(); ++i)
        for (int k = lat.k_min(i); k <= lat.k_max(i); ++k)
            csv.row(i, k, lat.value(i, k), lat.k_down(i, k), lat.k_up(i, k),
                    lat.up_probability(i, k));
    std::printf("wrote %s (%d steps, reachability %s)\n", path.c_str(), lat.steps(),
                lat.reachability_check() ? "ok" : "BROKEN");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GLWB-LTC pricing engine"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string axis = "entry-age";
    std::vector<double> values;
    bool price_only = false;
    std::vector<int> years, healths;

    auto* price_cmd = app.add_subcommand("price", "price one contract");
    add_common(price_cmd, args);
    auto* fee_cmd = app.add_subcommand("fair-fee", "calibrate the account fee");
    add_common(fee_cmd, args);
    auto* sweep_cmd = app.add_subcommand("sweep", "fair fee or price along a parameter axis");
    add_common(sweep_cmd, args);
    sweep_cmd->add_option("--axis", axis, "entry-age|sigma_r|sigma_F|rho|c");
    sweep_cmd->add_option("--values", values, "axis values")->delimiter(',');
    sweep_cmd->add_flag("--price-only", price_only, "price at fixed alpha instead of calibrating");
    auto* map_cmd = app.add_subcommand("action-map", "optimal withdrawal decision surfaces");
    add_common(map_cmd, args);
    map_cmd->add_option("--years", years, "anniversaries")->delimiter(',');
    map_cmd->add_option("--healths", healths, "health states")->delimiter(',');
    auto* val_cmd = app.add_subcommand("validate-mc", "compare tree and Monte Carlo prices");
    add_common(val_cmd, args);
    auto* dump_cmd = app.add_subcommand("dump-lattice", "write the rate-tree nodes as CSV");
    add_common(dump_cmd, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (price_cmd->parsed()) return cmd_price(args);
        if (fee_cmd->parsed()) return cmd_fair_fee(args);
        if (sweep_cmd->parsed()) return cmd_sweep(args, axis, values, price_only);
        if (map_cmd->parsed()) return cmd_action_map(args, years, healths);
        if (val_cmd->parsed()) return cmd_validate_mc(args);
        if (dump_cmd->parsed()) return cmd_dump_lattice(args);
    } catch (const glwb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
