#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glwb/montecarlo.hpp"
#include "glwb/params.hpp"
#include "glwb/pricer.hpp"

namespace glwb {

// Batch-run configuration: flat key = value lines grouped into [sections].
// Defaults reproduce the reference parameter set used throughout the test
// suite (P=100, sigma_F=0.20, sigma_r=0.10, k_r=0.5, theta=r0=0.05,
// rho=-0.25, beta=0.003, c=0.06, pi=0.05, g and b indexed to the entry age).
struct RunConfig {
    ContractParams contract = ContractParams::default_calibration(60, 0.06);
    bool g_auto = true;  // g = 0.03 + (x0-60)*0.001 when true
    bool b_auto = true;  // b = g + 0.005 when true
    MarketParams market;
    PricingOptions numeric;
    FairFeeOptions fee;
    McOptions mc;
    bool mc_cv = false;
    std::string strategy_name = "static";
    std::vector<double> custom_gamma_mesh;
    std::string out_dir = "out";
    std::string intensities_path;

    void apply_conventions() {
        if (g_auto) contract.g = 0.03 + (contract.x0 - 60) * 0.001;
        if (b_auto) contract.b = contract.g + 0.005;
        numeric.strategy = Strategy::parse(strategy_name);
        if (!custom_gamma_mesh.empty() &&
            (numeric.strategy.kind == StrategyKind::Dynamic ||
             numeric.strategy.kind == StrategyKind::FullDynamic))
            numeric.strategy.gamma_mesh = custom_gamma_mesh;
    }

    void set(const std::string& key, const std::string& value) {
        auto num = [&]() {
            char* end = nullptr;
            const double v = std::strtod(value.c_str(), &end);
            if (end == value.c_str() || *end != '\0')
                throw ConfigError(key + ": expected a number, got '" + value + "'");
            return v;
        };
        auto integer = [&]() {
            const double v = num();
            const long r = std::lround(v);
            if (std::abs(v - r) > 1e-9) throw ConfigError(key + ": expected an integer");
            return r;
        };
        auto boolean = [&]() {
            if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
            if (value == "false" || value == "0" || value == "no" || value == "off") return false;
            throw ConfigError(key + ": expected a boolean, got '" + value + "'");
        };
        if (key == "contract.P") contract.P = num();
        else if (key == "contract.x0") contract.x0 = static_cast<int>(integer());
        else if (key == "contract.alpha") contract.alpha = num();
        else if (key == "contract.alpha_bps") contract.alpha = num() * 1e-4;
        else if (key == "contract.beta") contract.beta = num();
        else if (key == "contract.g") { contract.g = num(); g_auto = false; }
        else if (key == "contract.b") { contract.b = num(); b_auto = false; }
        else if (key == "contract.c") contract.c = num();
        else if (key == "contract.pi") contract.pi = num();
        else if (key == "contract.penalty_rate") contract.penalty_rate = num();
        else if (key == "contract.penalty_years") contract.penalty_years = static_cast<int>(integer());
        else if (key == "contract.indexed_death_benefit") contract.indexed_death_benefit = boolean();
        else if (key == "market.mode") {
            if (value == "bs" || value == "bs-constant-rate") market.mode = RateModel::BsConstantRate;
            else if (value == "bs-cir" || value == "cir") market.mode = RateModel::BsCir;
            else throw ConfigError("market.mode: expected bs|bs-cir, got '" + value + "'");
        }
        else if (key == "market.sigma_F") market.sigma_F = num();
        else if (key == "market.sigma_r") market.sigma_r = num();
        else if (key == "market.k_r") market.k_r = num();
        else if (key == "market.theta") market.theta = num();
        else if (key == "market.r0") market.r0 = num();
        else if (key == "market.rho") market.rho = num();
        else if (key == "numeric.N") numeric.steps_per_year = static_cast<int>(integer());
        else if (key == "numeric.f_A") numeric.grid_factor = num();
        else if (key == "numeric.strategy") strategy_name = value;
        else if (key == "numeric.gamma_mesh") {
            std::vector<double> mesh;
            std::stringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ' '))
                if (!tok.empty()) mesh.push_back(std::strtod(tok.c_str(), nullptr));
            if (mesh.empty()) throw ConfigError("numeric.gamma_mesh: empty mesh");
            custom_gamma_mesh = mesh;
        }
        else if (key == "numeric.initial_health") numeric.initial_health = static_cast<int>(integer());
        else if (key == "numeric.theta_star") numeric.theta_star = num();
        else if (key == "numeric.fee_tol") fee.price_tol_rel = num();
        else if (key == "numeric.fee_max_iter") fee.max_iterations = static_cast<int>(integer());
        else if (key == "numeric.fee_two_stage") fee.two_stage = boolean();
        else if (key == "numeric.fee_coarse_N") fee.coarse_steps_per_year = static_cast<int>(integer());
        else if (key == "numeric.fee_coarse_f_A") fee.coarse_grid_factor = num();
        else if (key == "mc.paths") mc.paths = integer();
        else if (key == "mc.steps_per_year") mc.steps_per_year = static_cast<int>(integer());
        else if (key == "mc.seed") mc.seed = static_cast<uint64_t>(integer());
        else if (key == "mc.cv") mc_cv = boolean();
        else if (key == "output.dir") out_dir = value;
        else if (key == "output.intensities") intensities_path = value;
        else throw ConfigError("unknown configuration key '" + key + "'");
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        RunConfig cfg;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = strip(line);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[' && line.back() == ']') {
                section = strip(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            cfg.set(section.empty() ? key : section + "." + key, value);
        }
        cfg.apply_conventions();
        return cfg;
    }

    // Deterministic echo of every resolved setting, used for provenance
    // headers and output-file hashes.
    std::string resolved_text() const {
        std::ostringstream os;
        os.precision(17);
        os << "contract.P = " << contract.P << '\n'
           << "contract.x0 = " << contract.x0 << '\n'
           << "contract.alpha = " << contract.alpha << '\n'
           << "contract.beta = " << contract.beta << '\n'
           << "contract.g = " << contract.g << '\n'
           << "contract.b = " << contract.b << '\n'
           << "contract.c = " << contract.c << '\n'
           << "contract.pi = " << contract.pi << '\n'
           << "contract.penalty_rate = " << contract.penalty_rate << '\n'
           << "contract.penalty_years = " << contract.penalty_years << '\n'
           << "contract.indexed_death_benefit = " << contract.indexed_death_benefit << '\n'
           << "market.mode = " << (market.mode == RateModel::BsCir ? "bs-cir" : "bs") << '\n'
           << "market.sigma_F = " << market.sigma_F << '\n'
           << "market.sigma_r = " << market.sigma_r << '\n'
           << "market.k_r = " << market.k_r << '\n'
           << "market.theta = " << market.theta << '\n'
           << "market.r0 = " << market.r0 << '\n'
           << "market.rho = " << market.rho << '\n'
           << "numeric.N = " << numeric.steps_per_year << '\n'
           << "numeric.f_A = " << numeric.grid_factor << '\n'
           << "numeric.strategy = " << numeric.strategy.name() << '\n';
        os << "numeric.gamma_mesh =";
        for (double g : numeric.strategy.gamma_mesh) os << ' ' << g;
        os << '\n'
           << "numeric.initial_health = " << numeric.initial_health << '\n'
           << "numeric.theta_star = " << numeric.theta_star << '\n'
           << "numeric.fee_tol = " << fee.price_tol_rel << '\n'
           << "mc.paths = " << mc.paths << '\n'
           << "mc.steps_per_year = " << mc.steps_per_year << '\n'
           << "mc.seed = " << mc.seed << '\n'
           << "mc.cv = " << mc_cv << '\n';
        return os.str();
    }

    std::string hash() const {
        uint64_t h = 1469598103934665603ULL;  // FNV-1a
        for (unsigned char c : resolved_text()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return std::string(buf);
    }
};

} // namespace glwb
