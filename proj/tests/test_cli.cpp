#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>

#include "glwb/run_config.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = GLWB_CLI_PATH;
const fs::path kTmp = GLWB_TEST_TMP;

int run(const std::string& args, const std::string& log = "") {
    fs::create_directories(kTmp);
    std::string cmd = kCli + " " + args;
    if (!log.empty()) cmd += " >" + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<fs::path> csvs_in(const fs::path& dir) {
    std::vector<fs::path> out;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".csv") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

// CSV content with any `seconds` column blanked; wall times are the one
// permitted nondeterministic field.
std::string normalized(const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    int seconds_col = -1;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            out += line + "\n";
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        if (seconds_col < 0) {
            for (size_t i = 0; i < fields.size(); ++i)
                if (fields[i] == "seconds") seconds_col = static_cast<int>(i);
            if (seconds_col < 0) seconds_col = -2;  // no such column
        } else if (seconds_col >= 0 && seconds_col < static_cast<int>(fields.size())) {
            fields[seconds_col] = "_";
        }
        for (size_t i = 0; i < fields.size(); ++i)
            out += fields[i] + (i + 1 < fields.size() ? "," : "");
        out += "\n";
    }
    return out;
}

std::string small_bs_args() {
    return "--N 50 --fA 50 --strategy static";
}

} // namespace

TEST_CASE("defaults reproduce the reference parameter set", "[cli]") {
    glwb::RunConfig cfg;
    cfg.apply_conventions();
    CHECK(cfg.contract.P == 100.0);
    CHECK(cfg.contract.x0 == 60);
    CHECK(cfg.contract.beta == 0.003);
    CHECK(cfg.contract.c == 0.06);
    CHECK(cfg.contract.pi == 0.05);
    CHECK(cfg.contract.g == 0.03);
    CHECK(cfg.contract.b == Catch::Approx(0.035).margin(1e-15));
    CHECK(cfg.market.mode == glwb::RateModel::BsCir);
    CHECK(cfg.market.sigma_F == 0.20);
    CHECK(cfg.market.sigma_r == 0.10);
    CHECK(cfg.market.k_r == 0.5);
    CHECK(cfg.market.theta == 0.05);
    CHECK(cfg.market.r0 == 0.05);
    CHECK(cfg.market.rho == -0.25);
    CHECK(cfg.numeric.initial_health == 1);
    CHECK(cfg.contract.kappa(1) == 0.07);
    CHECK(cfg.contract.kappa(8) == 0.0);
}

TEST_CASE("config keys resolve with conventions and reject unknowns", "[cli]") {
    glwb::RunConfig cfg;
    cfg.set("contract.x0", "65");
    cfg.set("contract.alpha_bps", "154.46");
    cfg.set("numeric.strategy", "dynamic");
    cfg.set("numeric.gamma_mesh", "0 0.5 1 1.5 2");
    cfg.apply_conventions();
    CHECK(cfg.contract.g == Catch::Approx(0.035).margin(1e-15));
    CHECK(cfg.contract.b == Catch::Approx(0.040).margin(1e-15));
    CHECK(cfg.contract.alpha == Catch::Approx(154.46e-4).margin(1e-12));
    CHECK(cfg.numeric.strategy.gamma_mesh.size() == 5);
    cfg.set("contract.g", "0.05");
    cfg.apply_conventions();
    CHECK(cfg.contract.g == 0.05);  // explicit value wins over the convention
    CHECK(cfg.contract.b == Catch::Approx(0.055).margin(1e-15));
    CHECK_THROWS_AS(cfg.set("market.sigma_Q", "1"), glwb::ConfigError);
    CHECK_THROWS_AS(cfg.set("contract.x0", "60.5"), glwb::ConfigError);
    // identical settings hash identically, different settings do not
    glwb::RunConfig a, b;
    CHECK(a.hash() == b.hash());
    b.set("mc.seed", "43");
    CHECK(a.hash() != b.hash());
}

TEST_CASE("price command writes a provenance-stamped artifact", "[cli]") {
    const fs::path dir = kTmp / "price_run";
    fs::remove_all(dir);
    // constant-rate run via a config file
    const fs::path cfg = kTmp / "bs.ini";
    fs::create_directories(kTmp);
    std::ofstream(cfg) << "[market]\nmode = bs\n\n[contract]\nalpha_bps = 154.46\n";
    const int rc = run("price --config " + cfg.string() + " " + small_bs_args() + " --out " +
                       dir.string(), (kTmp / "price.log").string());
    REQUIRE(rc == 0);
    const auto files = csvs_in(dir);
    REQUIRE(files.size() == 1);
    const std::string body = slurp(files[0]);
    CHECK(body.find("# contract.P = 100") != std::string::npos);
    CHECK(body.find("price") != std::string::npos);
}

TEST_CASE("identical config and seed give identical artifacts", "[cli]") {
    const fs::path d1 = kTmp / "det1", d2 = kTmp / "det2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    const fs::path cfg = kTmp / "det.ini";
    std::ofstream(cfg) << "[market]\nmode = bs\n[mc]\npaths = 20000\nseed = 7\n";
    const std::string base = "price --engine mc --config " + cfg.string() + " ";
    REQUIRE(run(base + "--out " + d1.string(), (kTmp / "det1.log").string()) == 0);
    REQUIRE(run(base + "--out " + d2.string(), (kTmp / "det2.log").string()) == 0);
    const auto f1 = csvs_in(d1), f2 = csvs_in(d2);
    REQUIRE(f1.size() == 1);
    REQUIRE(f2.size() == 1);
    CHECK(f1[0].filename() == f2[0].filename());  // config-hash naming
    CHECK(normalized(f1[0]) == normalized(f2[0]));
}

TEST_CASE("malformed config fails with exit code 2 naming the field", "[cli]") {
    const fs::path cfg = kTmp / "bad.ini";
    fs::create_directories(kTmp);
    std::ofstream(cfg) << "[market]\nmode = bs\nsigma_F = -0.2\n";
    const fs::path log = kTmp / "bad.log";
    const int rc = run("price --config " + cfg.string(), log.string());
    CHECK(rc == 2);
    CHECK(slurp(log).find("market.sigma_F") != std::string::npos);

    std::ofstream(kTmp / "unknown.ini") << "[market]\nsigma_Q = 1\n";
    CHECK(run("price --config " + (kTmp / "unknown.ini").string(),
              (kTmp / "unknown.log").string()) == 2);
}

TEST_CASE("control variates under the stochastic rate are rejected", "[cli]") {
    const fs::path log = kTmp / "cv_cir.log";
    const int rc = run("fair-fee --engine mc-cv --paths 1000", log.string());
    CHECK(rc == 2);
    CHECK(slurp(log).find("constant-rate") != std::string::npos);
}

TEST_CASE("empty sweep axis list is a no-op", "[cli]") {
    const int rc = run("sweep --axis entry-age " + small_bs_args(),
                       (kTmp / "sweep_empty.log").string());
    CHECK(rc == 0);
}

TEST_CASE("sweep over ages writes one row per value", "[cli]") {
    const fs::path dir = kTmp / "sweep_run";
    fs::remove_all(dir);
    const fs::path cfg = kTmp / "sweep.ini";
    std::ofstream(cfg) << "[market]\nmode = bs\n[contract]\nc = 0\n";
    const int rc = run("sweep --axis entry-age --values 80,75 --config " + cfg.string() + " " +
                       small_bs_args() + " --out " + dir.string(),
                       (kTmp / "sweep.log").string());
    REQUIRE(rc == 0);
    const auto files = csvs_in(dir);
    REQUIRE(files.size() == 1);
    const std::string body = slurp(files[0]);
    CHECK(body.find("entry-age,fair_alpha_bps") != std::string::npos);
    CHECK(std::count(body.begin(), body.end(), '\n') >= 3);
}

TEST_CASE("action map emits the decision grid schema", "[cli]") {
    const fs::path dir = kTmp / "map_run";
    fs::remove_all(dir);
    const int rc = run("action-map --strategy dynamic --N 5 --fA 20 --years 8 --healths 1 --out " +
                       dir.string(), (kTmp / "map.log").string());
    REQUIRE(rc == 0);
    const auto files = csvs_in(dir);
    REQUIRE(files.size() == 1);
    const std::string body = slurp(files[0]);
    CHECK(body.find("n,h,j,k,A,r,gamma") != std::string::npos);
}

TEST_CASE("lattice dump covers every stored node", "[cli]") {
    const fs::path dir = kTmp / "dump_run";
    fs::remove_all(dir);
    const int rc = run("dump-lattice --N 2 --out " + dir.string(), (kTmp / "dump.log").string());
    REQUIRE(rc == 0);
    const auto files = csvs_in(dir);
    REQUIRE(files.size() == 1);
    CHECK(slurp(files[0]).find("i,k,R,kd,ku,p_up") != std::string::npos);
    CHECK(slurp(kTmp / "dump.log").find("reachability ok") != std::string::npos);
}

TEST_CASE("mc validation writes the report row", "[cli]") {
    const fs::path dir = kTmp / "valmc";
    fs::remove_all(dir);
    const fs::path cfg = kTmp / "valmc.ini";
    std::ofstream(cfg) << "[market]\nmode = bs\n[contract]\nalpha_bps = 154.46\n"
                       << "[mc]\npaths = 50000\nseed = 11\n[numeric]\nN = 100\nf_A = 100\n";
    const int rc = run("validate-mc --config " + cfg.string() + " --out " + dir.string(),
                       (kTmp / "valmc.log").string());
    REQUIRE(rc == 0);  // tree value inside the MC interval
    const auto files = csvs_in(dir);
    REQUIRE(files.size() == 1);
    CHECK(slurp(files[0]).find("config_id,mean,half_width,n_paths,steps_per_year,seed,seconds") !=
          std::string::npos);
}
