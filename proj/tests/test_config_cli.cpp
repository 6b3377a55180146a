#include <doctest.h>

#include "longbasis/config.hpp"
#include "longbasis/error.hpp"
#include "longbasis/param_csv.hpp"
#include "longbasis/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace longbasis;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = fs::path(LONGBASIS_SOURCE_DIR) / "data" / "synthetic";

json base_config() {
    return json::parse(R"({
      "data": {"reference": "reference.csv", "book": "book.csv", "ages": [60, 89]},
      "compare": {"models": ["zhou_jumps"]},
      "scenario": {"n_scenarios": 12, "master_seed": 99, "model": "zhou_jumps"},
      "hedge": {"book_sizes": [5000, 100000]}
    })");
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("longbasis_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, json j) {
    j["data"]["reference"] = (kData / "reference.csv").string();
    j["data"]["book"] = (kData / "book.csv").string();
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

int run_cli(const std::string& args, const fs::path& err) {
    const std::string cmd = std::string(LONGBASIS_CLI) + " " + args + " 2>" + err.string() + " >/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("defaults and overrides") {
        const RunConfig c = run_config_from_json(base_config(), kData);
        CHECK(c.data.reference == kData / "reference.csv");
        CHECK(c.data.ages == IntRange{60, 89});
        CHECK(!c.data.book_years);
        CHECK(c.scenario.master_seed == 99);
        CHECK(c.scenario.n_scenarios == 12);
        CHECK(c.scenario.model == ScenarioModel::ZhouJumps);
        CHECK(c.compare_models == std::vector<ScenarioModel>{ScenarioModel::ZhouJumps});
        CHECK(c.hedge.book_sizes == std::vector<int>{5000, 100000});
        CHECK(c.hedge.interest_rate == 0.03);
        CHECK(c.book_families.size() == 4);
    }
    SUBCASE("unknown keys are rejected") {
        json j = base_config();
        j["scenario"]["n_scenaros"] = 5;
        CHECK_THROWS_AS(run_config_from_json(j), Error);
        j = base_config();
        j["extra"] = 1;
        CHECK_THROWS_AS(run_config_from_json(j), Error);
    }
    SUBCASE("the seed is explicit") {
        json j = base_config();
        j["scenario"].erase("master_seed");
        try {
            run_config_from_json(j);
            FAIL("accepted a config without a seed");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ConfigError);
        }
    }
    SUBCASE("bad values") {
        json j = base_config();
        j["scenario"]["n_scenarios"] = "many";
        CHECK_THROWS_AS(run_config_from_json(j), Error);
        j = base_config();
        j["book"] = {{"families", {"CAE", "XYZ"}}};
        CHECK_THROWS_AS(run_config_from_json(j), Error);
        j = base_config();
        j["hedge"]["interest_rate"] = -2;
        CHECK_THROWS_AS(run_config_from_json(j), Error);
    }
    SUBCASE("section aliases feed the scenario config") {
        json j = base_config();
        j["renewal"] = {{"family", "gamma"}, {"starts", 3}};
        j["zhou"] = {{"jump2_source", "population1"}};
        const RunConfig c = run_config_from_json(j);
        CHECK(c.scenario.renewal_family == RenewalFamily::Gamma);
        CHECK(c.jump_starts == 3);
        CHECK(c.scenario.jump2_source == JumpSource::Population1);
    }
    SUBCASE("forward curve from a file") {
        const fs::path dir = scratch("forwards");
        std::ofstream(dir / "fwd.csv") << "t,value\n1,0.99\n2,0.97\n";
        json j = base_config();
        j["hedge"]["forwards"] = "fwd.csv";
        j["hedge"]["liability_horizon"] = 2;
        const RunConfig c = run_config_from_json(j, dir);
        CHECK(c.hedge.forwards == std::vector<double>{0.99, 0.97});
        fs::remove_all(dir);
    }
    SUBCASE("serialised configs read back unchanged") {
        const RunConfig c = run_config_from_json(base_config(), kData);
        const json once = to_json(c);
        CHECK(to_json(run_config_from_json(once)) == once);
    }
}

TEST_CASE("stage tags wrap module errors") {
    try {
        run_stage("fit", []() -> int { throw Error(ErrorKind::NonConvergence, "stalled"); });
        FAIL("no throw");
    } catch (const StageError& e) {
        CHECK(e.kind() == ErrorKind::PipelineError);
        CHECK(e.cause() == ErrorKind::NonConvergence);
        CHECK(e.stage() == "fit");
    }
    CHECK_THROWS_AS(run_stage("fit", []() -> int { throw Error(ErrorKind::ConfigError, "x"); }), Error);
}

TEST_CASE("cli fit passes the fitted parameters through") {
    const fs::path dir = scratch("fit");
    const fs::path cfg = write_config(dir, base_config());
    REQUIRE(run_cli("fit --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "err") == 0);
    const ParamTable t = read_param_csv_file(dir / "out" / "reference_lc.csv");
    const LCParams from_cli = lc_params_from_table(t);
    const LCFit direct = fit_reference(load_data(load_run_config(cfg)));
    CHECK(from_cli.a(0) == direct.params.a(0));
    CHECK(from_cli.b(0) == direct.params.b(0));
    CHECK(from_cli.k == direct.params.k);
    fs::remove_all(dir);
}

TEST_CASE("cli simulate is idempotent and hedge reads its output") {
    const fs::path dir = scratch("simulate");
    const fs::path cfg = write_config(dir, base_config());
    const std::string common = "--config " + cfg.string() + " --out ";
    REQUIRE(run_cli("simulate " + common + (dir / "a").string(), dir / "err") == 0);
    REQUIRE(run_cli("simulate " + common + (dir / "b").string() + " --threads 2", dir / "err") == 0);
    CHECK(slurp(dir / "a" / "scenarios" / "manifest.json") == slurp(dir / "b" / "scenarios" / "manifest.json"));
    CHECK(slurp(dir / "a" / "scenarios" / "scenarios.bin") == slurp(dir / "b" / "scenarios" / "scenarios.bin"));

    REQUIRE(run_cli("hedge " + common + (dir / "h").string() + " --scenarios " + (dir / "a" / "scenarios").string(),
                    dir / "err") == 0);
    const std::string csv = slurp(dir / "h" / "hedge.csv");
    CHECK(csv.rfind("model,book_size,w,rr,var_unhedged,var_hedged,n_scenarios,seed\n", 0) == 0);
    CHECK(csv.find("zhou_jumps,100000,") != std::string::npos);

    REQUIRE(run_cli("simulate " + common + (dir / "c").string() + " --seed 7", dir / "err") == 0);
    CHECK(slurp(dir / "a" / "scenarios" / "scenarios.bin") != slurp(dir / "c" / "scenarios" / "scenarios.bin"));
    const json m = json::parse(slurp(dir / "c" / "scenarios" / "manifest.json"));
    CHECK(m["config"]["master_seed"] == 7);
    fs::remove_all(dir);
}

TEST_CASE("cli errors are json on stderr with a nonzero exit") {
    const fs::path dir = scratch("errors");
    json j = base_config();
    j["scenario"].erase("master_seed");
    const fs::path cfg = write_config(dir, j);
    CHECK(run_cli("fit --config " + cfg.string(), dir / "err") != 0);
    const json e = json::parse(slurp(dir / "err"));
    CHECK(e["error"] == "ConfigError");
    CHECK(e["message"].get<std::string>().find("master_seed") != std::string::npos);

    json missing = base_config();
    const fs::path cfg2 = dir / "missing.json";
    missing["data"]["reference"] = "/no/such/file.csv";
    std::ofstream(cfg2) << missing.dump();
    CHECK(run_cli("ingest --config " + cfg2.string() + " --out " + (dir / "o").string(), dir / "err2") != 0);
    CHECK(json::parse(slurp(dir / "err2"))["error"] == "IoError");

    CHECK(run_cli("frobnicate", dir / "err3") != 0);
    CHECK(json::parse(slurp(dir / "err3"))["error"] == "UsageError");
    fs::remove_all(dir);
}
