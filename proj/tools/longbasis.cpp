#include "longbasis/config.hpp"
#include "longbasis/log.hpp"
#include "longbasis/param_csv.hpp"
#include "longbasis/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace longbasis;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    std::optional<double> floor_rate;
    bool no_resample = false;
    std::string scenarios;
    bool emit_plot_data = false;
};

RunConfig load(const Flags& f) {
    RunConfig c = load_run_config(f.config);
    if (!std::getenv("LONGBASIS_LOG"))
        log::set_threshold(c.log_level);
    if (f.seed)
        c.scenario.master_seed = *f.seed;
    if (f.threads)
        c.scenario.threads = *f.threads;
    if (f.floor_rate)
        c.scenario.floor_rate = *f.floor_rate;
    if (f.no_resample)
        c.scenario.resample = false;
    if (!f.out.empty())
        c.output_dir = f.out;
    validate(c.scenario);
    return c;
}

void emit(const fs::path& path, const std::string& text) {
    write_text_file(path, text);
    log::info("wrote " + path.generic_string());
}

void write_params(const fs::path& path, const ParamTable& t) {
    emit(path, to_text([&](std::ostream& o) { write_param_csv(o, t); }));
}

int cmd_ingest(const RunConfig& c) {
    const PipelineData d = run_stage("ingest", [&] { return load_data(c); });
    const fs::path dir = c.output_dir / "panels";
    emit(dir / "reference.csv", to_text([&](std::ostream& o) { write_panel(o, d.reference); }));
    emit(dir / "book.csv", to_text([&](std::ostream& o) { write_panel(o, d.book); }));
    const auto zeros = zero_rate_cells(central_rates(d.reference));
    const json summary{
        {"reference", {{"ages", {d.reference.ages.first, d.reference.ages.last}},
                       {"years", {d.reference.years.first, d.reference.years.last}},
                       {"zero_death_cells", zeros.size()}}},
        {"book", {{"ages", {d.book.ages.first, d.book.ages.last}}, {"years", {d.book.years.first, d.book.years.last}}}}};
    emit(dir / "summary.json", dump(summary));
    return 0;
}

int cmd_fit(const RunConfig& c) {
    const PipelineData d = run_stage("ingest", [&] { return load_data(c); });
    const LCFit fit = run_stage("fit", [&] { return fit_reference(d); });
    ParamTable t = to_param_table(fit.params);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", fit.diagnostics.loglik);
    t.meta["loglik"] = buf;
    t.meta["iterations"] = std::to_string(fit.diagnostics.iterations);
    write_params(c.output_dir / "reference_lc.csv", t);
    return 0;
}

int cmd_calibrate(const RunConfig& c) {
    const PipelineData d = run_stage("ingest", [&] { return load_data(c); });
    const LCFit fit = run_stage("fit", [&] { return fit_reference(d); });
    const JumpCalibration cal = run_stage("calibrate-jumps", [&] { return calibrate_reference(fit.params, c); });
    write_params(c.output_dir / "jumps.csv", to_param_table(cal));
    return 0;
}

int cmd_fit_book(const RunConfig& c) {
    const PipelineData d = run_stage("ingest", [&] { return load_data(c); });
    const LCFit fit = run_stage("fit", [&] { return fit_reference(d); });
    const auto fits = run_stage("fit-book", [&] { return fit_book_families(d, fit.params, c); });
    for (const auto& f : fits)
        write_params(c.output_dir / ("book_" + std::string(to_string(f.family)) + ".csv"), to_param_table(f));
    emit(c.output_dir / "book_bic.csv", to_text([&](std::ostream& o) { write_bic_csv(o, fits); }));
    return 0;
}

int cmd_compare(const RunConfig& c) {
    const PipelineData d = run_stage("ingest", [&] { return load_data(c); });
    const LCFit fit = run_stage("fit", [&] { return fit_reference(d); });
    const auto fits = run_stage("fit-book", [&] { return fit_book_families(d, fit.params, c); });
    emit(c.output_dir / "book_bic.csv", to_text([&](std::ostream& o) { write_bic_csv(o, fits); }));
    const Comparison cmp = compare_models(d, c);
    emit(c.output_dir / "compare.csv", to_text([&](std::ostream& o) { write_hedge_csv(o, cmp.rows); }));
    const std::string table = to_text([&](std::ostream& o) { write_hedge_table(o, cmp.rows); });
    emit(c.output_dir / "compare.txt", table);
    std::cout << table;
    return 0;
}

int cmd_simulate(const RunConfig& c) {
    const PipelineData d = run_stage("ingest", [&] { return load_data(c); });
    const ScenarioSet set =
        run_stage("simulate", [&] { return bootstrap_scenarios(d.reference, d.book, c.scenario); });
    run_stage("simulate", [&] {
        write_scenario_set(set, c.output_dir / "scenarios");
        return 0;
    });
    log::info("wrote " + (c.output_dir / "scenarios").generic_string());
    return 0;
}

int cmd_hedge(const RunConfig& c, const Flags& f) {
    const fs::path dir = f.scenarios.empty() ? c.output_dir / "scenarios" : fs::path(f.scenarios);
    const ScenarioSet set = read_scenario_set(dir);
    const auto rows = run_stage("hedge", [&] { return hedge_rows(set, c.hedge); });
    emit(c.output_dir / "hedge.csv", to_text([&](std::ostream& o) { write_hedge_csv(o, rows); }));
    const std::string table = to_text([&](std::ostream& o) { write_hedge_table(o, rows); });
    emit(c.output_dir / "hedge.txt", table);
    std::cout << table;
    return 0;
}

int cmd_report(const RunConfig& c, const Flags& f) {
    const Report r = run_report(c);
    const std::string text = to_text([&](std::ostream& o) { write_report(o, r, c); });
    emit(c.output_dir / "report.txt", text);
    emit(c.output_dir / "report.csv", to_text([&](std::ostream& o) { write_hedge_csv(o, r.comparison.rows); }));
    if (f.emit_plot_data) {
        const fs::path plot = c.output_dir / "plot";
        emit(plot / "fans.csv", to_text([&](std::ostream& o) { write_fan_csv(o, r.comparison.fans); }));
        write_params(plot / "reference_params.csv", to_param_table(r.reference.params));
        write_params(plot / "jumps.csv", to_param_table(r.jumps));
        for (const auto& b : r.books)
            write_params(plot / ("book_" + std::string(to_string(b.family)) + ".csv"), to_param_table(b));
    }
    std::cout << text;
    return 0;
}

int cmd_validate(const RunConfig& c) {
    const auto checks = validate_pipeline(c);
    json out = json::array();
    bool ok = true;
    for (const auto& ch : checks) {
        out.push_back({{"check", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
        ok = ok && ch.passed;
        std::cout << (ch.passed ? "ok    " : "FAIL  ") << ch.name << ": " << ch.detail << "\n";
    }
    emit(c.output_dir / "validation.json", dump(json{{"passed", ok}, {"checks", out}}));
    if (!ok) {
        std::cerr << json{{"error", "ValidationFailed"}, {"message", "one or more invariant checks failed"}}.dump()
                  << "\n";
        return 1;
    }
    return 0;
}

int fail(const std::string& kind, const std::string& message, const std::string& stage = {},
         const std::string& cause = {}) {
    std::string text = message;
    if (text.rfind(kind + ": ", 0) == 0)
        text.erase(0, kind.size() + 2);
    json j{{"error", kind}, {"message", text}};
    if (!stage.empty())
        j["stage"] = stage;
    if (!cause.empty())
        j["cause"] = cause;
    std::cerr << j.dump() << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-population mortality modelling and longevity hedge toolkit"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", f.seed, "override scenario.master_seed");
        sub->add_option("--threads", f.threads, "worker threads for scenario generation")->check(CLI::PositiveNumber);
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--floor-rate", f.floor_rate, "rate substituted for zero-death reference cells");
        sub->add_flag("--no-resample", f.no_resample, "project from the base fit without resampling (diagnostic)");
    };

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"ingest", "parse and validate the panels, write normalised copies"},
        {"fit", "fit the reference Lee-Carter model"},
        {"calibrate-jumps", "calibrate the renewal jump-diffusion on the reference period index"},
        {"fit-book", "fit the book model families and rank them by BIC"},
        {"compare", "run every configured model through simulation and hedging"},
        {"simulate", "generate and store a scenario set"},
        {"hedge", "evaluate the index hedge on a stored scenario set"},
        {"report", "full pipeline with a fixed-format report"},
        {"validate", "run the invariant suite against a data set"},
    };
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub);
        if (std::string(c.name) == "hedge")
            sub->add_option("--scenarios", f.scenarios, "scenario set directory")->check(CLI::ExistingDirectory);
        if (std::string(c.name) == "report")
            sub->add_flag("--emit-plot-data", f.emit_plot_data, "write fan and parameter CSVs for plotting");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        return fail("UsageError", e.what());
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const RunConfig c = load(f);
        if (name == "ingest") return cmd_ingest(c);
        if (name == "fit") return cmd_fit(c);
        if (name == "calibrate-jumps") return cmd_calibrate(c);
        if (name == "fit-book") return cmd_fit_book(c);
        if (name == "compare") return cmd_compare(c);
        if (name == "simulate") return cmd_simulate(c);
        if (name == "hedge") return cmd_hedge(c, f);
        if (name == "report") return cmd_report(c, f);
        return cmd_validate(c);
    } catch (const StageError& e) {
        return fail("PipelineError", e.what(), e.stage(), std::string(to_string(e.cause())));
    } catch (const Error& e) {
        return fail(std::string(to_string(e.kind())), e.what(), name);
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), name);
    }
}
