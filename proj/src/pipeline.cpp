#include "longbasis/pipeline.hpp"

#include "longbasis/increment_density.hpp"
#include "longbasis/log.hpp"
#include "longbasis/param_csv.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace longbasis {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

RateSurface fitted_over(const LCParams& lc, IntRange years) {
    const Matrix all = lc.log_rates().array().exp().matrix();
    return {lc.ages, years, all.middleCols(lc.years.index(years.first), years.size()), RateKind::CentralRate};
}

double quantile(std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct GslOff {
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    ~GslOff() { gsl_set_error_handler(old); }
};

double integrate_density(const IncrementDensity& f) {
    GslOff guard;
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(2000);
    gsl_function fn;
    fn.function = [](double r, void* p) { return (*static_cast<const IncrementDensity*>(p))(r); };
    fn.params = const_cast<IncrementDensity*>(&f);
    double result = 0, err = 0;
    const int status = gsl_integration_qagi(&fn, 1e-12, 1e-10, 2000, ws, &result, &err);
    gsl_integration_workspace_free(ws);
    return status == GSL_SUCCESS ? result : NAN;
}

} // namespace

StageError::StageError(std::string stage, const Error& cause)
    : Error(ErrorKind::PipelineError, stage + ": " + cause.what()), stage_(std::move(stage)), cause_(cause.kind()) {}

PipelineData load_data(const RunConfig& cfg) {
    require(!cfg.data.reference.empty() && !cfg.data.book.empty(), ErrorKind::ConfigError,
            "data.reference and data.book are required");
    const auto ref_years = cfg.data.reference_years;
    const auto book_years = cfg.data.book_years ? cfg.data.book_years : cfg.data.reference_years;
    PipelineData d;
    d.reference = load_panel_file(cfg.data.reference, Population::Reference, cfg.data.ages, ref_years);
    d.book = load_panel_file(cfg.data.book, Population::Book, cfg.data.ages, book_years);
    return d;
}

LCFit fit_reference(const PipelineData& data) { return fit_lc(data.reference); }

JumpCalibration calibrate_reference(const LCParams& lc, const RunConfig& cfg) {
    CalibrationOptions co;
    co.family = cfg.scenario.renewal_family;
    co.starts = cfg.jump_starts;
    return calibrate(std::span<const double>(lc.k.data(), static_cast<std::size_t>(lc.k.size())), co);
}

std::vector<BookModelFit> fit_book_families(const PipelineData& data, const LCParams& lc, const RunConfig& cfg) {
    const AlignedPair pair = align_panels(data.reference, data.book);
    require(pair.reference.years.contains(pair.book.years), ErrorKind::ConfigError,
            "book years must lie within the reference years");
    LCParams ref = lc;
    if (!(pair.reference.ages == lc.ages))
        ref = fit_lc(pair.reference).params;
    const RateSurface over = fitted_over(ref, pair.book.years);
    std::vector<BookModelFit> fits;
    for (BookFamily f : cfg.book_families)
        fits.push_back(fit_book(f, ref, over, pair.book));
    return fits;
}

void write_bic_csv(std::ostream& out, const std::vector<BookModelFit>& fits) {
    const BookFamily best = select_model(fits).family;
    out << "family,loglik,n_params,n_obs,bic,selected\n";
    char buf[160];
    for (const auto& f : fits) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,%d,%d,%.10g,%d\n", std::string(to_string(f.family)).c_str(), f.loglik,
                      f.n_params, f.n_obs, f.bic, f.family == best ? 1 : 0);
        out << buf;
    }
}

ParamTable to_param_table(const JumpCalibration& cal) {
    ParamTable t;
    t.meta["family"] = std::string(to_string(cal.family));
    t.meta["converged"] = cal.converged ? "true" : "false";
    t.meta["weak_identification"] = cal.weak_identification ? "true" : "false";
    t.add_scalar("mu", cal.params.mu);
    t.add_scalar("sigma", cal.params.sigma);
    t.add_scalar("eta", cal.params.eta);
    t.add_scalar("alpha", cal.params.alpha);
    t.add_scalar("beta", cal.params.beta);
    t.add_scalar("k0", cal.params.k0);
    t.add_scalar("loglik", cal.loglik);
    return t;
}

std::vector<FanRow> fan_rows(const ScenarioSet& set) {
    std::vector<FanRow> rows;
    const int row = set.ages.index(set.config.start_age);
    const std::string model(to_string(set.config.model));
    for (const auto& [name, mats] : {std::pair{"reference", &set.ref_m}, std::pair{"book", &set.book_m}}) {
        for (int t = 0; t < set.years.size(); ++t) {
            std::vector<double> v;
            v.reserve(mats->size());
            for (const Matrix& m : *mats)
                v.push_back(m(row, t));
            FanRow r{model, name, set.years.value(t), {}};
            for (std::size_t i = 0; i < kFanLevels.size(); ++i)
                r.q[i] = quantile(v, kFanLevels[i]);
            rows.push_back(r);
        }
    }
    return rows;
}

void write_fan_csv(std::ostream& out, const std::vector<FanRow>& rows) {
    out << "model,population,year,p05,p25,p50,p75,p95\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.model.c_str(),
                      r.population.c_str(), r.year, r.q[0], r.q[1], r.q[2], r.q[3], r.q[4]);
        out << buf;
    }
}

Comparison compare_models(const PipelineData& data, const RunConfig& cfg) {
    Comparison c;
    for (ScenarioModel m : cfg.compare_models) {
        ScenarioConfig sc = cfg.scenario;
        sc.model = m;
        const std::string name(to_string(m));
        log::info("simulating " + name);
        const ScenarioSet set =
            run_stage("simulate " + name, [&] { return bootstrap_scenarios(data.reference, data.book, sc); });
        const auto rows = run_stage("hedge " + name, [&] { return hedge_rows(set, cfg.hedge); });
        c.rows.insert(c.rows.end(), rows.begin(), rows.end());
        const auto fans = fan_rows(set);
        c.fans.insert(c.fans.end(), fans.begin(), fans.end());
    }
    return c;
}

Report run_report(const RunConfig& cfg) {
    Report r;
    const PipelineData data = run_stage("ingest", [&] { return load_data(cfg); });
    r.reference = run_stage("fit", [&] { return fit_reference(data); });
    r.jumps = run_stage("calibrate-jumps", [&] { return calibrate_reference(r.reference.params, cfg); });
    r.books = run_stage("fit-book", [&] { return fit_book_families(data, r.reference.params, cfg); });
    r.comparison = compare_models(data, cfg);
    return r;
}

void write_report(std::ostream& out, const Report& r, const RunConfig& cfg) {
    const LCParams& lc = r.reference.params;
    out << "longbasis report\n\n";
    out << "reference ages " << lc.ages.first << "-" << lc.ages.last << ", years " << lc.years.first << "-"
        << lc.years.last << "\n";
    out << "master seed " << cfg.scenario.master_seed << ", scenarios " << cfg.scenario.n_scenarios << ", horizon "
        << cfg.scenario.horizon << "\n\n";

    out << "[reference lee-carter]\n";
    out << "loglik " << fmt("%.6f", r.reference.diagnostics.loglik) << "\n";
    out << "deviance " << fmt("%.6f", r.reference.diagnostics.deviance) << "\n";
    out << "age          a          b\n";
    for (int i = 0; i < lc.ages.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%-5d %10.4f %10.4f\n", lc.ages.value(i), lc.a(i), lc.b(i));
        out << buf;
    }
    out << "k_first " << fmt("%.4f", lc.k(0)) << ", k_last " << fmt("%.4f", lc.k(lc.k.size() - 1)) << "\n\n";

    const JumpDiffusionParams& p = r.jumps.params;
    out << "[jump diffusion] " << to_string(r.jumps.family) << " renewal\n";
    out << "mu " << fmt("%.4f", p.mu) << ", sigma " << fmt("%.4f", p.sigma) << ", eta " << fmt("%.4f", p.eta)
        << ", alpha " << fmt("%.4f", p.alpha) << ", beta " << fmt("%.4f", p.beta) << "\n";
    out << "loglik " << fmt("%.4f", r.jumps.loglik) << "\n\n";

    out << "[book models]\n";
    out << "family     loglik     params          bic\n";
    for (const auto& f : r.books) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-8s %10.2f %8d %12.2f\n", std::string(to_string(f.family)).c_str(), f.loglik,
                      f.n_params, f.bic);
        out << buf;
    }
    out << "selected " << to_string(select_model(r.books).family) << "\n\n";

    out << "[risk reduction]\n";
    write_hedge_table(out, r.comparison.rows);
    out << "\n[optimal weights]\n";
    for (const auto& row : r.comparison.rows) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-14s %8d %12.4f\n", row.model.c_str(), row.book_size, row.w);
        out << buf;
    }
}

std::vector<ValidationCheck> validate_pipeline(const RunConfig& cfg) {
    std::vector<ValidationCheck> checks;
    auto add = [&](std::string name, bool ok, std::string detail) {
        checks.push_back({std::move(name), ok, std::move(detail)});
    };

    const PipelineData data = run_stage("ingest", [&] { return load_data(cfg); });
    validate(data.reference);
    validate(data.book);
    add("panels", true,
        "reference " + std::to_string(data.reference.ages.size()) + "x" + std::to_string(data.reference.years.size()) +
            ", book " + std::to_string(data.book.ages.size()) + "x" + std::to_string(data.book.years.size()));

    const auto zeros = zero_rate_cells(central_rates(data.reference));
    add("reference zero-death cells", zeros.empty() || cfg.scenario.floor_rate > 0,
        std::to_string(zeros.size()) + " cells");

    AlignedPair pair;
    bool aligned = true;
    try {
        pair = align_panels(data.reference, data.book);
    } catch (const Error& e) {
        aligned = false;
        add("age and year overlap", false, e.what());
    }
    if (aligned)
        add("book years nested in reference years", pair.reference.years.contains(pair.book.years),
            std::to_string(pair.book.years.first) + "-" + std::to_string(pair.book.years.last));

    const LCFit fit = run_stage("fit", [&] { return fit_reference(data); });
    const LCParams& lc = fit.params;
    add("lee-carter converged", fit.diagnostics.converged, std::to_string(fit.diagnostics.iterations) + " iterations");
    const double sum_b = lc.b.sum(), sum_k = lc.k.sum();
    add("identification constraints", std::abs(sum_b - 1) <= 1e-10 && std::abs(sum_k) <= 1e-8,
        "sum b - 1 = " + fmt("%.3g", sum_b - 1) + ", sum k = " + fmt("%.3g", sum_k));
    const Matrix fitted = lc.log_rates().array().exp().matrix().cwiseProduct(data.reference.exposures);
    double worst = 0;
    for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
        const double obs = data.reference.deaths.row(i).sum();
        worst = std::max(worst, std::abs(fitted.row(i).sum() - obs) / std::max(obs, 1.0));
    }
    add("fitted deaths match observed by age", worst <= 1e-6, "max relative gap " + fmt("%.3g", worst));

    const JumpCalibration cal = run_stage("calibrate-jumps", [&] { return calibrate_reference(lc, cfg); });
    add("jump calibration converged", cal.converged && std::isfinite(cal.loglik), "loglik " + fmt("%.6g", cal.loglik));
    const IncrementDensity f(cal.params, cal.params.law(cal.family));
    const double mass = integrate_density(f);
    add("increment density integrates to one", std::abs(mass - 1) <= 1e-6, "integral " + fmt("%.12f", mass));
    const auto& counts = f.jump_counts();
    double total = counts.tail;
    for (double v : counts.p)
        total += v;
    add("jump count probabilities sum to one", std::abs(total - 1) <= 1e-9, "sum " + fmt("%.12f", total));

    const auto books = run_stage("fit-book", [&] { return fit_book_families(data, lc, cfg); });
    bool finite = true;
    for (const auto& b : books)
        finite = finite && std::isfinite(b.bic);
    add("book model BICs finite", finite, "selected " + std::string(to_string(select_model(books).family)));
    return checks;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorKind::IoError, "failed writing " + path.string());
}

std::string to_text(const std::function<void(std::ostream&)>& writer) {
    std::ostringstream s;
    writer(s);
    return s.str();
}

} // namespace longbasis
