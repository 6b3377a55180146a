#include "longbasis/scenario.hpp"

#include "longbasis/error.hpp"
#include "longbasis/log.hpp"

#include <boost/random/binomial_distribution.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace longbasis {

std::string_view to_string(ScenarioModel m) {
    switch (m) {
    case ScenarioModel::RenewalJump:
        return "renewal_jump";
    case ScenarioModel::ZhouJumps:
        return "zhou_jumps";
    case ScenarioModel::LCCohorts:
        return "lc_cohorts";
    }
    return "?";
}

ScenarioModel parse_scenario_model(std::string_view text) {
    for (ScenarioModel m : kAllScenarioModels)
        if (text == to_string(m))
            return m;
    if (text == "renewal_jump+CAE" || text == "renewal_jump+cae")
        return ScenarioModel::RenewalJump;
    throw Error(ErrorKind::ConfigError, "unknown scenario model '" + std::string(text) + "'");
}

void validate(const ScenarioConfig& cfg) {
    require(cfg.n_scenarios >= 1, ErrorKind::ConfigError, "n_scenarios must be at least 1");
    require(cfg.horizon >= 1, ErrorKind::ConfigError, "horizon must be at least 1");
    require(cfg.book_size_l65 >= 1, ErrorKind::ConfigError, "book_size_l65 must be at least 1");
    require(cfg.threads >= 1, ErrorKind::ConfigError, "threads must be at least 1");
    require(cfg.max_attempts >= 1, ErrorKind::ConfigError, "max_attempts must be at least 1");
    require(cfg.floor_rate >= 0, ErrorKind::ConfigError, "floor_rate must be non-negative");
}

namespace {

Matrix exp_of(const Matrix& m) { return m.array().exp().matrix(); }

RateSurface ref_surface_over(const BaseFit& b, const Matrix& ref_rates_full, IntRange years) {
    const IntRange& ry = b.data.reference.years;
    return {b.data.reference.ages, years, ref_rates_full.middleCols(ry.index(years.first), years.size()),
            RateKind::CentralRate};
}

std::vector<AR1Params> fit_book_dynamics(const BookModelFit& fit) {
    const Matrix k = fit.period_indices();
    std::vector<AR1Params> out;
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
        const Vector row = k.row(r).transpose();
        out.push_back(fit_ar1(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    }
    return out;
}

// Period index paths over the future years, run across the gap first.
Matrix project_book_paths(const BookModelFit& fit, const std::vector<AR1Params>& ar, int gap, int horizon,
                          Engine& rng) {
    const Matrix k = fit.period_indices();
    Matrix out(k.rows(), horizon);
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
        const auto path = project_book_k(ar[static_cast<std::size_t>(r)], k(r, k.cols() - 1), gap + horizon, rng);
        for (int t = 0; t < horizon; ++t)
            out(r, t) = path[static_cast<std::size_t>(gap + t)];
    }
    return out;
}

struct RandomWalk {
    double drift = 0;
    double sd = 0;
};

RandomWalk fit_random_walk(const Vector& k) {
    const auto n = k.size() - 1;
    require(n >= 2, ErrorKind::DegenerateSeries, "random walk needs at least three index values");
    const Vector d = k.tail(n) - k.head(n);
    const double mean = d.mean();
    return {mean, std::sqrt((d.array() - mean).square().sum() / static_cast<double>(n - 1))};
}

struct ScenarioDraw {
    Matrix ref_m;
    Matrix book_m;
};

struct ScenarioFits {
    LCParams reference;
    JumpCalibration jumps;
    BookModelFit book;
    std::vector<AR1Params> book_ar;
    ZhouStyleParams zhou;
    LCCohortsFit cohorts;
};

ScenarioFits refit(const BaseFit& base, const ScenarioConfig& cfg, const ResampledPanels& data) {
    ScenarioFits f;
    switch (base.model) {
    case ScenarioModel::RenewalJump: {
        LCFitOptions lo;
        lo.init = &base.reference;
        f.reference = fit_lc(data.reference, lo).params;
        CalibrationOptions co;
        co.family = cfg.renewal_family;
        co.init = &base.jumps.params;
        co.start_step = 0.2;
        co.max_iterations = 400;
        co.simplex_tol = 1e-4;
        co.polish = false;
        co.check_identification = false;
        co.warn_on_limit = false;
        f.jumps = calibrate(std::span<const double>(f.reference.k.data(), static_cast<std::size_t>(f.reference.k.size())),
                            co);
        const Matrix rates = exp_of(f.reference.log_rates());
        BookFitOptions bo;
        bo.init = &base.book;
        f.book = fit_book(base.book.family, f.reference, ref_surface_over(base, rates, data.book.years), data.book, bo);
        f.book_ar = fit_book_dynamics(f.book);
        break;
    }
    case ScenarioModel::ZhouJumps: {
        ZhouFitOptions zo;
        zo.init = &base.zhou;
        f.zhou = fit_zhou(data.reference, data.book, zo);
        break;
    }
    case ScenarioModel::LCCohorts: {
        LCCohortsOptions co;
        co.init = &base.cohorts;
        f.cohorts = fit_lc_cohorts(data.reference, data.book, co);
        f.book_ar = fit_book_dynamics(f.cohorts.book);
        break;
    }
    }
    return f;
}

ScenarioFits base_fits(const BaseFit& base) {
    return {base.reference, base.jumps, base.book, base.book_ar, base.zhou, base.cohorts};
}

ScenarioDraw project(const BaseFit& base, const ScenarioConfig& cfg, const ScenarioFits& f, IntRange future,
                     Engine& rng) {
    const int H = cfg.horizon;
    const int gap = base.data.reference.years.last - base.data.book.years.last;
    ScenarioDraw out;
    switch (base.model) {
    case ScenarioModel::RenewalJump: {
        const auto k = simulate_k(f.jumps.params, f.jumps.params.law(f.jumps.family), H, rng, cfg.persistence);
        const RateSurface ref = project_rates(f.reference, k, future);
        const Matrix paths = project_book_paths(f.book, f.book_ar, gap, H, rng);
        out.ref_m = ref.values;
        out.book_m = book_rates(f.book, ref, paths).values;
        break;
    }
    case ScenarioModel::ZhouJumps: {
        const ZhouPaths p = simulate_zhou(f.zhou, H, rng, cfg.jump2_source);
        out.ref_m.resize(f.zhou.pop1.a.size(), H);
        out.book_m.resize(f.zhou.pop2.a.size(), H);
        for (int t = 0; t < H; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            out.ref_m.col(t) = (f.zhou.pop1.a + f.zhou.pop1.b * p.k1[ti]).array().exp();
            out.book_m.col(t) = (f.zhou.pop2.a + f.zhou.pop2.b * p.k2[ti]).array().exp();
        }
        break;
    }
    case ScenarioModel::LCCohorts: {
        const RandomWalk rw = fit_random_walk(f.cohorts.reference.k);
        std::normal_distribution<double> z;
        Vector k(H);
        double level = f.cohorts.reference.k(f.cohorts.reference.k.size() - 1);
        for (int t = 0; t < H; ++t) {
            level += rw.drift + rw.sd * z(rng);
            k(t) = level;
        }
        const RateSurface ref = lc_cohorts_reference_rates(f.cohorts, k, future);
        const Matrix paths = project_book_paths(f.cohorts.book, f.book_ar, gap, H, rng);
        out.ref_m = ref.values;
        out.book_m = book_rates(f.cohorts.book, ref, paths).values;
        break;
    }
    }
    const bool ok = out.ref_m.allFinite() && out.book_m.allFinite() && (out.ref_m.array() > 0).all() &&
                    (out.book_m.array() > 0).all() && (out.book_m.array() < 30).all();
    require(ok, ErrorKind::ScenarioRefitFailure, "projected rates are not finite and positive");
    return out;
}

std::vector<double> q_path(const Matrix& q, IntRange ages, int start_age, int horizon) {
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t)
        out[static_cast<std::size_t>(t)] = q(ages.index(start_age + t), t);
    return out;
}

Matrix q_of(const Matrix& m) { return (-(-m.array()).expm1()).matrix(); }

} // namespace

BaseFit fit_base(const MortalityPanel& ref_panel, const MortalityPanel& book_panel, const ScenarioConfig& cfg) {
    validate(cfg);
    BaseFit b;
    b.model = cfg.model;
    b.data = align_panels(ref_panel, book_panel);
    const MortalityPanel& ref = b.data.reference;
    const MortalityPanel& book = b.data.book;
    require(ref.years.contains(book.years), ErrorKind::ConfigError,
            "book years must lie within the reference years for scenario generation");
    require(ref.ages.contains(IntRange{cfg.start_age, cfg.start_age + cfg.horizon - 1}), ErrorKind::ConfigError,
            "ages " + std::to_string(cfg.start_age) + " to " + std::to_string(cfg.start_age + cfg.horizon - 1) +
                " must be covered for the lives paths");

    switch (cfg.model) {
    case ScenarioModel::RenewalJump: {
        b.reference = fit_lc(ref).params;
        CalibrationOptions co;
        co.family = cfg.renewal_family;
        b.jumps = calibrate(std::span<const double>(b.reference.k.data(), static_cast<std::size_t>(b.reference.k.size())),
                            co);
        b.ref_fitted = exp_of(b.reference.log_rates());
        const RateSurface over_book = ref_surface_over(b, b.ref_fitted, book.years);
        b.book = fit_book(cfg.book_family, b.reference, over_book, book);
        b.book_ar = fit_book_dynamics(b.book);
        b.book_fitted = exp_of(book_log_rates(b.book, over_book));
        break;
    }
    case ScenarioModel::ZhouJumps:
        b.zhou = fit_zhou(ref, book);
        b.ref_fitted = exp_of(b.zhou.pop1.log_rates());
        b.book_fitted = exp_of(b.zhou.pop2.log_rates());
        break;
    case ScenarioModel::LCCohorts: {
        b.cohorts = fit_lc_cohorts(ref, book);
        b.ref_fitted = lc_cohorts_reference_rates(b.cohorts, b.cohorts.reference.k, ref.years).values;
        b.book_ar = fit_book_dynamics(b.cohorts.book);
        b.book_fitted = exp_of(book_log_rates(b.cohorts.book, ref_surface_over(b, b.ref_fitted, book.years)));
        break;
    }
    }
    return b;
}

ResampledPanels resample_panels(const BaseFit& base, Engine& rng) {
    ResampledPanels out{base.data.reference, base.data.book};
    const Matrix mu = base.ref_fitted.cwiseProduct(base.data.reference.exposures);
    for (Eigen::Index j = 0; j < mu.cols(); ++j)
        for (Eigen::Index i = 0; i < mu.rows(); ++i)
            out.reference.deaths(i, j) = static_cast<double>(std::poisson_distribution<long long>(mu(i, j))(rng));
    const Matrix& E = base.data.book.exposures;
    for (Eigen::Index j = 0; j < E.cols(); ++j)
        for (Eigen::Index i = 0; i < E.rows(); ++i) {
            const auto n = static_cast<long long>(std::llround(E(i, j)));
            const double q = -std::expm1(-base.book_fitted(i, j));
            out.book.deaths(i, j) = static_cast<double>(boost::random::binomial_distribution<long long, double>(n, q)(rng));
        }
    return out;
}

std::uint64_t scenario_seed(std::uint64_t master, int s, int attempt) {
    const std::uint64_t base = child_seed(master, static_cast<std::uint64_t>(s));
    return attempt == 0 ? base : child_seed(base, static_cast<std::uint64_t>(attempt));
}

std::vector<std::uint32_t> simulate_lives(std::uint32_t l0, std::span<const double> q_path, Engine& rng) {
    std::vector<std::uint32_t> out{l0};
    out.reserve(q_path.size() + 1);
    for (double q : q_path) {
        require(q >= 0 && q <= 1, ErrorKind::DomainError, "death probability outside [0, 1]");
        const std::uint32_t l = out.back();
        out.push_back(static_cast<std::uint32_t>(
            boost::random::binomial_distribution<long long, double>(static_cast<long long>(l), 1 - q)(rng)));
    }
    return out;
}

std::vector<double> ScenarioSet::reference_q_path(int s) const {
    return q_path(q_of(ref_m[static_cast<std::size_t>(s)]), ages, config.start_age, config.horizon);
}

std::vector<double> ScenarioSet::book_q_path(int s) const {
    return q_path(book_q[static_cast<std::size_t>(s)], ages, config.start_age, config.horizon);
}

ScenarioSet bootstrap_scenarios(const MortalityPanel& ref_panel, const MortalityPanel& book_panel,
                                const ScenarioConfig& cfg) {
    return bootstrap_scenarios(fit_base(ref_panel, book_panel, cfg), cfg);
}

ScenarioSet bootstrap_scenarios(const BaseFit& base, const ScenarioConfig& cfg) {
    validate(cfg);
    require(cfg.model == base.model, ErrorKind::ConfigError, "base fit was made for another model");
    const IntRange ry = base.data.reference.years;
    const IntRange future{ry.last + 1, ry.last + cfg.horizon};
    const auto n = static_cast<std::size_t>(cfg.n_scenarios);

    ScenarioSet set;
    set.config = cfg;
    set.ages = base.data.reference.ages;
    set.years = future;
    set.ref_m.resize(n);
    set.book_m.resize(n);
    set.book_q.resize(n);
    set.lives.resize(n);
    set.scenario_seeds.resize(n);
    std::vector<int> attempts(n, 0);
    const ScenarioFits fixed = cfg.resample ? ScenarioFits{} : base_fits(base);

    auto run_one = [&](int s) {
        const auto si = static_cast<std::size_t>(s);
        for (int a = 0; a < cfg.max_attempts; ++a) {
            const std::uint64_t seed = scenario_seed(cfg.master_seed, s, a);
            attempts[si] = a + 1;
            try {
                Engine rng = make_stream(seed, 0);
                ScenarioDraw d;
                if (cfg.resample) {
                    ResampledPanels data = resample_panels(base, rng);
                    if (cfg.floor_rate > 0)
                        data.reference.deaths = (data.reference.deaths.array() > 0)
                                                    .select(data.reference.deaths,
                                                            cfg.floor_rate * data.reference.exposures.array());
                    d = project(base, cfg, refit(base, cfg, data), future, rng);
                } else {
                    d = project(base, cfg, fixed, future, rng);
                }
                set.book_q[si] = q_of(d.book_m);
                require((set.book_q[si].array() < 1).all(), ErrorKind::ScenarioRefitFailure,
                        "book death probability reached 1");
                Engine lives_rng = make_stream(seed, 1);
                set.lives[si] = simulate_lives(static_cast<std::uint32_t>(cfg.book_size_l65),
                                               q_path(set.book_q[si], set.ages, cfg.start_age, cfg.horizon),
                                               lives_rng);
                set.ref_m[si] = std::move(d.ref_m);
                set.book_m[si] = std::move(d.book_m);
                set.scenario_seeds[si] = seed;
                return;
            } catch (const Error& e) {
                log::debug("scenario " + std::to_string(s) + " attempt " + std::to_string(a) + ": " + e.what());
            }
        }
        attempts[si] = cfg.max_attempts + 1;
    };

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int s = next++; s < cfg.n_scenarios; s = next++) {
            try {
                run_one(s);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const int n_threads = std::min(cfg.threads, cfg.n_scenarios);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    int failed = 0;
    for (int a : attempts) {
        if (a > cfg.max_attempts)
            ++failed;
        else
            set.redraws += a - 1;
    }
    require(failed == 0, ErrorKind::ScenarioRefitFailure,
            std::to_string(failed) + " scenarios failed after " + std::to_string(cfg.max_attempts) + " attempts");
    require(set.redraws <= cfg.n_scenarios / 100, ErrorKind::ScenarioRefitFailure,
            std::to_string(set.redraws) + " scenario redraws exceed 1% of " + std::to_string(cfg.n_scenarios));
    if (set.redraws > 0)
        log::warn(std::to_string(set.redraws) + " scenarios were redrawn after refit failures");
    return set;
}

ScenarioSet with_book_size(const ScenarioSet& set, int book_size_l65) {
    require(book_size_l65 >= 1, ErrorKind::ConfigError, "book_size_l65 must be at least 1");
    ScenarioSet out = set;
    out.config.book_size_l65 = book_size_l65;
    for (int s = 0; s < set.size(); ++s) {
        const auto si = static_cast<std::size_t>(s);
        Engine lives_rng = make_stream(set.scenario_seeds[si], 1);
        out.lives[si] = simulate_lives(static_cast<std::uint32_t>(book_size_l65), set.book_q_path(s), lives_rng);
    }
    return out;
}

} // namespace longbasis
