#include "longbasis/book_models.hpp"

#include "longbasis/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace longbasis {

std::string_view to_string(BookFamily f) {
    switch (f) {
    case BookFamily::RelLC: return "relLC";
    case BookFamily::CAE: return "cae";
    case BookFamily::APC: return "apc";
    case BookFamily::CBD: return "cbd";
    }
    return "?";
}

BookFamily parse_book_family(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (BookFamily f : kAllBookFamilies) {
        std::string name(to_string(f));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower == name)
            return f;
    }
    if (lower == "lc")
        return BookFamily::RelLC;
    throw Error(ErrorKind::ConfigError, "unknown book family '" + std::string(text) + "'");
}

Matrix BookModelFit::period_indices() const {
    if (family == BookFamily::CBD) {
        Matrix out(2, kappa1_B.size());
        out.row(0) = kappa1_B.transpose();
        out.row(1) = kappa2_B.transpose();
        return out;
    }
    return k_B.transpose();
}

namespace {

double softplus(double x) { return x > 30 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// logit(1 - exp(-m)) = log(e^m - 1)
double logit_q_of_m(double m) { return std::log(std::expm1(m)); }

Matrix window(const RateSurface& s, IntRange ages, IntRange years) {
    require(s.ages.contains(ages) && s.years.contains(years), ErrorKind::DomainError,
            "reference rates do not cover the book window " + to_string(ages) + " x " + to_string(years));
    return s.values.block(s.ages.index(ages.first), s.years.index(years.first), ages.size(), years.size());
}

Vector age_slice(const LCParams& lc, IntRange ages) {
    require(lc.ages.contains(ages), ErrorKind::DomainError, "reference fit does not cover the book ages");
    return lc.b.segment(lc.ages.index(ages.first), ages.size());
}

struct CbdResult {
    Vector kappa1;
    Vector kappa2;
    int iterations = 0;
    bool converged = true;
};

CbdResult fit_cbd(const Matrix& deaths, const Matrix& exposures, const Matrix& logit_ref, const Vector& z,
                  const ConvergenceOptions& conv, const BookModelFit* init) {
    const auto rows = deaths.rows();
    const auto cols = deaths.cols();
    CbdResult out;
    out.kappa1 = init ? init->kappa1_B : Vector::Zero(cols);
    out.kappa2 = init ? init->kappa2_B : Vector::Zero(cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        auto year_ll = [&](double k1, double k2) {
            double ll = 0;
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double m = softplus(logit_ref(i, j) + k1 + z(i) * k2);
                ll += deaths(i, j) * std::log(m) - exposures(i, j) * m;
            }
            return ll;
        };
        double k1 = out.kappa1(j), k2 = out.kappa2(j);
        double ll = year_ll(k1, k2);
        bool done = false;
        int it = 0;
        for (; it < conv.max_iter && !done; ++it) {
            Eigen::Vector2d score = Eigen::Vector2d::Zero();
            Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double eta = logit_ref(i, j) + k1 + z(i) * k2;
                const double m = softplus(eta);
                const double q = sigmoid(eta);
                const double g = (deaths(i, j) / m - exposures(i, j)) * q;
                const double w = exposures(i, j) * q * q / m;
                score += g * Eigen::Vector2d(1.0, z(i));
                info(0, 0) += w;
                info(0, 1) += w * z(i);
                info(1, 1) += w * z(i) * z(i);
            }
            info(1, 0) = info(0, 1);
            const Eigen::Vector2d delta = info.ldlt().solve(score);
            double step = 1.0;
            double trial = ll;
            for (; step > 1e-8; step *= 0.5) {
                trial = year_ll(k1 + step * delta(0), k2 + step * delta(1));
                if (std::isfinite(trial) && trial >= ll)
                    break;
            }
            if (step <= 1e-8)
                done = true;
            else {
                k1 += step * delta(0);
                k2 += step * delta(1);
                done = std::abs(trial - ll) <= conv.rel_tol * std::abs(trial);
                ll = trial;
            }
        }
        out.kappa1(j) = k1;
        out.kappa2(j) = k2;
        out.iterations = std::max(out.iterations, it);
        out.converged = out.converged && done;
    }
    return out;
}

} // namespace

double bic(double loglik, int n_params, int n_obs) {
    return -2.0 * loglik + n_params * std::log(static_cast<double>(n_obs));
}

double bic(const BookModelFit& fit) { return bic(fit.loglik, fit.n_params, fit.n_obs); }

Matrix book_log_rates(const BookModelFit& fit, const RateSurface& ref_rates) {
    return book_rates(fit, [&] {
        RateSurface r;
        r.ages = fit.ages;
        r.years = fit.years;
        r.values = window(ref_rates, fit.ages, fit.years);
        return r;
    }(), fit.period_indices()).values.array().log();
}

BookModelFit fit_book(BookFamily family, const LCParams& ref_fit, const RateSurface& ref_rates,
                      const MortalityPanel& book_panel, const BookFitOptions& options) {
    validate(book_panel);
    const IntRange ages = book_panel.ages;
    const IntRange years = book_panel.years;
    const Matrix ref_m = window(ref_rates, ages, years);
    require((ref_m.array() > 0).all(), ErrorKind::ZeroRateCell, "reference fitted rates must be positive");
    const BookModelFit* init = options.init && options.init->family == family && options.init->ages == ages &&
                                       options.init->years == years
                                   ? options.init
                                   : nullptr;

    BookModelFit fit;
    fit.family = family;
    fit.ages = ages;
    fit.years = years;
    fit.n_obs = ages.size() * years.size();
    const int X = ages.size();
    const int T = years.size();

    if (family == BookFamily::CBD) {
        Matrix logit_ref = ref_m.unaryExpr([](double m) { return logit_q_of_m(m); });
        fit.xbar = 0.5 * (ages.first + ages.last);
        Vector z(X);
        for (int i = 0; i < X; ++i)
            z(i) = ages.value(i) - fit.xbar;
        auto res = fit_cbd(book_panel.deaths, book_panel.exposures, logit_ref, z, options.convergence, init);
        fit.kappa1_B = std::move(res.kappa1);
        fit.kappa2_B = std::move(res.kappa2);
        fit.iterations = res.iterations;
        fit.converged = res.converged;
        fit.n_params = 2 * T;
    } else {
        const Matrix offset = ref_m.array().log();
        PoissonTermSpec spec;
        spec.offset = &offset;
        spec.convergence = options.convergence;
        PoissonTermState start;
        start.a = Vector::Zero(X);
        start.k = Vector::Zero(T);
        const Vector b_R = age_slice(ref_fit, ages);
        if (family == BookFamily::APC) {
            fit.cohorts = make_cohort_grouping(ages, years, 3);
            spec.cohorts = &fit.cohorts;
            spec.b_mode = SensitivityMode::Unit;
        } else if (family == BookFamily::CAE) {
            spec.b_mode = SensitivityMode::Fixed;
        }
        start.b = family == BookFamily::APC ? Vector::Ones(X) : b_R;
        if (init) {
            start.a = init->a_B;
            start.k = init->k_B;
            if (family == BookFamily::RelLC)
                start.b = init->b_B;
            if (family == BookFamily::APC)
                start.gamma = init->gamma_B;
        }
        auto res = fit_poisson_terms(book_panel.deaths, book_panel.exposures, spec, std::move(start));
        fit.iterations = res.iterations;
        fit.converged = res.converged;
        auto& s = res.state;
        switch (family) {
        case BookFamily::RelLC: {
            auto lc = apply_constraints(ages, years, s.a, s.b, s.k);
            fit.a_B = std::move(lc.a);
            fit.b_B = std::move(lc.b);
            fit.k_B = std::move(lc.k);
            fit.n_params = 2 * X + T - 2;
            break;
        }
        case BookFamily::CAE: {
            const double mk = s.k.mean();
            fit.a_B = s.a + b_R * mk;
            fit.k_B = s.k.array() - mk;
            fit.b_R = b_R;
            fit.n_params = X + T - 1;
            break;
        }
        case BookFamily::APC: {
            const double mk = s.k.mean();
            fit.a_B = s.a.array() + mk;
            fit.k_B = s.k.array() - mk;
            fit.gamma_B = s.gamma;
            fit.n_params = X + T + fit.cohorts.n_groups() - 3;
            break;
        }
        case BookFamily::CBD: break;
        }
    }
    if (!fit.converged && options.strict)
        throw Error(ErrorKind::NonConvergence,
                    std::string("book model ") + std::string(to_string(family)) + " did not converge");
    RateSurface ref_window{ages, years, ref_m, RateKind::CentralRate};
    fit.loglik = poisson_loglik(book_panel.deaths, book_panel.exposures, book_log_rates(fit, ref_window));
    fit.bic = bic(fit);
    return fit;
}

const BookModelFit& select_model(std::span<const BookModelFit> fits) {
    require(!fits.empty(), ErrorKind::EmptyList, "no book model fits to select from");
    const BookModelFit* best = &fits[0];
    for (const auto& f : fits.subspan(1)) {
        if (f.bic < best->bic ||
            (f.bic == best->bic && (f.n_params < best->n_params ||
                                    (f.n_params == best->n_params && f.family < best->family))))
            best = &f;
    }
    return *best;
}

double AR1Params::long_run_mean() const {
    require(stationary, ErrorKind::DomainError, "long-run mean needs |psi1| < 1");
    return psi0 / (1.0 - psi1);
}

AR1Params fit_ar1(std::span<const double> series) {
    const std::size_t n = series.size();
    require(n >= 4, ErrorKind::DegenerateSeries, "AR(1) needs at least 4 observations");
    const std::size_t m = n - 1;
    double xbar = 0, ybar = 0;
    for (std::size_t t = 1; t < n; ++t) {
        xbar += series[t - 1];
        ybar += series[t];
    }
    xbar /= static_cast<double>(m);
    ybar /= static_cast<double>(m);
    double sxx = 0, sxy = 0, scale = 0;
    for (std::size_t t = 1; t < n; ++t) {
        sxx += (series[t - 1] - xbar) * (series[t - 1] - xbar);
        sxy += (series[t - 1] - xbar) * (series[t] - ybar);
        scale = std::max(scale, std::abs(series[t - 1]));
    }
    require(sxx > 1e-24 * std::max(1.0, scale * scale) * static_cast<double>(m), ErrorKind::DegenerateSeries,
            "AR(1) regressor is constant");
    AR1Params p;
    p.psi1 = sxy / sxx;
    p.psi0 = ybar - p.psi1 * xbar;
    double rss = 0;
    for (std::size_t t = 1; t < n; ++t) {
        const double e = series[t] - p.psi0 - p.psi1 * series[t - 1];
        rss += e * e;
    }
    p.innovation_sd = std::sqrt(rss / static_cast<double>(m - 2));
    p.stationary = std::abs(p.psi1) < 1.0;
    return p;
}

std::vector<double> project_book_k(const AR1Params& p, double k_last, int horizon, Engine& rng) {
    require(horizon >= 1, ErrorKind::DomainError, "horizon must be at least 1");
    std::normal_distribution<double> z;
    std::vector<double> out(static_cast<std::size_t>(horizon));
    double k = k_last;
    for (auto& v : out) {
        const double xi = z(rng);
        k = p.psi0 + p.psi1 * k + p.innovation_sd * xi;
        v = k;
    }
    return out;
}

RateSurface book_rates(const BookModelFit& fit, const RateSurface& ref_rates, const Matrix& period_paths) {
    const IntRange ages = fit.ages;
    const IntRange years = ref_rates.years;
    require(ref_rates.ages.contains(ages), ErrorKind::DomainError, "reference rates do not cover the book ages");
    require(period_paths.rows() == fit.n_period_indices() && period_paths.cols() == years.size(),
            ErrorKind::DomainError, "period paths do not match the projection years");
    RateSurface out;
    out.ages = ages;
    out.years = years;
    out.kind = RateKind::CentralRate;
    out.values.resize(ages.size(), years.size());
    for (int j = 0; j < years.size(); ++j) {
        for (int i = 0; i < ages.size(); ++i) {
            const double m_ref = ref_rates.values(ref_rates.ages.index(ages.value(i)), j);
            double v = 0;
            switch (fit.family) {
            case BookFamily::RelLC:
                v = std::log(m_ref) + fit.a_B(i) + fit.b_B(i) * period_paths(0, j);
                break;
            case BookFamily::CAE:
                v = std::log(m_ref) + fit.a_B(i) + fit.b_R(i) * period_paths(0, j);
                break;
            case BookFamily::APC: {
                const int g = fit.cohorts.group_for_cohort(years.value(j) - ages.value(i));
                v = std::log(m_ref) + fit.a_B(i) + period_paths(0, j) + (g >= 0 ? fit.gamma_B(g) : 0.0);
                break;
            }
            case BookFamily::CBD: {
                const double eta = logit_q_of_m(m_ref) + period_paths(0, j) +
                                   (ages.value(i) - fit.xbar) * period_paths(1, j);
                v = std::log(softplus(eta));
                break;
            }
            }
            out.values(i, j) = std::exp(v);
        }
    }
    return out;
}

ParamTable to_param_table(const BookModelFit& fit) {
    ParamTable t;
    t.meta["model"] = "book";
    t.meta["family"] = std::string(to_string(fit.family));
    auto add = [&](const char* name, IntRange r, const Vector& v) {
        if (v.size() == r.size() && v.size() > 0)
            t.add_vector(name, r, v);
    };
    add("a_B", fit.ages, fit.a_B);
    add("b_B", fit.ages, fit.b_B);
    add("b_R", fit.ages, fit.b_R);
    add("k_B", fit.years, fit.k_B);
    add("kappa1_B", fit.years, fit.kappa1_B);
    add("kappa2_B", fit.years, fit.kappa2_B);
    if (fit.gamma_B.size() > 0)
        t.add_vector("gamma_B", {0, static_cast<int>(fit.gamma_B.size()) - 1}, fit.gamma_B);
    if (fit.family == BookFamily::CBD)
        t.add_scalar("xbar", fit.xbar);
    t.add_scalar("loglik", fit.loglik);
    t.add_scalar("n_params", fit.n_params);
    t.add_scalar("n_obs", fit.n_obs);
    t.add_scalar("bic", fit.bic);
    return t;
}

} // namespace longbasis
