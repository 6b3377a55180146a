#include "longbasis/jump_diffusion.hpp"

#include "longbasis/error.hpp"
#include "longbasis/log.hpp"
#include "longbasis/optimize.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numeric>

namespace longbasis {

std::string_view to_string(JumpPersistence p) { return p == JumpPersistence::Permanent ? "permanent" : "one_year"; }

JumpPersistence parse_jump_persistence(std::string_view text) {
    if (text == "permanent")
        return JumpPersistence::Permanent;
    if (text == "one_year")
        return JumpPersistence::OneYear;
    throw Error(ErrorKind::ConfigError, "unknown jump persistence '" + std::string(text) + "'");
}

namespace {

std::vector<double> increments_of(std::span<const double> k) {
    std::vector<double> r;
    r.reserve(k.size() > 0 ? k.size() - 1 : 0);
    for (std::size_t i = 1; i < k.size(); ++i)
        r.push_back(k[i] - k[i - 1]);
    return r;
}

std::array<double, 5> to_theta(const JumpDiffusionParams& p) {
    return {p.mu, std::log(p.sigma), std::log(p.eta), std::log(p.alpha), std::log(p.beta)};
}

JumpDiffusionParams from_theta(std::span<const double> th, double k0) {
    return {th[0], std::exp(th[1]), std::exp(th[2]), std::exp(th[3]), std::exp(th[4]), k0};
}

// Rate parameter giving P(N(1) >= 1) = freq with exponential inter-arrivals.
double exponential_rate_for(double freq) { return -std::log1p(-freq); }

} // namespace

std::vector<JumpDiffusionParams> calibration_start_grid(std::span<const double> increments, RenewalFamily family,
                                                        int starts) {
    const double n = static_cast<double>(increments.size());
    const double mean = std::accumulate(increments.begin(), increments.end(), 0.0) / n;
    double var = 0;
    for (double r : increments)
        var += (r - mean) * (r - mean);
    const double sd = std::max(std::sqrt(var / std::max(n - 1, 1.0)), 1e-6);

    // 2 x 2 x 2 primary grid (sigma share, jump frequency, mean jump size in
    // units of sd), then rarer-jump starts when more than eight are requested.
    auto make = [&](double sigma_share, double freq, double jump_scale) {
        JumpDiffusionParams p;
        p.sigma = sigma_share * sd;
        p.eta = 1.0 / (jump_scale * sd);
        const double rate = exponential_rate_for(freq);
        p.alpha = 1.0;
        p.beta = family == RenewalFamily::Gamma ? rate : 1.0 / rate;
        p.mu = mean + 0.5 * p.sigma * p.sigma - rate / p.eta;
        return p;
    };
    std::vector<JumpDiffusionParams> grid;
    for (double js : {1.0, 2.0})
        for (double f : {0.1, 0.4})
            for (double ss : {0.8, 0.5})
                grid.push_back(make(ss, f, js));
    for (double js : {1.0, 3.0})
        for (double f : {0.02, 0.7})
            for (double ss : {0.95, 0.3})
                grid.push_back(make(ss, f, js));
    grid.resize(static_cast<std::size_t>(std::clamp(starts, 1, static_cast<int>(grid.size()))));
    return grid;
}

JumpCalibration calibrate(std::span<const double> k_series, const CalibrationOptions& options) {
    if (k_series.size() < 6)
        throw Error(ErrorKind::DegenerateFit, "need at least 5 increments, got " +
                                                  std::to_string(k_series.size() > 0 ? k_series.size() - 1 : 0));
    const std::vector<double> r = increments_of(k_series);
    const double k0 = k_series.back();

    Objective negloglik = [&](std::span<const double> th) {
        for (double v : th)
            if (!std::isfinite(v) || std::abs(v) > 50)
                return std::numeric_limits<double>::infinity();
        try {
            const auto p = from_theta(th, k0);
            return -jump_loglik(r, p, p.law(options.family), options.counts, options.density);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<JumpDiffusionParams> starts;
    if (options.init)
        starts.push_back(*options.init);
    else
        starts = calibration_start_grid(r, options.family, options.starts);

    JumpCalibration out;
    out.family = options.family;
    MinimizeResult best;
    best.value = std::numeric_limits<double>::infinity();
    const double sd_step = options.start_step;
    for (const auto& s : starts) {
        const auto th0 = to_theta(s);
        const double mu_step = std::max(options.start_step * s.sigma, 1e-3);
        auto res = nelder_mead(negloglik, {th0.begin(), th0.end()}, {mu_step, sd_step, sd_step, sd_step, sd_step},
                               options.max_iterations, options.simplex_tol);
        out.evaluations += res.evaluations;
        ++out.starts_run;
        if (res.value < best.value)
            best = std::move(res);
    }
    out.converged = best.converged;
    if (options.polish && std::isfinite(best.value)) {
        auto refined = bfgs_numeric(negloglik, best.x, 200, 1e-6, 1e-6);
        out.evaluations += refined.evaluations;
        if (refined.value < best.value) {
            refined.converged = refined.converged || best.converged;
            best = std::move(refined);
        }
    }
    if (!std::isfinite(best.value) || best.value >= 1e99)
        throw Error(ErrorKind::NonConvergence, "no start produced a finite likelihood");
    out.params = from_theta(best.x, k0);
    out.loglik = -best.value;

    if (options.check_identification) {
        const Matrix H = numeric_hessian(negloglik, best.x, 1e-3);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
        if (eig.info() == Eigen::Success) {
            const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
            for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
                const double lambda = eig.eigenvalues()(i);
                const double jump_weight = eig.eigenvectors().col(i).tail(3).squaredNorm();
                if (lambda <= 1e-5 * top && jump_weight >= 0.5)
                    out.weak_identification = true;
            }
        }
    }
    if (!out.converged && options.warn_on_limit)
        log::warn("jump calibration stopped at the iteration limit");
    return out;
}

std::vector<double> simulate_k(const JumpDiffusionParams& p, const RenewalLaw& law, int horizon, Engine& rng,
                               JumpPersistence persistence) {
    require(horizon >= 1, ErrorKind::DomainError, "horizon must be at least one year");
    require(p.sigma >= 0 && p.eta > 0, ErrorKind::DomainError, "sigma must be >= 0 and eta > 0");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> severity(p.eta);

    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(horizon));
    double diffusion = 0;
    double accumulated = 0;
    double next_arrival = law.sample(rng);
    const double drift = p.mu - 0.5 * p.sigma * p.sigma;
    for (int year = 1; year <= horizon; ++year) {
        diffusion += drift + p.sigma * normal(rng);
        double this_year = 0;
        int arrivals = 0;
        while (next_arrival <= year) {
            this_year += severity(rng);
            next_arrival += law.sample(rng);
            if (++arrivals > 1'000'000)
                throw Error(ErrorKind::DomainError, "renewal law produces unbounded arrivals per year");
        }
        accumulated += this_year;
        const double jumps = persistence == JumpPersistence::Permanent ? accumulated : this_year;
        path.push_back(p.k0 + diffusion + jumps);
    }
    return path;
}

RateSurface project_rates(const LCParams& lc, std::span<const double> k_path, IntRange years) {
    require(static_cast<int>(k_path.size()) == years.size(), ErrorKind::DomainError,
            "k path length does not match the projection years");
    RateSurface out{lc.ages, years, Matrix(lc.a.size(), years.size()), RateKind::CentralRate};
    for (int j = 0; j < years.size(); ++j)
        out.values.col(j) = (lc.a + lc.b * k_path[static_cast<std::size_t>(j)]).array().exp();
    return out;
}

} // namespace longbasis
