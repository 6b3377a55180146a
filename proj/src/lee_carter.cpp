#include "longbasis/lee_carter.hpp"

#include "longbasis/error.hpp"

#include <cmath>

namespace longbasis {

Matrix LCParams::log_rates() const {
    Matrix out = b * k.transpose();
    out.colwise() += a;
    return out;
}

LCParams apply_constraints(IntRange ages, IntRange years, Vector a, Vector b, Vector k) {
    const double sum_b = b.sum();
    if (!(std::abs(sum_b) > 1e-12 * b.cwiseAbs().sum()))
        throw Error(ErrorKind::DegenerateB, "sum of b_x is zero");
    const double mean_k = k.mean();
    a += b * mean_k;
    k = (k.array() - mean_k) * sum_b;
    b /= sum_b;
    return {ages, years, std::move(a), std::move(b), std::move(k)};
}

double poisson_loglik(const Matrix& deaths, const Matrix& exposures, const Matrix& log_rates) {
    double ll = 0;
    for (Eigen::Index j = 0; j < deaths.cols(); ++j) {
        for (Eigen::Index i = 0; i < deaths.rows(); ++i) {
            const double d = deaths(i, j);
            const double e = exposures(i, j);
            const double eta = log_rates(i, j);
            ll += d * (std::log(e) + eta) - e * std::exp(eta) - std::lgamma(d + 1.0);
        }
    }
    return ll;
}

double poisson_deviance(const Matrix& deaths, const Matrix& exposures, const Matrix& log_rates) {
    double dev = 0;
    for (Eigen::Index j = 0; j < deaths.cols(); ++j) {
        for (Eigen::Index i = 0; i < deaths.rows(); ++i) {
            const double d = deaths(i, j);
            const double fitted = exposures(i, j) * std::exp(log_rates(i, j));
            dev += (d > 0 ? d * std::log(d / fitted) : 0.0) - (d - fitted);
        }
    }
    return 2 * dev;
}

int CohortGrouping::group_for_cohort(int cohort) const {
    const int idx = cohort - first_cohort;
    if (idx < 0 || idx >= static_cast<int>(group_of_cohort.size()))
        return -1;
    return group_of_cohort[static_cast<std::size_t>(idx)];
}

CohortGrouping make_cohort_grouping(IntRange ages, IntRange years, int min_cells) {
    CohortGrouping g;
    g.ages = ages;
    g.years = years;
    g.first_cohort = years.first - ages.last;
    const int n_cohorts = years.last - ages.first - g.first_cohort + 1;
    std::vector<int> cells(static_cast<std::size_t>(n_cohorts), 0);
    for (int x = ages.first; x <= ages.last; ++x)
        for (int t = years.first; t <= years.last; ++t)
            ++cells[static_cast<std::size_t>(t - x - g.first_cohort)];

    g.group_of_cohort.assign(static_cast<std::size_t>(n_cohorts), 0);
    std::vector<std::vector<int>> members;
    int open_cells = 0;
    for (int c = 0; c < n_cohorts; ++c) {
        if (members.empty() || open_cells >= min_cells) {
            members.emplace_back();
            open_cells = 0;
        }
        members.back().push_back(c);
        open_cells += cells[static_cast<std::size_t>(c)];
    }
    if (members.size() > 1 && open_cells < min_cells) {
        auto tail = members.back();
        members.pop_back();
        members.back().insert(members.back().end(), tail.begin(), tail.end());
    }
    g.group_year.resize(static_cast<Eigen::Index>(members.size()));
    for (std::size_t gi = 0; gi < members.size(); ++gi) {
        double sum = 0;
        for (int c : members[gi]) {
            g.group_of_cohort[static_cast<std::size_t>(c)] = static_cast<int>(gi);
            sum += c + g.first_cohort;
        }
        g.group_year(static_cast<Eigen::Index>(gi)) = sum / static_cast<double>(members[gi].size());
    }
    return g;
}

Matrix linear_predictor(const PoissonTermState& s, const PoissonTermSpec& spec, Eigen::Index rows,
                        Eigen::Index cols) {
    Matrix eta = spec.offset ? *spec.offset : Matrix::Zero(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            double v = s.a(i) + s.b(i) * s.k(j);
            if (spec.cohorts)
                v += s.gamma(spec.cohorts->group(static_cast<int>(i), static_cast<int>(j)));
            eta(i, j) += v;
        }
    }
    return eta;
}

namespace {

// Orthogonal projection onto sum(gamma) = 0 and sum(c gamma) = 0.
void project_cohort_constraints(const CohortGrouping& groups, Vector& gamma) {
    const Vector c = groups.group_year.array() - groups.group_year.mean();
    gamma.array() -= gamma.mean();
    if (c.squaredNorm() > 0)
        gamma -= c * (c.dot(gamma) / c.squaredNorm());
}

class TermFitter {
public:
    TermFitter(const Matrix& deaths, const Matrix& exposures, const PoissonTermSpec& spec)
        : d_(deaths), e_(exposures), spec_(spec), rows_(deaths.rows()), cols_(deaths.cols()) {
        for (Eigen::Index j = 0; j < cols_; ++j)
            for (Eigen::Index i = 0; i < rows_; ++i)
                constant_ += d_(i, j) * std::log(e_(i, j)) - std::lgamma(d_(i, j) + 1.0);
    }

    double loglik(const PoissonTermState& s) const {
        const Matrix eta = linear_predictor(s, spec_, rows_, cols_);
        return constant_ + (d_.array() * eta.array() - e_.array() * eta.array().exp()).sum();
    }

    Matrix fitted(const PoissonTermState& s) const {
        return e_.cwiseProduct(linear_predictor(s, spec_, rows_, cols_).array().exp().matrix());
    }

    // Applies a Newton direction to one block, halving until the likelihood
    // does not decrease.
    template <class Apply>
    double line_search(PoissonTermState& s, double ll, Apply apply) const {
        for (double step = 1.0; step > 1e-6; step *= 0.5) {
            PoissonTermState trial = s;
            apply(trial, step);
            const double trial_ll = loglik(trial);
            if (std::isfinite(trial_ll) && trial_ll >= ll) {
                s = std::move(trial);
                return trial_ll;
            }
        }
        return ll;
    }

    double update_a(PoissonTermState& s, double ll) const {
        const Matrix fit = fitted(s);
        const Vector delta = (d_ - fit).rowwise().sum().cwiseQuotient(fit.rowwise().sum());
        return line_search(s, ll, [&](PoissonTermState& t, double h) { t.a += h * delta; });
    }

    double update_k(PoissonTermState& s, double ll) const {
        const Matrix fit = fitted(s);
        Vector delta(cols_);
        for (Eigen::Index j = 0; j < cols_; ++j) {
            const double num = ((d_.col(j) - fit.col(j)).array() * s.b.array()).sum();
            const double den = (fit.col(j).array() * s.b.array().square()).sum();
            delta(j) = den > 0 ? num / den : 0.0;
        }
        return line_search(s, ll, [&](PoissonTermState& t, double h) { t.k += h * delta; });
    }

    double update_b(PoissonTermState& s, double ll) const {
        const Matrix fit = fitted(s);
        Vector delta(rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            const double num = ((d_.row(i) - fit.row(i)).array() * s.k.transpose().array()).sum();
            const double den = (fit.row(i).array() * s.k.transpose().array().square()).sum();
            delta(i) = den > 0 ? num / den : 0.0;
        }
        return line_search(s, ll, [&](PoissonTermState& t, double h) { t.b += h * delta; });
    }

    double update_gamma(PoissonTermState& s, double ll) const {
        const auto& groups = *spec_.cohorts;
        const Matrix fit = fitted(s);
        Vector num = Vector::Zero(groups.n_groups());
        Vector den = Vector::Zero(groups.n_groups());
        for (Eigen::Index j = 0; j < cols_; ++j) {
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const int g = groups.group(static_cast<int>(i), static_cast<int>(j));
                num(g) += d_(i, j) - fit(i, j);
                den(g) += fit(i, j);
            }
        }
        // Newton step restricted to sum(gamma) = 0 and sum(c gamma) = 0.
        const Vector h_inv = den.cwiseMax(1e-300).cwiseInverse();
        Matrix C(groups.n_groups(), 2);
        C.col(0).setOnes();
        C.col(1) = groups.group_year.array() - groups.group_year.mean();
        const Matrix HC = h_inv.asDiagonal() * C;
        const Eigen::Vector2d lambda = (C.transpose() * HC).ldlt().solve(HC.transpose() * num);
        const Vector delta = h_inv.cwiseProduct(num) - HC * lambda;
        return line_search(s, ll, [&](PoissonTermState& t, double h) { t.gamma += h * delta; });
    }

private:
    const Matrix& d_;
    const Matrix& e_;
    const PoissonTermSpec& spec_;
    Eigen::Index rows_;
    Eigen::Index cols_;
    double constant_ = 0;
};

} // namespace

PoissonTermResult fit_poisson_terms(const Matrix& deaths, const Matrix& exposures, const PoissonTermSpec& spec,
                                    PoissonTermState init) {
    const auto rows = deaths.rows();
    const auto cols = deaths.cols();
    if (spec.b_mode == SensitivityMode::Unit)
        init.b = Vector::Ones(rows);
    if (spec.cohorts && init.gamma.size() != spec.cohorts->n_groups())
        init.gamma = Vector::Zero(spec.cohorts->n_groups());
    if (spec.cohorts)
        project_cohort_constraints(*spec.cohorts, init.gamma);
    require(init.a.size() == rows && init.b.size() == rows && init.k.size() == cols, ErrorKind::DegenerateFit,
            "initial state does not match the panel shape");

    TermFitter fitter(deaths, exposures, spec);
    PoissonTermResult result;
    result.state = std::move(init);
    double ll = fitter.loglik(result.state);
    require(std::isfinite(ll), ErrorKind::DomainError, "non-finite initial log-likelihood");
    result.loglik_trace.push_back(ll);

    for (int it = 1; it <= spec.convergence.max_iter; ++it) {
        const double previous = ll;
        const PoissonTermState before = result.state;
        ll = fitter.update_a(result.state, ll);
        ll = fitter.update_k(result.state, ll);
        if (spec.b_mode == SensitivityMode::Free)
            ll = fitter.update_b(result.state, ll);
        if (spec.cohorts)
            ll = fitter.update_gamma(result.state, ll);
        // Pattern move along the sweep direction; block sweeps crawl along
        // the ridges between b, k and gamma.
        if (it > 1 && ll > previous) {
            const PoissonTermState base = result.state;
            for (double t = 1; t <= 64; t *= 2) {
                PoissonTermState cand = base;
                cand.a += t * (base.a - before.a);
                cand.b += t * (base.b - before.b);
                cand.k += t * (base.k - before.k);
                if (spec.cohorts)
                    cand.gamma += t * (base.gamma - before.gamma);
                const double cll = fitter.loglik(cand);
                if (!(cll > ll))
                    break;
                ll = cll;
                result.state = std::move(cand);
            }
        }
        result.loglik_trace.push_back(ll);
        result.iterations = it;
        if (std::abs(ll - previous) <= spec.convergence.rel_tol * std::abs(ll)) {
            result.converged = true;
            break;
        }
    }
    result.loglik = ll;
    return result;
}

namespace {

LCParams svd_fit(const MortalityPanel& panel) {
    const Matrix log_m = panel.deaths.cwiseQuotient(panel.exposures).array().log().matrix();
    const Vector a = log_m.rowwise().mean();
    Matrix centred = log_m;
    centred.colwise() -= a;
    Eigen::JacobiSVD<Matrix> svd(centred, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector b = svd.matrixU().col(0);
    Vector k = svd.singularValues()(0) * svd.matrixV().col(0);
    if (b.sum() == 0.0)
        throw Error(ErrorKind::DegenerateB, "leading singular vector sums to zero");
    return apply_constraints(panel.ages, panel.years, a, b, k);
}

} // namespace

LCFit fit_lc(const MortalityPanel& panel, const LCFitOptions& options) {
    validate(panel);
    if (panel.years.size() < 2)
        throw Error(ErrorKind::DegenerateFit, "a single year leaves b_x unidentified once sum(k) = 0");
    if (!options.init && (panel.deaths.array() <= 0).any())
        throw Error(ErrorKind::ZeroRateCell, "panel has cells with zero deaths; floor them before fitting");

    LCFit fit;
    if (options.method == LCMethod::SvdOnLogRates) {
        fit.params = svd_fit(panel);
        fit.diagnostics.iterations = 0;
        fit.diagnostics.converged = true;
    } else {
        const LCParams start = options.init ? *options.init : svd_fit(panel);
        PoissonTermSpec spec;
        spec.convergence = options.convergence;
        auto res = fit_poisson_terms(panel.deaths, panel.exposures, spec, {start.a, start.b, start.k, {}});
        if (!res.converged && options.strict)
            throw Error(ErrorKind::NonConvergence, "Lee-Carter Poisson fit did not converge in " +
                                                       std::to_string(options.convergence.max_iter) + " iterations");
        fit.params = apply_constraints(panel.ages, panel.years, res.state.a, res.state.b, res.state.k);
        fit.diagnostics.iterations = res.iterations;
        fit.diagnostics.converged = res.converged;
        fit.diagnostics.loglik_trace = std::move(res.loglik_trace);
    }
    const Matrix eta = fit.params.log_rates();
    fit.diagnostics.loglik = poisson_loglik(panel.deaths, panel.exposures, eta);
    fit.diagnostics.deviance = poisson_deviance(panel.deaths, panel.exposures, eta);
    return fit;
}

} // namespace longbasis
