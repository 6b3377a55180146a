#include <doctest.h>

#include "longbasis/book_models.hpp"
#include "longbasis/error.hpp"
#include "longbasis/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace longbasis;

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SyntheticWorldSpec noiseless_spec(std::uint64_t seed) {
    SyntheticWorldSpec s;
    s.poisson_noise = false;
    s.seed = seed;
    return s;
}

// Book panel whose deaths equal exposure times the given surface.
MortalityPanel exact_book(const MortalityPanel& like, const Matrix& m) {
    MortalityPanel p = like;
    p.deaths = p.exposures.cwiseProduct(m);
    return p;
}

Matrix ref_window(const SyntheticWorld& w) {
    return w.ref_rates.values.block(0, w.reference.years.index(w.book.years.first), w.book.ages.size(),
                                    w.book.years.size());
}

} // namespace

TEST_CASE("bic formula") {
    CHECK(bic(0.0, 0, 10) == 0.0);
    CHECK(bic(-100.0, 3, 50) == doctest::Approx(200.0 + 3 * std::log(50.0)).epsilon(1e-15));
    const int n = 7;
    CHECK(bic(-12.5, 2 * n, 1) - bic(-12.5, n, 1) == 0.0);
    const double e = std::exp(1.0);
    // N = e in the real-valued form: each parameter adds exactly 1.
    CHECK(-2 * -12.5 + 2 * n * std::log(e) - (-2 * -12.5 + n * std::log(e)) == doctest::Approx(n));
}

TEST_CASE("select_model picks the lowest bic with documented tie breaks") {
    std::vector<BookModelFit> fits(3);
    fits[0].family = BookFamily::RelLC;
    fits[0].bic = 10;
    fits[0].n_params = 5;
    fits[1].family = BookFamily::CAE;
    fits[1].bic = 9;
    fits[1].n_params = 7;
    fits[2].family = BookFamily::APC;
    fits[2].bic = 11;
    CHECK(select_model(fits).family == BookFamily::CAE);

    fits[1].bic = 10;
    CHECK(select_model(fits).family == BookFamily::RelLC);
    fits[1].n_params = 5;
    CHECK(select_model(fits).family == BookFamily::RelLC);
    fits[0].family = BookFamily::CBD;
    CHECK(select_model(fits).family == BookFamily::CAE);

    try {
        select_model(std::span<const BookModelFit>{});
        FAIL("expected EmptyList");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyList);
    }
}

TEST_CASE("zero-difference book gives zero CAE parameters") {
    const auto w = make_synthetic_world(noiseless_spec(3));
    const auto book = exact_book(w.book, ref_window(w));
    const auto fit = fit_book(BookFamily::CAE, w.ref_truth, w.ref_rates, book);
    CHECK(fit.a_B.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.k_B.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(fit.loglik == doctest::Approx(poisson_loglik(book.deaths, book.exposures, ref_window(w).array().log()))
                            .epsilon(1e-12));
}

TEST_CASE("every family beats the zero-difference point and honours its constraints") {
    SyntheticWorldSpec spec;
    spec.seed = 11;
    const auto w = make_synthetic_world(spec);
    const auto ref = fit_lc(w.reference);
    const RateSurface fitted{w.reference.ages, w.reference.years, ref.params.log_rates().array().exp(),
                             RateKind::CentralRate};
    const double base = poisson_loglik(
        w.book.deaths, w.book.exposures,
        fitted.values.block(0, 0, w.book.ages.size(), w.book.years.size()).array().log());
    for (BookFamily f : kAllBookFamilies) {
        CAPTURE(to_string(f));
        const auto fit = fit_book(f, ref.params, fitted, w.book);
        CHECK(fit.converged);
        CHECK(fit.loglik >= base);
        CHECK(fit.bic == doctest::Approx(bic(fit.loglik, fit.n_params, fit.n_obs)).epsilon(1e-15));
        CHECK(fit.n_obs == 30 * 45);
        switch (f) {
        case BookFamily::RelLC:
            CHECK(std::abs(fit.b_B.sum() - 1) <= 1e-8);
            CHECK(std::abs(fit.k_B.sum()) <= 1e-8);
            CHECK(fit.n_params == 2 * 30 + 45 - 2);
            CHECK(fit.gamma_B.size() == 0);
            break;
        case BookFamily::CAE:
            CHECK(std::abs(fit.k_B.sum()) <= 1e-8);
            CHECK(fit.b_B.size() == 0);
            CHECK(fit.n_params == 30 + 45 - 1);
            break;
        case BookFamily::APC: {
            CHECK(std::abs(fit.k_B.sum()) <= 1e-8);
            CHECK(std::abs(fit.gamma_B.sum()) <= 1e-8);
            const Vector c = fit.cohorts.group_year.array() - fit.cohorts.group_year.mean();
            CHECK(std::abs(c.dot(fit.gamma_B)) <= 1e-8);
            CHECK(fit.n_params == 30 + 45 + fit.cohorts.n_groups() - 3);
            break;
        }
        case BookFamily::CBD:
            CHECK(fit.kappa1_B.size() == 45);
            CHECK(fit.a_B.size() == 0);
            CHECK(fit.n_params == 2 * 45);
            break;
        }
    }
}

TEST_CASE("noiseless surfaces are reproduced by book_rates after fitting") {
    const auto w = make_synthetic_world(noiseless_spec(5));
    const Matrix ref_m = ref_window(w);
    const RateSurface ref_surface{w.book.ages, w.book.years, ref_m, RateKind::CentralRate};
    const int X = w.book.ages.size();
    const int T = w.book.years.size();

    SUBCASE("CAE and RelLC") {
        for (BookFamily f : {BookFamily::CAE, BookFamily::RelLC}) {
            BookFitOptions o;
            // the alternating b/k updates need a tighter stop to reach 1e-6
            o.convergence.rel_tol = 1e-14;
            const auto fit = fit_book(f, w.ref_truth, w.ref_rates, w.book, o);
            const auto m = book_rates(fit, ref_surface, fit.period_indices());
            CHECK((m.values.array().log() - w.book_rates.values.array().log()).abs().maxCoeff() <= 1e-6);
        }
    }
    SUBCASE("APC") {
        const auto groups = make_cohort_grouping(w.book.ages, w.book.years, 3);
        Vector gamma(groups.n_groups());
        for (int g = 0; g < groups.n_groups(); ++g)
            gamma(g) = 0.05 * std::sin(0.3 * g) + 0.001 * g * g;
        // keep the truth inside the constrained parameter space
        const Vector c = groups.group_year.array() - groups.group_year.mean();
        gamma.array() -= gamma.mean();
        gamma -= c * (c.dot(gamma) / c.squaredNorm());
        Matrix log_m = ref_m.array().log();
        for (int j = 0; j < T; ++j)
            for (int i = 0; i < X; ++i)
                log_m(i, j) += -0.3 + 0.004 * i - 0.01 * j + 0.03 * std::cos(j) + gamma(groups.group(i, j));
        const Matrix m_true = log_m.array().exp();
        BookFitOptions o;
        o.convergence.rel_tol = 1e-14;
        const auto fit = fit_book(BookFamily::APC, w.ref_truth, w.ref_rates, exact_book(w.book, m_true), o);
        INFO(fit.iterations);
        const auto m = book_rates(fit, ref_surface, fit.period_indices());
        CHECK((m.values.array().log() - log_m.array()).abs().maxCoeff() <= 1e-6);
    }
    SUBCASE("CBD in q space") {
        Matrix q_true(X, T);
        const double xbar = 0.5 * (w.book.ages.first + w.book.ages.last);
        for (int j = 0; j < T; ++j)
            for (int i = 0; i < X; ++i) {
                const double qr = 1 - std::exp(-ref_m(i, j));
                const double eta = std::log(qr / (1 - qr)) - 0.4 + 0.01 * j +
                                   (w.book.ages.value(i) - xbar) * (0.01 - 0.0002 * j);
                q_true(i, j) = 1 / (1 + std::exp(-eta));
            }
        const Matrix m_true = q_true.unaryExpr([](double q) { return -std::log1p(-q); });
        const auto fit = fit_book(BookFamily::CBD, w.ref_truth, w.ref_rates, exact_book(w.book, m_true));
        CHECK(fit.xbar == xbar);
        const auto q = q_from_m(book_rates(fit, ref_surface, fit.period_indices()));
        CHECK((q.values - q_true).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("synthetic CAE recovery at large exposure") {
    std::vector<std::vector<double>> a_err(30), k_err(45);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SyntheticWorldSpec spec;
        spec.seed = seed;
        spec.book_exposure = 1e6;
        spec.book_exposure_decay = 0;
        const auto w = make_synthetic_world(spec);
        const auto fit = fit_book(BookFamily::CAE, w.ref_truth, w.ref_rates, w.book);
        // truth in the fitted gauge, sum k = 0
        const double mk = w.k_B.mean();
        const Vector a_true = w.a_B + w.ref_truth.b * mk;
        const Vector k_true = w.k_B.array() - mk;
        for (int i = 0; i < 30; ++i)
            a_err[i].push_back(std::abs(fit.a_B(i) - a_true(i)));
        for (int j = 0; j < 45; ++j)
            k_err[j].push_back(std::abs(fit.k_B(j) - k_true(j)));
    }
    double worst_a = 0, worst_k = 0;
    for (const auto& e : a_err)
        worst_a = std::max(worst_a, median(e));
    for (const auto& e : k_err)
        worst_k = std::max(worst_k, median(e));
    INFO("worst elementwise median error: a " << worst_a << ", k " << worst_k);
    CHECK(worst_a <= 0.01);
    CHECK(worst_k <= 0.05);
}

TEST_CASE("CAE wins the bic comparison on CAE-generated books") {
    int noiseless_wins = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto w = make_synthetic_world(noiseless_spec(seed));
        std::vector<BookModelFit> fits;
        for (BookFamily f : kAllBookFamilies)
            fits.push_back(fit_book(f, w.ref_truth, w.ref_rates, w.book));
        noiseless_wins += select_model(fits).family == BookFamily::CAE;
    }
    CHECK(noiseless_wins == 20);

    SyntheticWorldSpec spec;
    spec.seed = 2;
    const auto w = make_synthetic_world(spec);
    const auto ref = fit_lc(w.reference);
    const RateSurface fitted{w.reference.ages, w.reference.years, ref.params.log_rates().array().exp(),
                             RateKind::CentralRate};
    std::vector<BookModelFit> fits;
    for (BookFamily f : kAllBookFamilies)
        fits.push_back(fit_book(f, ref.params, fitted, w.book));
    CHECK(select_model(fits).family == BookFamily::CAE);
}

TEST_CASE("warm start from the optimum stays put") {
    const auto w = make_synthetic_world(SyntheticWorldSpec{});
    for (BookFamily f : kAllBookFamilies) {
        const auto fit = fit_book(f, w.ref_truth, w.ref_rates, w.book);
        BookFitOptions o;
        o.init = &fit;
        const auto again = fit_book(f, w.ref_truth, w.ref_rates, w.book, o);
        CHECK(again.loglik >= fit.loglik - 1e-6 * std::abs(fit.loglik));
        CHECK(again.iterations <= 3);
    }
}

TEST_CASE("book_rates") {
    const auto w = make_synthetic_world(noiseless_spec(1));
    const auto fit = fit_book(BookFamily::CAE, w.ref_truth, w.ref_rates, w.book);
    RateSurface future{w.ref_rates.ages, {2017, 2019}, Matrix::Constant(30, 3, 0.02), RateKind::CentralRate};
    future.values(5, 1) = 0.015;
    Matrix path(1, 3);
    path << 0.3, -1.2, 2.0;
    const auto m = book_rates(fit, future, path);
    CHECK(m.values(5, 1) == doctest::Approx(std::exp(std::log(0.015) + fit.a_B(5) + fit.b_R(5) * -1.2)).epsilon(1e-14));

    BookModelFit zero = fit;
    zero.a_B.setZero();
    const auto same = book_rates(zero, future, Matrix::Zero(1, 3));
    CHECK((same.values - future.values).cwiseAbs().maxCoeff() <= 1e-15);

    // independent recomputation over a 3x3 corner
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(m.values(i, j) == doctest::Approx(future.values(i, j) *
                                                    std::exp(fit.a_B(i) + fit.b_R(i) * path(0, j)))
                                        .epsilon(1e-13));
    CHECK_THROWS_AS(book_rates(fit, future, Matrix::Zero(1, 2)), Error);
}

TEST_CASE("AR(1) fitting") {
    SUBCASE("simulation recovery") {
        Engine rng(42);
        std::normal_distribution<double> z;
        std::vector<double> x{0.0};
        for (int t = 1; t < 1000; ++t)
            x.push_back(0.5 * x.back() + 0.1 * z(rng));
        const auto p = fit_ar1(x);
        CHECK(std::abs(p.psi0) <= 0.05);
        CHECK(std::abs(p.psi1 - 0.5) <= 0.05);
        CHECK(std::abs(p.innovation_sd - 0.1) <= 0.05);
        CHECK(p.stationary);
    }
    SUBCASE("exact recursion") {
        std::vector<double> x{2.0};
        for (int t = 1; t < 30; ++t)
            x.push_back(0.3 + 0.8 * x.back());
        const auto p = fit_ar1(x);
        CHECK(std::abs(p.psi0 - 0.3) <= 1e-10);
        CHECK(std::abs(p.psi1 - 0.8) <= 1e-10);
        CHECK(p.long_run_mean() == doctest::Approx(1.5));
    }
    SUBCASE("constant and short series") {
        const std::vector<double> c(10, 1.7);
        CHECK_THROWS_AS(fit_ar1(c), Error);
        try {
            fit_ar1(c);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateSeries);
        }
        const std::vector<double> s{1, 2, 3};
        CHECK_THROWS_AS(fit_ar1(s), Error);
    }
}

TEST_CASE("AR(1) projection") {
    const AR1Params det{0.2, 0.5, 0.0, true};
    Engine rng(1);
    const auto path = project_book_k(det, 1.0, 3, rng);
    CHECK(path[0] == doctest::Approx(0.7));
    CHECK(path[1] == doctest::Approx(0.55));
    CHECK(path[2] == doctest::Approx(0.475));

    const AR1Params p{0.3, 0.7, 0.5, true};
    Engine a(9), b(9);
    CHECK(project_book_k(p, 0.0, 20, a) == project_book_k(p, 0.0, 20, b));

    const int n = 100000;
    double sum = 0, sum2 = 0;
    Engine r(123);
    for (int s = 0; s < n; ++s) {
        const double v = project_book_k(p, 0.0, 200, r).back();
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean - p.long_run_mean()) <= 3 * se);
}
