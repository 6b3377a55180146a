#include <doctest.h>

#include "longbasis/error.hpp"
#include "longbasis/jump_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace longbasis;

namespace {

JumpDiffusionParams world() {
    JumpDiffusionParams p;
    p.mu = -0.5;
    p.sigma = 0.3;
    p.eta = 2.0;
    p.alpha = 1.5;
    p.beta = 2.0;
    return p;
}

std::vector<double> series(const JumpDiffusionParams& p, RenewalFamily family, int length, std::uint64_t seed) {
    auto rng = make_stream(seed, 0);
    auto path = simulate_k(p, p.law(family), length, rng, JumpPersistence::Permanent);
    path.insert(path.begin(), p.k0);
    return path;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

TEST_CASE("deterministic drift") {
    JumpDiffusionParams p;
    p.mu = -0.3;
    p.sigma = 0;
    p.k0 = 4;
    const RenewalLaw never{RenewalFamily::Weibull, 5.0, 1e9};
    Engine rng(1);
    const auto path = simulate_k(p, never, 12, rng);
    for (int t = 1; t <= 12; ++t)
        CHECK(path[static_cast<std::size_t>(t - 1)] == doctest::Approx(4 - 0.3 * t).epsilon(1e-14));
}

TEST_CASE("same seed, same path") {
    const auto p = world();
    auto a = make_stream(9, 3), b = make_stream(9, 3);
    CHECK(simulate_k(p, p.law(RenewalFamily::Weibull), 50, a) == simulate_k(p, p.law(RenewalFamily::Weibull), 50, b));
}

TEST_CASE("one-year increment moments") {
    const auto p = world();
    constexpr int paths = 1'000'000;
    SUBCASE("mean matches drift plus expected jump total") {
        for (auto family : {RenewalFamily::Weibull, RenewalFamily::Gamma}) {
            const auto law = p.law(family);
            Engine rng(11);
            double sum = 0, sum2 = 0;
            for (int i = 0; i < paths; ++i) {
                const double r = simulate_k(p, law, 1, rng)[0];
                sum += r;
                sum2 += r * r;
            }
            const double mean = sum / paths;
            const double se = std::sqrt((sum2 / paths - mean * mean) / paths);
            const double expected = p.mu - 0.5 * p.sigma * p.sigma + renewal_jump_probabilities(1.0, law).mean() / p.eta;
            INFO(to_string(family) << " mean " << mean << " expected " << expected << " se " << se);
            CHECK(std::abs(mean - expected) <= 3 * se);
        }
    }
    SUBCASE("jump-free variance is sigma^2") {
        const RenewalLaw never{RenewalFamily::Weibull, 5.0, 1e9};
        Engine rng(12);
        std::vector<double> r(paths);
        for (auto& v : r)
            v = simulate_k(p, never, 1, rng)[0];
        const double mean = std::accumulate(r.begin(), r.end(), 0.0) / paths;
        double m2 = 0, m4 = 0;
        for (double v : r) {
            m2 += (v - mean) * (v - mean);
            m4 += std::pow(v - mean, 4);
        }
        m2 /= paths - 1;
        m4 /= paths;
        const double se = std::sqrt((m4 - m2 * m2) / paths);
        CHECK(std::abs(m2 - p.sigma * p.sigma) <= 3 * se);
    }
}

TEST_CASE("persistence modes") {
    const auto p = world();
    const auto law = p.law(RenewalFamily::Weibull);
    auto a = make_stream(4, 0), b = make_stream(4, 0);
    const auto permanent = simulate_k(p, law, 40, a, JumpPersistence::Permanent);
    const auto transitory = simulate_k(p, law, 40, b, JumpPersistence::OneYear);
    // Same draws: the permanent path is never below the transitory one.
    for (std::size_t i = 0; i < permanent.size(); ++i)
        CHECK(permanent[i] >= transitory[i] - 1e-12);
    CHECK(parse_jump_persistence("one_year") == JumpPersistence::OneYear);
    CHECK(to_string(JumpPersistence::Permanent) == "permanent");
}

TEST_CASE("calibration recovers drift and volatility") {
    const auto truth = world();
    std::vector<double> mu, sigma;
    CalibrationOptions opts;
    opts.check_identification = false;
    opts.starts = 2;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto k = series(truth, RenewalFamily::Weibull, 300, seed);
        const auto fit = calibrate(k, opts);
        mu.push_back(fit.params.mu);
        sigma.push_back(fit.params.sigma);
        CHECK(fit.params.k0 == k.back());
    }
    INFO("median mu " << median(mu) << " median sigma " << median(sigma));
    CHECK(std::abs(median(mu) / truth.mu - 1) <= 0.10);
    CHECK(std::abs(median(sigma) / truth.sigma - 1) <= 0.10);
}

TEST_CASE("warm start at the optimum finds no spurious improvement") {
    const auto k = series(world(), RenewalFamily::Weibull, 60, 77);
    const auto fit = calibrate(k);
    CalibrationOptions again;
    again.init = &fit.params;
    const auto refit = calibrate(k, again);
    CHECK(refit.loglik >= fit.loglik - 1e-6);
    CHECK(refit.loglik <= fit.loglik + 1e-4);
    const std::vector<double> r = [&] {
        std::vector<double> out;
        for (std::size_t i = 1; i < k.size(); ++i)
            out.push_back(k[i] - k[i - 1]);
        return out;
    }();
    CHECK(jump_loglik(r, fit.params, fit.params.law(RenewalFamily::Weibull)) ==
          doctest::Approx(fit.loglik).epsilon(1e-12));
}

TEST_CASE("pure diffusion leaves the jump law weakly identified") {
    JumpDiffusionParams p;
    p.mu = -0.4;
    p.sigma = 0.25;
    const RenewalLaw never{RenewalFamily::Weibull, 5.0, 1e9};
    Engine rng(5);
    auto k = simulate_k(p, never, 55, rng);
    k.insert(k.begin(), 0.0);
    const auto fit = calibrate(k);
    CHECK(fit.weak_identification);
}

TEST_CASE("too few increments") {
    const std::vector<double> k{1, 0.5, 0.1, -0.2, -0.6};
    try {
        calibrate(k);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateFit);
    }
}

TEST_CASE("projected rates") {
    LCParams lc;
    lc.ages = {60, 62};
    lc.years = {2000, 2002};
    lc.a = Vector{{-4.0, -3.5, -3.0}};
    lc.b = Vector{{0.5, 0.3, 0.2}};
    lc.k = Vector{{1.0, 0.0, -1.0}};
    const std::vector<double> zeros(3, 0.0);
    const auto base = project_rates(lc, zeros, {2003, 2005});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(base.values(i, j) == doctest::Approx(std::exp(lc.a(i))).epsilon(1e-15));
    const std::vector<double> path{-2.0, -2.5, -3.25};
    const auto m = project_rates(lc, path, {2003, 2005});
    CHECK(m.at(61, 2004) == doctest::Approx(std::exp(-3.5 + 0.3 * -2.5)).epsilon(1e-15));
    // Exhaustive recomputation.
    for (int x = 60; x <= 62; ++x)
        for (int t = 2003; t <= 2005; ++t) {
            const double a[] = {-4.0, -3.5, -3.0};
            const double b[] = {0.5, 0.3, 0.2};
            CHECK(m.at(x, t) == doctest::Approx(std::exp(a[x - 60] + b[x - 60] * path[static_cast<std::size_t>(t - 2003)])).epsilon(1e-15));
        }
}
