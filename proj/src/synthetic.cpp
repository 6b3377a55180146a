#include "longbasis/synthetic.hpp"

#include "longbasis/error.hpp"
#include "longbasis/rng.hpp"

#include <cmath>
#include <random>

namespace longbasis {

namespace {

constexpr double kRefA[] = {-4.2486, -4.1505, -4.0451, -3.9482, -3.8408, -3.7472, -3.6598, -3.5517, -3.4593, -3.3607,
                            -3.2684, -3.1758, -3.0687, -2.9749, -2.8755, -2.7879, -2.6909, -2.6061, -2.5122, -2.4167,
                            -2.3246, -2.2401, -2.1366, -2.0461, -1.9495, -1.8587, -1.7637, -1.6793, -1.5959, -1.5088};
constexpr double kRefB[] = {0.0388, 0.0391, 0.0399, 0.0402, 0.0408, 0.0409, 0.0401, 0.0410, 0.0404, 0.0401,
                            0.0392, 0.0378, 0.0381, 0.0379, 0.0369, 0.0356, 0.0349, 0.0335, 0.0325, 0.0314,
                            0.0298, 0.0278, 0.0272, 0.0257, 0.0250, 0.0233, 0.0227, 0.0213, 0.0195, 0.0179};
constexpr double kBookA[] = {-0.5431, -0.5123, -0.4981, -0.4897, -0.4995, -0.5207, -0.5223, -0.5495, -0.5135, -0.5032,
                             -0.4664, -0.4513, -0.4500, -0.4293, -0.4287, -0.3930, -0.3886, -0.3545, -0.3569, -0.3419,
                             -0.3171, -0.2893, -0.3201, -0.2828, -0.2801, -0.2988, -0.2904, -0.2846, -0.2639, -0.2944};

Vector from_array(const double (&v)[30]) { return Eigen::Map<const Vector>(v, 30); }

Matrix draw_deaths(const Matrix& expected, bool noise, Engine& rng) {
    if (!noise)
        return expected;
    Matrix d(expected.rows(), expected.cols());
    for (Eigen::Index j = 0; j < d.cols(); ++j)
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            d(i, j) = static_cast<double>(std::poisson_distribution<long long>(expected(i, j))(rng));
    return d;
}

} // namespace

LCParams published_reference_profile() {
    return {{60, 89}, {0, -1}, from_array(kRefA), from_array(kRefB), Vector()};
}

Vector published_book_levels() { return from_array(kBookA); }

SyntheticWorld make_synthetic_world(const SyntheticWorldSpec& spec) {
    const LCParams profile = published_reference_profile();
    require(profile.ages.contains(spec.ages), ErrorKind::ConfigError,
            "synthetic ages must lie within " + to_string(profile.ages));
    require(spec.ref_years.contains(spec.book_years) && spec.book_years.size() >= 2, ErrorKind::ConfigError,
            "synthetic book years must lie within the reference years");
    const int X = spec.ages.size();
    const int T = spec.ref_years.size();
    const int off = profile.ages.index(spec.ages.first);

    SyntheticWorld w;
    w.ref_truth.ages = spec.ages;
    w.ref_truth.years = spec.ref_years;
    w.ref_truth.a = profile.a.segment(off, X);
    w.ref_truth.b = profile.b.segment(off, X);
    w.ref_truth.b /= w.ref_truth.b.sum();

    const RenewalLaw law = spec.jumps ? spec.ref_dynamics.law(spec.family) : RenewalLaw{RenewalFamily::Weibull, 1.0, 1e12};
    auto k_stream = make_stream(spec.seed, 1);
    JumpDiffusionParams dyn = spec.ref_dynamics;
    std::vector<double> k = simulate_k(dyn, law, T - 1, k_stream, spec.persistence);
    k.insert(k.begin(), dyn.k0);
    w.ref_truth.k = Eigen::Map<const Vector>(k.data(), T);

    const Matrix log_ref = w.ref_truth.log_rates();
    w.ref_rates = {spec.ages, spec.ref_years, log_ref.array().exp(), RateKind::CentralRate};

    Vector e_ref(X), e_book(X);
    for (int i = 0; i < X; ++i) {
        e_ref(i) = spec.ref_exposure * std::exp(-spec.ref_exposure_decay * i);
        e_book(i) = spec.book_exposure * std::exp(-spec.book_exposure_decay * i);
    }

    auto noise_stream = make_stream(spec.seed, 3);
    w.reference.population = Population::Reference;
    w.reference.ages = spec.ages;
    w.reference.years = spec.ref_years;
    w.reference.exposures = e_ref.replicate(1, T);
    w.reference.deaths = draw_deaths(w.reference.exposures.cwiseProduct(w.ref_rates.values), spec.poisson_noise,
                                     noise_stream);

    const int TB = spec.book_years.size();
    const int jb = spec.ref_years.index(spec.book_years.first);
    w.a_B = spec.book_levels ? Vector(published_book_levels().segment(off, X)) : Vector::Zero(X);
    auto book_stream = make_stream(spec.seed, 2);
    Matrix log_book(X, TB);
    if (spec.link == BookLink::Relative) {
        w.k_B.resize(TB);
        std::normal_distribution<double> z;
        const auto& ar = spec.book_dynamics;
        double kb = ar.stationary && std::abs(ar.psi1) < 1
                        ? ar.psi0 / (1 - ar.psi1) + ar.innovation_sd / std::sqrt(1 - ar.psi1 * ar.psi1) * z(book_stream)
                        : 0.0;
        for (int j = 0; j < TB; ++j) {
            w.k_B(j) = kb;
            kb = ar.psi0 + ar.psi1 * kb + ar.innovation_sd * z(book_stream);
        }
        for (int j = 0; j < TB; ++j)
            log_book.col(j) = log_ref.col(jb + j) + w.a_B + w.ref_truth.b * w.k_B(j);
    } else {
        std::vector<double> kk = simulate_k(dyn, law, TB - 1, book_stream, spec.persistence);
        kk.insert(kk.begin(), dyn.k0);
        w.k_B = Vector::Zero(TB);
        for (int j = 0; j < TB; ++j)
            log_book.col(j) = w.ref_truth.a + w.a_B + w.ref_truth.b * kk[static_cast<std::size_t>(j)];
    }
    w.book_rates = {spec.ages, spec.book_years, log_book.array().exp(), RateKind::CentralRate};

    w.book.population = Population::Book;
    w.book.ages = spec.ages;
    w.book.years = spec.book_years;
    w.book.exposures = e_book.replicate(1, TB);
    w.book.deaths = draw_deaths(w.book.exposures.cwiseProduct(w.book_rates.values), spec.poisson_noise, noise_stream);
    return w;
}

} // namespace longbasis
