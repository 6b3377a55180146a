#include "longbasis/increment_density.hpp"

#include "longbasis/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace longbasis {
namespace {

constexpr double kPeakDrop = 36.841361487904734; // ln(1e16)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_cdf(double z) {
    if (z > -30)
        return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
    // Asymptotic series of the Mills ratio.
    const double z2 = z * z;
    return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2 * std::numbers::pi) +
           std::log1p(-1 / z2 + 3 / (z2 * z2) - 15 / (z2 * z2 * z2));
}

void check_params(const JumpDiffusionParams& p) {
    require(p.sigma > 0 && p.eta > 0 && std::isfinite(p.sigma) && std::isfinite(p.eta), ErrorKind::DomainError,
            "sigma and eta must be positive");
}

// log of (1 / sqrt(2 pi sigma^2)) int_0^inf X^{n-1} exp(-eta X - (d - X)^2 / (2 sigma^2)) dX
double log_jump_integral_quadrature(double d, int n, double sigma, double eta, const QuadratureOptions& quad) {
    using boost::math::quadrature::gauss_kronrod;
    const double s2 = sigma * sigma;
    const double m = d - eta * s2;
    auto log_g = [&](double x) {
        if (x <= 0)
            return n == 1 ? -(d * d) / (2 * s2) : kNegInf;
        return (n - 1) * std::log(x) - eta * x - (d - x) * (d - x) / (2 * s2);
    };
    double peak = std::max(m, 0.0);
    if (n > 1) {
        const double root = std::sqrt(m * m + 4.0 * (n - 1) * s2);
        peak = m >= 0 ? 0.5 * (m + root) : 2.0 * (n - 1) * s2 / (root - m);
    }
    const double top = log_g(peak);

    // Integrand relative to its peak, written in u = x - peak so that the
    // large quadratic terms cancel analytically.
    const double dp = d - peak;
    auto rel = [&](double x) {
        const double u = x - peak;
        double v = -eta * u + (2 * dp * u - u * u) / (2 * s2);
        if (n > 1)
            v += (n - 1) * std::log1p(u / peak);
        return v;
    };

    // The integrand is log-concave; walk outwards until it drops below 1e-16 of the peak.
    double upper = peak;
    for (double step = sigma; rel(upper) > -kPeakDrop; step *= 2)
        upper = peak + step;
    double lower = 0.0;
    if (peak > 0) {
        for (double step = sigma; step < peak; step *= 2) {
            if (rel(peak - step) <= -kPeakDrop) {
                lower = peak - step;
                break;
            }
        }
    }
    auto scaled = [&](double x) { return x <= 0 && n > 1 ? 0.0 : std::exp(rel(x)); };
    double err_lo = 0, err_hi = 0;
    double mass = 0;
    const auto depth = static_cast<unsigned>(quad.max_depth);
    if (peak > lower)
        mass += gauss_kronrod<double, 15>::integrate(scaled, lower, peak, depth, quad.tol, &err_lo);
    mass += gauss_kronrod<double, 15>::integrate(scaled, peak, upper, depth, quad.tol, &err_hi);
    if (!(err_lo + err_hi <= 10 * quad.tol * mass))
        throw Error(ErrorKind::QuadratureFailure,
                    "jump integral relative error " + std::to_string((err_lo + err_hi) / mass) + " exceeds tolerance");
    return top + std::log(mass) - 0.5 * std::log(2 * std::numbers::pi * s2);
}

double log_add(double a, double b) {
    if (a < b)
        std::swap(a, b);
    if (b == kNegInf)
        return a;
    return a + std::log1p(std::exp(b - a));
}

// The same quantities for n = 1..n_last at once, through the partial moments
// of N(m, sigma^2) on (0, inf):
//   J_0 = Phi(m/sigma), J_1 = m J_0 + sigma phi(m/sigma),
//   J_k = m J_{k-1} + (k-1) sigma^2 J_{k-2}.
// For m >= 0 every term is positive. For m < 0 the upward recursion cancels,
// so once it has lost four digits the remaining moments come from a downward
// pass, which is again free of cancellation.
void log_jump_integrals(double d, int n_last, double sigma, double eta, std::vector<double>& out) {
    const double s2 = sigma * sigma;
    const double m = d - eta * s2;
    const double z = m / sigma;
    const double log_shift = (m * m - d * d) / (2 * s2);
    const double log_s2 = std::log(s2);
    std::vector<double> log_j(static_cast<std::size_t>(n_last), kNegInf); // log J_0 .. J_{n_last-1}
    log_j[0] = log_normal_cdf(z);
    int known = 1;
    if (n_last > 1) {
        const double pdf_over_cdf = std::exp(-0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi) - log_j[0]);
        if (m >= 0) {
            log_j[1] = log_j[0] + std::log(m + sigma * pdf_over_cdf);
            const double log_m = std::log(m);
            for (int k = 2; k < n_last; ++k)
                log_j[static_cast<std::size_t>(k)] =
                    log_add(log_m + log_j[static_cast<std::size_t>(k - 1)],
                            std::log(k - 1.0) + log_s2 + log_j[static_cast<std::size_t>(k - 2)]);
            known = n_last;
        } else {
            // Ratios to J_0 while the cancellation stays mild.
            double prev = 1.0;
            double curr = m + sigma * pdf_over_cdf;
            double growth = (-m + sigma * pdf_over_cdf) / std::abs(curr);
            for (int k = 1; k < n_last && curr > 0 && growth <= 1e4; ++k) {
                log_j[static_cast<std::size_t>(k)] = log_j[0] + std::log(curr);
                known = k + 1;
                const double a = m * curr;
                const double b = k * s2 * prev;
                prev = curr;
                curr = a + b;
                growth *= (std::abs(a) + b) / std::abs(curr);
            }
            if (known < n_last) {
                // J is the minimal solution of the recursion when m < 0, so a
                // downward pass from arbitrary values far above converges to it
                // (Miller's algorithm); it is pinned to the last trusted value.
                // The spurious solution dies off like exp(-2 |z| sqrt(k)).
                const int start = n_last + static_cast<int>(std::min(4000.0, std::max(40.0, std::ceil(400 / (z * z)))));
                const double log_abs_m = std::log(-m);
                double upper = kNegInf; // log J_{k+1}, unscaled
                double current = 0.0;   // log J_k, unscaled
                std::vector<double> raw(static_cast<std::size_t>(n_last), kNegInf);
                for (int k = start; k >= known; --k) {
                    // J_{k-1} = (J_{k+1} - m J_k) / (k s^2)
                    const double lower = log_add(upper, log_abs_m + current) - std::log(static_cast<double>(k)) - log_s2;
                    upper = current;
                    current = lower;
                    if (k - 1 < n_last)
                        raw[static_cast<std::size_t>(k - 1)] = current;
                }
                const double shift = log_j[static_cast<std::size_t>(known - 1)] - raw[static_cast<std::size_t>(known - 1)];
                for (int k = known; k < n_last; ++k)
                    log_j[static_cast<std::size_t>(k)] = raw[static_cast<std::size_t>(k)] + shift;
            }
        }
    }
    out.resize(static_cast<std::size_t>(n_last));
    for (int n = 1; n <= n_last; ++n)
        out[static_cast<std::size_t>(n - 1)] = log_shift + log_j[static_cast<std::size_t>(n - 1)];
}

} // namespace

double log_conditional_increment_density(double r, int n, const JumpDiffusionParams& p, DensityMethod method,
                                         const QuadratureOptions& quad) {
    check_params(p);
    require(n >= 0, ErrorKind::DomainError, "jump count must be non-negative");
    const double d = r - (p.mu - 0.5 * p.sigma * p.sigma);
    if (n == 0)
        return -0.5 * d * d / (p.sigma * p.sigma) - std::log(p.sigma) - 0.5 * std::log(2 * std::numbers::pi);
    const double log_scale = n * std::log(p.eta) - std::lgamma(static_cast<double>(n));
    double log_integral = 0;
    if (method == DensityMethod::Analytic) {
        std::vector<double> all;
        log_jump_integrals(d, n, p.sigma, p.eta, all);
        log_integral = all.back();
    } else {
        log_integral = log_jump_integral_quadrature(d, n, p.sigma, p.eta, quad);
    }
    return log_scale + log_integral;
}

double conditional_increment_density(double r, int n, const JumpDiffusionParams& p, DensityMethod method,
                                     const QuadratureOptions& quad) {
    return std::exp(log_conditional_increment_density(r, n, p, method, quad));
}

IncrementDensity::IncrementDensity(const JumpDiffusionParams& p, const RenewalLaw& law, const JumpCountOptions& counts,
                                   DensityMethod method, const QuadratureOptions& quad)
    : params_(p), counts_(renewal_jump_probabilities(1.0, law, counts)), method_(method), quad_(quad) {
    check_params(p);
    log_p_.reserve(counts_.p.size());
    for (double pn : counts_.p)
        log_p_.push_back(pn > 0 ? std::log(pn) : kNegInf);
    log_weight_.assign(log_p_.size(), kNegInf);
    log_weight_max_ = kNegInf;
    for (std::size_t n = 1; n < log_p_.size(); ++n) {
        if (log_p_[n] == kNegInf)
            continue;
        log_weight_[n] = log_p_[n] + static_cast<double>(n) * std::log(p.eta) - std::lgamma(static_cast<double>(n));
        log_weight_max_ = std::max(log_weight_max_, log_weight_[n]);
    }
    weight_.assign(log_p_.size(), 0.0);
    for (std::size_t n = 1; n < log_p_.size(); ++n)
        if (log_weight_[n] != kNegInf)
            weight_[n] = std::exp(log_weight_[n] - log_weight_max_);
}

double IncrementDensity::jump_moment_sum(double m, double z, double pdf_over_cdf, int n_last) const {
    const double s2 = params_.sigma * params_.sigma;
    // ratio[k] = J_k / J_{k-1}
    std::vector<double> ratio(static_cast<std::size_t>(n_last), 0.0);
    int known = 1;
    if (n_last > 1) {
        double rho = m + params_.sigma * pdf_over_cdf;
        double growth = m < 0 ? (-m + params_.sigma * pdf_over_cdf) / std::abs(rho) : 1.0;
        for (int k = 1; k < n_last && rho > 0 && growth <= 1e4; ++k) {
            ratio[static_cast<std::size_t>(k)] = rho;
            known = k + 1;
            const double b = k * s2 / rho;
            const double next = m + b;
            if (m < 0)
                growth *= (-m + b) / std::abs(next);
            rho = next;
        }
        if (known < n_last) {
            // Downward ratios u_k = J_{k-1} / J_k of the minimal solution.
            const int start = n_last + static_cast<int>(std::min(4000.0, std::max(40.0, std::ceil(400 / (z * z)))));
            double u = -m / (start * s2);
            for (int k = start - 1; k >= known; --k) {
                u = (1 / u - m) / (k * s2);
                if (k < n_last)
                    ratio[static_cast<std::size_t>(k)] = 1 / u;
            }
        }
    }
    double sum = 0;
    double rel = 1.0; // J_{n-1} / J_0
    for (int n = 1; n <= n_last; ++n) {
        if (n > 1)
            rel *= ratio[static_cast<std::size_t>(n - 1)];
        sum += weight_[static_cast<std::size_t>(n)] * rel;
    }
    return std::isfinite(sum) && rel > 0 ? sum : std::numeric_limits<double>::quiet_NaN();
}

double IncrementDensity::log_density(double r) const {
    const auto& p = params_;
    const double d = r - (p.mu - 0.5 * p.sigma * p.sigma);
    const double log_peak = -std::log(p.sigma) - 0.5 * std::log(2 * std::numbers::pi);
    const double first = log_p_[0] + log_peak - 0.5 * d * d / (p.sigma * p.sigma);
    // f(r | n) never exceeds the normal peak, so terms whose weight sits far
    // below the no-jump term cannot matter.
    int n_last = 0;
    for (std::size_t n = 1; n < log_p_.size(); ++n)
        if (log_p_[n] + log_peak > first - 40)
            n_last = static_cast<int>(n);
    if (n_last == 0)
        return first;
    if (method_ == DensityMethod::Analytic) {
        const double s2 = p.sigma * p.sigma;
        const double m = d - p.eta * s2;
        const double z = m / p.sigma;
        const double log_j0 = log_normal_cdf(z);
        const double pdf_over_cdf = std::exp(-0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi) - log_j0);
        const double sum = jump_moment_sum(m, z, pdf_over_cdf, n_last);
        if (sum > 0) {
            const double log_shift = (m * m - d * d) / (2 * s2);
            return log_add(first, log_weight_max_ + log_shift + log_j0 + std::log(sum));
        }
    }
    std::vector<double> terms(static_cast<std::size_t>(n_last) + 1, kNegInf);
    terms[0] = first;
    std::vector<double> integrals;
    if (method_ == DensityMethod::Analytic) {
        log_jump_integrals(d, n_last, p.sigma, p.eta, integrals);
    } else {
        for (int n = 1; n <= n_last; ++n)
            integrals.push_back(log_jump_integral_quadrature(d, n, p.sigma, p.eta, quad_));
    }
    for (int n = 1; n <= n_last; ++n) {
        const auto i = static_cast<std::size_t>(n);
        if (log_weight_[i] != kNegInf)
            terms[i] = log_weight_[i] + integrals[i - 1];
    }
    const double best = *std::max_element(terms.begin(), terms.end());
    if (best == kNegInf)
        return kNegInf;
    double sum = 0;
    for (double t : terms)
        if (t != kNegInf)
            sum += std::exp(t - best);
    return best + std::log(sum);
}

double IncrementDensity::operator()(double r) const { return std::exp(log_density(r)); }

double increment_density(double r, const JumpDiffusionParams& p, const RenewalLaw& law,
                         const JumpCountOptions& counts) {
    return IncrementDensity(p, law, counts)(r);
}

double jump_loglik(std::span<const double> increments, const JumpDiffusionParams& p, const RenewalLaw& law,
                   const JumpCountOptions& counts, DensityMethod method) {
    const IncrementDensity f(p, law, counts, method);
    double ll = 0;
    for (double r : increments)
        ll += f.log_density(r);
    return ll;
}

} // namespace longbasis
