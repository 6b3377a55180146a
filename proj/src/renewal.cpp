#include "longbasis/renewal.hpp"

#include "longbasis/error.hpp"
#include "longbasis/types.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace longbasis {

std::string_view to_string(RenewalFamily f) { return f == RenewalFamily::Gamma ? "gamma" : "weibull"; }

RenewalFamily parse_renewal_family(std::string_view text) {
    if (text == "gamma")
        return RenewalFamily::Gamma;
    if (text == "weibull")
        return RenewalFamily::Weibull;
    throw Error(ErrorKind::ConfigError, "unknown renewal family '" + std::string(text) + "'");
}

double RenewalLaw::cdf(double t) const {
    if (t <= 0)
        return 0.0;
    if (family == RenewalFamily::Gamma)
        return boost::math::gamma_p(alpha, beta * t);
    return -std::expm1(-std::pow(t / beta, alpha));
}

double RenewalLaw::pdf(double t) const {
    if (t <= 0)
        return 0.0;
    if (family == RenewalFamily::Gamma)
        return beta * boost::math::gamma_p_derivative(alpha, beta * t);
    const double z = std::pow(t / beta, alpha);
    return alpha / t * z * std::exp(-z);
}

double RenewalLaw::quantile(double u) const {
    if (u <= 0)
        return 0.0;
    if (u >= 1)
        return std::numeric_limits<double>::infinity();
    if (family == RenewalFamily::Gamma)
        return boost::math::gamma_p_inv(alpha, u) / beta;
    return beta * std::pow(-std::log1p(-u), 1.0 / alpha);
}

double RenewalLaw::sample(Engine& rng) const {
    if (family == RenewalFamily::Gamma)
        return std::gamma_distribution<double>(alpha, 1.0 / beta)(rng);
    return std::weibull_distribution<double>(alpha, beta)(rng);
}

double JumpCountDistribution::mean() const {
    double m = 0;
    for (std::size_t n = 1; n < p.size(); ++n)
        m += static_cast<double>(n) * p[n];
    return m;
}

namespace {

void check_inputs(double t, const RenewalLaw& law, const JumpCountOptions& options) {
    require(t > 0 && std::isfinite(t), ErrorKind::DomainError, "renewal horizon must be positive");
    require(law.alpha > 0 && law.beta > 0, ErrorKind::DomainError, "renewal parameters must be positive");
    require(options.n_max >= 0, ErrorKind::DomainError, "n_max must be non-negative");
}

// P(N(t) >= n) = P(S_n <= t) with S_n ~ Gamma(n alpha, beta) for gamma
// inter-arrivals, so the convolution recursion has a closed form.
JumpCountDistribution gamma_counts(double t, const RenewalLaw& law, const JumpCountOptions& options) {
    const double x = law.beta * t;
    JumpCountDistribution out;
    double lower_prev = 1.0; // P(S_0 <= t)
    double upper_prev = 0.0;
    for (int n = 0; n <= options.n_max; ++n) {
        const double shape = (n + 1) * law.alpha;
        const double lower = boost::math::gamma_p(shape, x);
        const double upper = boost::math::gamma_q(shape, x);
        // Difference whichever way avoids cancellation.
        const double pn = lower_prev < 0.5 ? lower_prev - lower : upper - upper_prev;
        out.p.push_back(std::max(pn, 0.0));
        lower_prev = lower;
        upper_prev = upper;
        if (lower < options.tol)
            break;
    }
    out.tail = std::max(lower_prev, 0.0);
    return out;
}

// Fixed tanh-sinh rule on [0, 1]: abscissae, their distance to 1, weights.
struct TanhSinhRule {
    std::vector<double> v, vc, w;
};

const TanhSinhRule& tanh_sinh_rule() {
    static const TanhSinhRule rule = [] {
        TanhSinhRule r;
        constexpr double h = 1.0 / 10;
        constexpr int half = 38;
        for (int i = -half; i <= half; ++i) {
            const double s = i * h;
            const double q = std::exp(-std::numbers::pi * std::sinh(s));
            r.v.push_back(1 / (1 + q));
            r.vc.push_back(q / (1 + q));
            r.w.push_back(h * std::numbers::pi * std::cosh(s) * q / ((1 + q) * (1 + q)));
        }
        return r;
    }();
    return rule;
}

// Chebyshev-Lobatto values-to-coefficients matrix for n nodes ordered by
// increasing y, node j at y = cos(pi (n-1-j) / (n-1)).
const Matrix& chebyshev_transform(int n) {
    thread_local std::map<int, Matrix> cache;
    auto [it, fresh] = cache.try_emplace(n);
    if (fresh) {
        Matrix& m = it->second;
        m.resize(n, n);
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) {
                const int i = n - 1 - j;
                double c = 2.0 / (n - 1) * std::cos(std::numbers::pi * k * i / (n - 1));
                if (i == 0 || i == n - 1)
                    c *= 0.5;
                if (k == 0 || k == n - 1)
                    c *= 0.5;
                m(k, j) = c;
            }
    }
    return it->second;
}

// The CDF of S_n lives on Chebyshev-Lobatto nodes in a coordinate z in which
// it is analytic: z = (tau / beta)^alpha for Weibull, (beta tau)^alpha or
// beta tau for gamma. One convolution step is then a fixed linear map of the
// node values, assembled once and applied level by level.
class ConvolutionOperator {
public:
    ConvolutionOperator(double t, const RenewalLaw& law) : law_(law) {
        weibull_ = law.family == RenewalFamily::Weibull;
        power_ = weibull_ ? law.alpha : std::min(law.alpha, 1.0);
        z_max_ = to_z(t);
        const int base = weibull_ ? 17 : 33;
        const int nodes = std::clamp(base + 2 * static_cast<int>(std::ceil(z_max_)), base, 129);
        z_.resize(static_cast<std::size_t>(nodes));
        for (int j = 0; j < nodes; ++j)
            z_[static_cast<std::size_t>(j)] = 0.5 * z_max_ * (1.0 - std::cos(std::numbers::pi * j / (nodes - 1)));
        z_.back() = z_max_;
        build();
    }

    // Level-1 values: the inter-arrival CDF itself.
    Vector first() const {
        Vector g(static_cast<Eigen::Index>(z_.size()));
        for (std::size_t j = 0; j < z_.size(); ++j)
            g(static_cast<Eigen::Index>(j)) = weibull_ ? -std::expm1(-z_[j]) : law_.cdf(from_z(z_[j]));
        return g;
    }

    Vector advance(const Vector& g) const { return (op_ * g).cwiseMax(0.0).cwiseMin(1.0); }

    // Gap between the full rule and the rule on every other abscissa at the
    // top node; the full rule is far more accurate than this gap.
    double error_estimate(const Vector& g) const { return std::abs(op_.row(op_.rows() - 1).dot(g) - coarse_.dot(g)); }

private:
    double to_z(double tau) const {
        const double scale = weibull_ ? 1.0 / law_.beta : law_.beta;
        return std::pow(scale * tau, power_);
    }
    double from_z(double z) const {
        const double scale = weibull_ ? 1.0 / law_.beta : law_.beta;
        return std::pow(z, 1.0 / power_) / scale;
    }

    // Adds weight * T_k(y(z)) for every Chebyshev degree k.
    static void add_basis(double* out, int degrees, double y, double weight) {
        double prev = 1.0, curr = y;
        out[0] += weight;
        if (degrees > 1)
            out[1] += weight * y;
        for (int k = 2; k < degrees; ++k) {
            const double next = 2 * y * curr - prev;
            out[k] += weight * next;
            prev = curr;
            curr = next;
        }
    }

    void build() {
        const int n = static_cast<int>(z_.size());
        // Rows of `basis` hold each node's quadrature rule expressed against the
        // Chebyshev polynomials; `to_coeffs` maps node values to coefficients.
        Matrix basis_t = Matrix::Zero(n, n); // column = node
        Vector coarse_basis = Vector::Zero(n);
        const auto& rule = tanh_sinh_rule();
        // Weibull: a jump-free stretch s with (s / beta)^alpha = zt v leaves
        // z' = zt (1 - v^(1/alpha))^alpha, and dF = exp(-zt v) zt dv. The shape
        // factor does not depend on the node.
        std::vector<double> shape(rule.v.size());
        if (weibull_) {
            for (std::size_t q = 0; q < rule.v.size(); ++q) {
                const double v = rule.v[q];
                const double log_v = v < 0.5 ? std::log(v) : std::log1p(-rule.vc[q]);
                shape[q] = std::pow(-std::expm1(log_v / power_), power_);
            }
        }
        for (int row = 1; row < n; ++row) {
            const double zt = z_[static_cast<std::size_t>(row)];
            const double tau = weibull_ ? 0.0 : from_z(zt);
            const double top = weibull_ ? 0.0 : law_.cdf(tau);
            for (std::size_t q = 0; q < rule.v.size(); ++q) {
                const double v = rule.v[q];
                double target = 0, weight = 0;
                if (weibull_) {
                    target = zt * shape[q];
                    weight = rule.w[q] * zt * std::exp(-zt * v);
                } else {
                    const double s = law_.quantile(top * v);
                    target = to_z(std::max(tau - s, 0.0));
                    weight = rule.w[q] * top;
                }
                if (!(target > 0 && weight > 0))
                    continue;
                const double y = std::clamp(2 * target / z_max_ - 1, -1.0, 1.0);
                add_basis(basis_t.col(row).data(), n, y, weight);
                if (row == n - 1 && q % 2 == 0)
                    add_basis(coarse_basis.data(), n, y, 2 * weight);
            }
        }
        const Matrix& to_coeffs = chebyshev_transform(n);
        op_ = basis_t.transpose() * to_coeffs;
        coarse_ = (coarse_basis.transpose() * to_coeffs).transpose();
    }

    RenewalLaw law_;
    bool weibull_ = true;
    double power_ = 1;
    double z_max_ = 0;
    std::vector<double> z_;
    Matrix op_;
    Vector coarse_;
};

} // namespace

JumpCountDistribution renewal_jump_probabilities_numeric(double t, const RenewalLaw& law,
                                                         const JumpCountOptions& options) {
    check_inputs(t, law, options);
    JumpCountDistribution out;
    const ConvolutionOperator op(t, law);
    Vector g = op.first();
    double previous = 1.0; // P(S_0 <= t)
    for (int n = 0; n <= options.n_max; ++n) {
        if (n > 0) {
            const double error = op.error_estimate(g);
            if (error > 1e-6)
                throw Error(ErrorKind::QuadratureFailure,
                            "renewal convolution error estimate " + std::to_string(error) + " too large");
            g = op.advance(g);
        }
        const double current = std::min(g(g.size() - 1), previous); // P(S_{n+1} <= t)
        out.p.push_back(previous - current);
        previous = current;
        if (current < options.tol)
            break;
    }
    out.tail = previous;
    return out;
}

JumpCountDistribution renewal_jump_probabilities(double t, const RenewalLaw& law, const JumpCountOptions& options) {
    check_inputs(t, law, options);
    if (law.family == RenewalFamily::Gamma)
        return gamma_counts(t, law, options);
    return renewal_jump_probabilities_numeric(t, law, options);
}

} // namespace longbasis
