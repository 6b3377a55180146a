#pragma once

#include "longbasis/renewal.hpp"

#include <span>

namespace longbasis {

// Period-index dynamics
//   k_t = k_0 + (mu - sigma^2/2) t + sigma W(t) + sum_{i <= N(t)} Y_i,
// Y_i ~ Exponential(eta), N a renewal process with inter-arrival law (alpha, beta).
// k0 is the jump-off value used when projecting.
struct JumpDiffusionParams {
    double mu = 0;
    double sigma = 1;
    double eta = 1;
    double alpha = 1;
    double beta = 1;
    double k0 = 0;

    RenewalLaw law(RenewalFamily family) const { return {family, alpha, beta}; }
};

struct QuadratureOptions {
    double tol = 1e-10;
    int max_depth = 25;
};

enum class DensityMethod { Quadrature, Analytic };

// Density of a one-year increment given n jumps in the year:
//   n = 0: normal with mean mu - sigma^2/2 and variance sigma^2;
//   n > 0: that normal convolved with a Gamma(n, eta) jump total.
// The quadrature route integrates the jump total numerically; the analytic
// route uses truncated-normal moments and falls back to quadrature where
// their recursion cancels.
double conditional_increment_density(double r, int n, const JumpDiffusionParams& p,
                                     DensityMethod method = DensityMethod::Quadrature,
                                     const QuadratureOptions& quad = {});
double log_conditional_increment_density(double r, int n, const JumpDiffusionParams& p,
                                         DensityMethod method = DensityMethod::Analytic,
                                         const QuadratureOptions& quad = {});

// Unconditional increment density f(r) = sum_n P(n) f(r | n) with the jump
// count distribution evaluated once at construction.
class IncrementDensity {
public:
    IncrementDensity(const JumpDiffusionParams& p, const RenewalLaw& law, const JumpCountOptions& counts = {},
                     DensityMethod method = DensityMethod::Analytic, const QuadratureOptions& quad = {});

    double operator()(double r) const;
    double log_density(double r) const;

private:
    // Sum over n = 1..n_last of weight_[n] J_{n-1} / J_0 for the analytic
    // route, or NaN when it leaves the range of doubles.
    double jump_moment_sum(double m, double z, double pdf_over_cdf, int n_last) const;

public:
    const JumpCountDistribution& jump_counts() const { return counts_; }

private:
    JumpDiffusionParams params_;
    JumpCountDistribution counts_;
    std::vector<double> log_p_;
    // log P(n) + n log eta - log (n-1)!, and its maximum over n >= 1.
    std::vector<double> log_weight_;
    double log_weight_max_ = 0;
    // exp(log_weight - log_weight_max)
    std::vector<double> weight_;
    DensityMethod method_;
    QuadratureOptions quad_;
};

double increment_density(double r, const JumpDiffusionParams& p, const RenewalLaw& law,
                         const JumpCountOptions& counts = {});

// sum_i log f(r_i) over one-year increments.
double jump_loglik(std::span<const double> increments, const JumpDiffusionParams& p, const RenewalLaw& law,
                   const JumpCountOptions& counts = {}, DensityMethod method = DensityMethod::Analytic);

} // namespace longbasis
