#pragma once

#include "longbasis/rng.hpp"

#include <string_view>
#include <vector>

namespace longbasis {

enum class RenewalFamily { Gamma, Weibull };

std::string_view to_string(RenewalFamily f);
RenewalFamily parse_renewal_family(std::string_view text);

// Inter-arrival law of the jump renewal process.
//   Gamma:   shape alpha, rate beta   F(t) = P(alpha, beta t)
//   Weibull: shape alpha, scale beta  F(t) = 1 - exp(-(t / beta)^alpha)
struct RenewalLaw {
    RenewalFamily family = RenewalFamily::Weibull;
    double alpha = 1.0;
    double beta = 1.0;

    double cdf(double t) const;
    double pdf(double t) const;
    double quantile(double u) const;
    double sample(Engine& rng) const;
};

struct JumpCountOptions {
    int n_max = 64;
    double tol = 1e-9;
};

// P(n) for n = 0..n_last plus the mass P(N > n_last) left in the tail.
struct JumpCountDistribution {
    std::vector<double> p;
    double tail = 0;

    double mean() const;
};

// Distribution of the number of renewals in [0, t] for a renewal process
// started at 0: P(0) = 1 - F(t), P(n) = int_0^t P_{n-1}(t - s) f(s) ds.
// Stops once the tail bound falls below options.tol or at options.n_max.
JumpCountDistribution renewal_jump_probabilities(double t, const RenewalLaw& law, const JumpCountOptions& options = {});

// Same distribution through numerical evaluation of the convolution
// recursion, whatever the family.
JumpCountDistribution renewal_jump_probabilities_numeric(double t, const RenewalLaw& law,
                                                         const JumpCountOptions& options = {});

} // namespace longbasis
