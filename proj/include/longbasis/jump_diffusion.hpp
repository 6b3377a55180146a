#pragma once

#include "longbasis/increment_density.hpp"
#include "longbasis/lee_carter.hpp"
#include "longbasis/panel.hpp"
#include "longbasis/rng.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace longbasis {

// Whether a simulated jump stays in the index (as written in the dynamics)
// or only raises the year in which it arrives.
enum class JumpPersistence { Permanent, OneYear };

std::string_view to_string(JumpPersistence p);
JumpPersistence parse_jump_persistence(std::string_view text);

struct CalibrationOptions {
    RenewalFamily family = RenewalFamily::Weibull;
    JumpCountOptions counts;
    DensityMethod density = DensityMethod::Analytic;
    int starts = 8;
    // Replaces the start grid with a single start when set.
    const JumpDiffusionParams* init = nullptr;
    int max_iterations = 2000;
    double simplex_tol = 1e-6;
    // Initial simplex step for the log-scale parameters.
    double start_step = 0.5;
    bool polish = true;
    bool check_identification = true;
    bool warn_on_limit = true;
};

struct JumpCalibration {
    JumpDiffusionParams params;
    RenewalFamily family = RenewalFamily::Weibull;
    double loglik = 0;
    bool converged = false;
    // Set when the likelihood is flat in a direction dominated by the jump
    // parameters (eta, alpha, beta).
    bool weak_identification = false;
    int evaluations = 0;
    int starts_run = 0;
};

// Maximum-likelihood fit of (mu, sigma, eta, alpha, beta) to the one-year
// increments of k. Positivity is enforced by optimising log parameters.
// The returned k0 is the last value of the series (the projection jump-off).
JumpCalibration calibrate(std::span<const double> k_series, const CalibrationOptions& options = {});

// The documented multi-start grid for a given increment sample.
std::vector<JumpDiffusionParams> calibration_start_grid(std::span<const double> increments, RenewalFamily family,
                                                        int starts);

// k_1..k_horizon. W is simulated by Gaussian increments, arrivals by
// sequential inter-arrival draws from the renewal law, sizes ~ Exponential(eta).
std::vector<double> simulate_k(const JumpDiffusionParams& p, const RenewalLaw& law, int horizon, Engine& rng,
                               JumpPersistence persistence = JumpPersistence::OneYear);

// m(x,t) = exp(a_x + b_x k_t) over `years`, one column per path entry.
RateSurface project_rates(const LCParams& lc, std::span<const double> k_path, IntRange years);

} // namespace longbasis
