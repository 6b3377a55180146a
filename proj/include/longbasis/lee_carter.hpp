#pragma once

#include "longbasis/panel.hpp"
#include "longbasis/types.hpp"

#include <vector>

namespace longbasis {

// log m(x,t) = a_x + b_x k_t with sum(b) = 1 and sum(k) = 0.
struct LCParams {
    IntRange ages;
    IntRange years;
    Vector a;
    Vector b;
    Vector k;

    Matrix log_rates() const;
};

enum class LCMethod { SvdOnLogRates, PoissonMle };

struct ConvergenceOptions {
    double rel_tol = 1e-10;
    int max_iter = 500;
};

struct LCFitOptions {
    LCMethod method = LCMethod::PoissonMle;
    ConvergenceOptions convergence;
    // Warm start for the Poisson iterations; the SVD fit is used when absent.
    // Zero-death cells are accepted only with a warm start.
    const LCParams* init = nullptr;
    // Throw NonConvergence when the iteration budget runs out.
    bool strict = true;
};

struct LCFitDiagnostics {
    double loglik = 0;
    double deviance = 0;
    int iterations = 0;
    bool converged = true;
    std::vector<double> loglik_trace;
};

struct LCFit {
    LCParams params;
    LCFitDiagnostics diagnostics;
};

LCFit fit_lc(const MortalityPanel& panel, const LCFitOptions& options = {});

// Normalises an unconstrained (a, b, k) so that sum(b) = 1 and sum(k) = 0
// while leaving a_x + b_x k_t unchanged.
LCParams apply_constraints(IntRange ages, IntRange years, Vector a, Vector b, Vector k);

// Poisson log-likelihood sum D log(E mu) - E mu - log(D!) for log mu = log_rates.
double poisson_loglik(const Matrix& deaths, const Matrix& exposures, const Matrix& log_rates);
double poisson_deviance(const Matrix& deaths, const Matrix& exposures, const Matrix& log_rates);

// Cohorts t - x with fewer than `min_cells` observed cells are merged with
// their neighbour so every group has enough support.
struct CohortGrouping {
    IntRange ages;
    IntRange years;
    int first_cohort = 0;
    std::vector<int> group_of_cohort;
    Vector group_year; // mean birth year of each group's member cohorts

    int n_groups() const { return static_cast<int>(group_year.size()); }
    int group(int age_index, int year_index) const {
        return group_of_cohort[static_cast<std::size_t>(years.value(year_index) - ages.value(age_index) - first_cohort)];
    }
    // Group of an arbitrary birth year, or -1 when it was never observed.
    int group_for_cohort(int cohort) const;
};

CohortGrouping make_cohort_grouping(IntRange ages, IntRange years, int min_cells = 3);

// Block-coordinate Poisson fitter shared by the reference fit and the
// relative book models:
//   log mu(x,t) = offset(x,t) + a_x + b_x k_t [+ gamma_{g(t-x)}]
// gamma is held at zero sum and zero linear trend in birth year.
enum class SensitivityMode { Free, Fixed, Unit };

struct PoissonTermState {
    Vector a;
    Vector b;
    Vector k;
    Vector gamma;
};

struct PoissonTermSpec {
    const Matrix* offset = nullptr;
    SensitivityMode b_mode = SensitivityMode::Free;
    const CohortGrouping* cohorts = nullptr;
    ConvergenceOptions convergence;
};

struct PoissonTermResult {
    PoissonTermState state;
    double loglik = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> loglik_trace;
};

Matrix linear_predictor(const PoissonTermState& s, const PoissonTermSpec& spec, Eigen::Index rows,
                        Eigen::Index cols);

PoissonTermResult fit_poisson_terms(const Matrix& deaths, const Matrix& exposures, const PoissonTermSpec& spec,
                                    PoissonTermState init);

} // namespace longbasis
