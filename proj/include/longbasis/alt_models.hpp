#pragma once

#include "longbasis/book_models.hpp"
#include "longbasis/lee_carter.hpp"
#include "longbasis/panel.hpp"
#include "longbasis/param_csv.hpp"
#include "longbasis/rng.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace longbasis {

// Two-population LC with at most one normal jump per population per year:
//   khat1_{t+1} = khat1_t + mu_k + Z_k
//   dhat_{t+1}  = mu_Dk + phi_Dk dhat_t + Z_Dk,   khat2 = khat1 - dhat
//   k1 = khat1 + N1 Y1,   k2 = khat2 + N2 Y2 (or N1 Y1, see JumpSource)
enum class JumpSource { Own, Population1 };

std::string_view to_string(JumpSource s);
JumpSource parse_jump_source(std::string_view text);

// Joint jump states in the order (0,0), (0,1), (1,0), (1,1) for (N1, N2).
inline constexpr int kJointStates = 4;
inline constexpr int state_n1(int s) { return s >> 1; }
inline constexpr int state_n2(int s) { return s & 1; }

struct ZhouStyleParams {
    LCParams pop1;
    LCParams pop2;
    double mu_k = 0;
    double V_Z = 1;
    double mu_Y1 = 0;
    double mu_Y2 = 0;
    double V_Y1 = 1;
    double V_Y2 = 1;
    double mu_Dk = 0;
    double phi_Dk = 0;
    double V_ZDk = 1;
    std::array<double, kJointStates> jump_joint_pmf{1, 0, 0, 0};

    // Jump-free state at the jump-off: khat1 at the reference's last year,
    // dhat at the last year the book was observed.
    double k1_hat_last = 0;
    double delta_hat_last = 0;
    // Years between the book's last year and the reference's last year.
    int gap = 0;

    IntRange posterior_years;
    std::vector<std::array<double, kJointStates>> state_posterior;
    // Filter log-likelihood of the index increments.
    double loglik = 0;
    int iterations = 0;
    bool converged = false;
};

struct ZhouFitOptions {
    int max_iter = 500;
    double tol = 1e-8;
    const ZhouStyleParams* init = nullptr;
    bool strict = true;
};

// LC on each population's own panel, then an EM iteration over the four
// joint jump states per year with a collapsed filter for the jump-free
// indices. States with posterior below 1e-12 are pruned.
ZhouStyleParams fit_zhou(const MortalityPanel& ref_panel, const MortalityPanel& book_panel,
                         const ZhouFitOptions& options = {});

// Same EM on index series k1, k2 over common years; `k1_tail` holds the
// reference values observed after the last common year.
ZhouStyleParams fit_zhou_indices(const Vector& k1, const Vector& k2, const Vector& k1_tail,
                                 const ZhouFitOptions& options = {});

struct ZhouPaths {
    std::vector<double> k1;
    std::vector<double> k2;
};

// Random draws per year, in order: Z_k, Z_Dk, state uniform, Y1, Y2 (gap
// years draw Z_Dk only).
ZhouPaths simulate_zhou(const ZhouStyleParams& p, int horizon, Engine& rng, JumpSource source = JumpSource::Own);

ParamTable to_param_table(const ZhouStyleParams& p);
// Reads the jump block and, when present, book-side a and b by age.
ZhouStyleParams zhou_params_from_table(const ParamTable& table);

// Reference LC with cohort effect and a common-age-effect book on top.
struct LCCohortsFit {
    LCParams reference;
    Vector gamma_R;
    CohortGrouping ref_cohorts;
    double ref_loglik = 0;
    BookModelFit book;
    int iterations = 0;
    bool converged = false;
};

struct LCCohortsOptions {
    // The b/gamma ridge makes the block iterations slow.
    ConvergenceOptions convergence{1e-10, 5000};
    const LCCohortsFit* init = nullptr;
    bool strict = true;
};

LCCohortsFit fit_lc_cohorts(const MortalityPanel& ref_panel, const MortalityPanel& book_panel,
                            const LCCohortsOptions& options = {});

// exp(a + b k_t + gamma_{t-x}); unseen cohorts get gamma = 0.
RateSurface lc_cohorts_reference_rates(const LCCohortsFit& fit, const Vector& k_path, IntRange years);

ParamTable to_param_table(const LCCohortsFit& fit);

} // namespace longbasis
