#pragma once

#include "longbasis/lee_carter.hpp"
#include "longbasis/panel.hpp"
#include "longbasis/param_csv.hpp"
#include "longbasis/rng.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace longbasis {

// Relative book models, all on top of the fitted reference rates:
//   RelLC  log m^B - log m^R = a_x + b_x k_t
//   CAE    log m^B - log m^R = a_x + b^R_x k_t
//   APC    log m^B - log m^R = a_x + k_t + gamma_{t-x}
//   CBD    logit q^B - logit q^R = kappa1_t + (x - xbar) kappa2_t
enum class BookFamily { RelLC, CAE, APC, CBD };

std::string_view to_string(BookFamily f);
BookFamily parse_book_family(std::string_view text);
inline constexpr BookFamily kAllBookFamilies[] = {BookFamily::RelLC, BookFamily::CAE, BookFamily::APC,
                                                  BookFamily::CBD};

struct BookModelFit {
    BookFamily family = BookFamily::CAE;
    IntRange ages;
    IntRange years;
    Vector a_B;
    Vector b_B;
    Vector k_B;
    Vector gamma_B;
    Vector kappa1_B;
    Vector kappa2_B;
    double xbar = 0;
    // Common age effect borrowed from the reference (CAE only).
    Vector b_R;
    CohortGrouping cohorts;
    double loglik = 0;
    int n_params = 0;
    int n_obs = 0;
    double bic = 0;
    int iterations = 0;
    bool converged = false;

    // Number of period indices driven by time-series dynamics (2 for CBD).
    int n_period_indices() const { return family == BookFamily::CBD ? 2 : 1; }
    // Rows are period indices, columns are years.
    Matrix period_indices() const;
};

struct BookFitOptions {
    ConvergenceOptions convergence;
    const BookModelFit* init = nullptr;
    bool strict = true;
};

// `ref_rates` holds fitted reference central rates covering the book's ages
// and years. `ref_fit` supplies b^R for the common age effect.
BookModelFit fit_book(BookFamily family, const LCParams& ref_fit, const RateSurface& ref_rates,
                      const MortalityPanel& book_panel, const BookFitOptions& options = {});

double bic(double loglik, int n_params, int n_obs);
double bic(const BookModelFit& fit);

// Lowest BIC; ties go to fewer parameters, then to the family order.
const BookModelFit& select_model(std::span<const BookModelFit> fits);

// log m^B over the fitted window.
Matrix book_log_rates(const BookModelFit& fit, const RateSurface& ref_rates);

struct AR1Params {
    double psi0 = 0;
    double psi1 = 0;
    double innovation_sd = 0;
    bool stationary = false;

    double long_run_mean() const;
};

// Conditional least squares on x_t = psi0 + psi1 x_{t-1} + xi_t.
AR1Params fit_ar1(std::span<const double> series);

std::vector<double> project_book_k(const AR1Params& p, double k_last, int horizon, Engine& rng);

// Book central rates over the years of `ref_rates` given period paths (one
// row per period index, one column per year of `ref_rates`). New APC
// cohorts get gamma = 0.
RateSurface book_rates(const BookModelFit& fit, const RateSurface& ref_rates, const Matrix& period_paths);

ParamTable to_param_table(const BookModelFit& fit);

} // namespace longbasis
