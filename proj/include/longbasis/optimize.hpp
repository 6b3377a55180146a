#pragma once

#include "longbasis/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace longbasis {

// Objective to minimise; non-finite values are treated as a large penalty.
using Objective = std::function<double(std::span<const double>)>;

struct MinimizeResult {
    std::vector<double> x;
    double value = 0;
    int evaluations = 0;
    int iterations = 0;
    bool converged = false;
};

// Simplex search (GSL nmsimplex2). Stops when the simplex size drops below size_tol.
MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step, int max_iter,
                           double size_tol);

// Quasi-Newton (GSL vector_bfgs2) with central-difference gradients.
MinimizeResult bfgs_numeric(const Objective& f, std::vector<double> x0, int max_iter, double grad_tol,
                            double fd_step = 1e-5);

Matrix numeric_hessian(const Objective& f, std::span<const double> x, double h = 1e-4);

} // namespace longbasis
