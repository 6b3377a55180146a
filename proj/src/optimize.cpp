#include "longbasis/optimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <memory>

namespace longbasis {
namespace {

constexpr double kPenalty = 1e100;

struct Counted {
    const Objective* f;
    int evaluations = 0;

    double operator()(std::span<const double> x) {
        ++evaluations;
        const double v = (*f)(x);
        return std::isfinite(v) ? std::min(v, kPenalty) : kPenalty;
    }
};

std::span<const double> view(const gsl_vector* v) { return {v->data, v->size}; }

struct VectorDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
using VectorPtr = std::unique_ptr<gsl_vector, VectorDeleter>;

VectorPtr make_vector(const std::vector<double>& values) {
    VectorPtr v(gsl_vector_alloc(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        gsl_vector_set(v.get(), i, values[i]);
    return v;
}

void disable_gsl_abort() {
    static const bool once = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)once;
}

double nm_callback(const gsl_vector* x, void* params) { return (*static_cast<Counted*>(params))(view(x)); }

struct GradientContext {
    Counted* f;
    double h;
    std::vector<double> scratch;
};

double fd_f(const gsl_vector* x, void* params) {
    auto* ctx = static_cast<GradientContext*>(params);
    return (*ctx->f)(view(x));
}

void fd_df(const gsl_vector* x, void* params, gsl_vector* g) {
    auto* ctx = static_cast<GradientContext*>(params);
    ctx->scratch.assign(x->data, x->data + x->size);
    for (std::size_t i = 0; i < x->size; ++i) {
        const double xi = ctx->scratch[i];
        const double h = ctx->h * std::max(1.0, std::abs(xi));
        ctx->scratch[i] = xi + h;
        const double up = (*ctx->f)(ctx->scratch);
        ctx->scratch[i] = xi - h;
        const double down = (*ctx->f)(ctx->scratch);
        ctx->scratch[i] = xi;
        gsl_vector_set(g, i, (up - down) / (2 * h));
    }
}

void fd_fdf(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
    *f = fd_f(x, params);
    fd_df(x, params, g);
}

} // namespace

MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step, int max_iter,
                           double size_tol) {
    disable_gsl_abort();
    Counted counted{&f};
    const std::size_t n = x0.size();
    gsl_multimin_function fn{&nm_callback, n, &counted};
    auto x = make_vector(x0);
    auto ss = make_vector(step);
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), ss.get());

    MinimizeResult result;
    for (int it = 0; it < max_iter; ++it) {
        result.iterations = it + 1;
        if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), size_tol) == GSL_SUCCESS) {
            result.converged = true;
            break;
        }
    }
    const gsl_vector* best = gsl_multimin_fminimizer_x(s.get());
    result.x.assign(best->data, best->data + best->size);
    result.value = gsl_multimin_fminimizer_minimum(s.get());
    result.evaluations = counted.evaluations;
    return result;
}

MinimizeResult bfgs_numeric(const Objective& f, std::vector<double> x0, int max_iter, double grad_tol,
                            double fd_step) {
    disable_gsl_abort();
    Counted counted{&f};
    GradientContext ctx{&counted, fd_step, {}};
    const std::size_t n = x0.size();
    gsl_multimin_function_fdf fn{&fd_f, &fd_df, &fd_fdf, n, &ctx};
    auto x = make_vector(x0);
    std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> s(
        gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n), &gsl_multimin_fdfminimizer_free);
    gsl_multimin_fdfminimizer_set(s.get(), &fn, x.get(), 0.01, 0.1);

    MinimizeResult result;
    for (int it = 0; it < max_iter; ++it) {
        result.iterations = it + 1;
        if (gsl_multimin_fdfminimizer_iterate(s.get()) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_gradient(gsl_multimin_fdfminimizer_gradient(s.get()), grad_tol) == GSL_SUCCESS) {
            result.converged = true;
            break;
        }
    }
    const gsl_vector* best = gsl_multimin_fdfminimizer_x(s.get());
    result.x.assign(best->data, best->data + best->size);
    result.value = gsl_multimin_fdfminimizer_minimum(s.get());
    result.evaluations = counted.evaluations;
    return result;
}

Matrix numeric_hessian(const Objective& f, std::span<const double> x, double h) {
    const auto n = static_cast<Eigen::Index>(x.size());
    std::vector<double> p(x.begin(), x.end());
    auto eval = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
        p[static_cast<std::size_t>(i)] += di;
        p[static_cast<std::size_t>(j)] += dj;
        const double v = f(p);
        p[static_cast<std::size_t>(i)] -= di;
        p[static_cast<std::size_t>(j)] -= dj;
        return v;
    };
    Matrix H(n, n);
    const double f0 = f(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        H(i, i) = (eval(i, h, i, 0) - 2 * f0 + eval(i, -h, i, 0)) / (h * h);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (eval(i, h, j, h) - eval(i, h, j, -h) - eval(i, -h, j, h) + eval(i, -h, j, -h)) /
                             (4 * h * h);
            H(i, j) = H(j, i) = v;
        }
    }
    return H;
}

} // namespace longbasis
