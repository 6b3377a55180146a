#include "longbasis/alt_models.hpp"

#include "longbasis/error.hpp"
#include "longbasis/log.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace longbasis {

std::string_view to_string(JumpSource s) { return s == JumpSource::Own ? "own" : "population1"; }

JumpSource parse_jump_source(std::string_view text) {
    if (text == "own")
        return JumpSource::Own;
    if (text == "population1")
        return JumpSource::Population1;
    throw Error(ErrorKind::ConfigError, "unknown jump2 source '" + std::string(text) + "'");
}

namespace {

constexpr double kVarFloor = 1e-8;
constexpr double kPrune = 1e-12;

double variance(const std::vector<double>& v, double mean) {
    double s = 0;
    for (double x : v)
        s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

struct Gaussian2 {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;

    double log_pdf(const Eigen::Vector2d& e) const {
        const Eigen::Vector2d d = e - mean;
        const double det = cov.determinant();
        return -std::log(2 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * d.dot(cov.inverse() * d);
    }
};

double log_normal_pdf(double x, double m, double v) {
    return -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * (x - m) * (x - m) / v;
}

struct EStep {
    std::vector<std::array<double, kJointStates>> w;
    // Posterior mean and variance of each population's jump given the state.
    std::vector<std::array<Eigen::Vector2d, kJointStates>> jump_mean;
    std::vector<std::array<Eigen::Vector2d, kJointStates>> jump_var;
    std::vector<double> k1_hat;
    std::vector<double> k2_hat;
    double loglik = 0;
};

EStep run_filter(const ZhouStyleParams& p, const Vector& k1, const Vector& k2) {
    const auto T = k1.size();
    EStep out;
    out.w.resize(static_cast<std::size_t>(T));
    out.jump_mean.resize(static_cast<std::size_t>(T));
    out.jump_var.resize(static_cast<std::size_t>(T));
    out.k1_hat.resize(static_cast<std::size_t>(T));
    out.k2_hat.resize(static_cast<std::size_t>(T));
    out.k1_hat[0] = k1(0);
    out.k2_hat[0] = k2(0);
    out.w[0] = {1, 0, 0, 0};
    Eigen::Matrix2d C0;
    C0 << p.V_Z, p.V_Z, p.V_Z, p.V_Z + p.V_ZDk;
    for (Eigen::Index t = 1; t < T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const double pred1 = out.k1_hat[ti - 1] + p.mu_k;
        const double delta_prev = out.k1_hat[ti - 1] - out.k2_hat[ti - 1];
        const double pred2 = pred1 - (p.mu_Dk + p.phi_Dk * delta_prev);
        const Eigen::Vector2d e(k1(t) - pred1, k2(t) - pred2);

        std::array<double, kJointStates> logw{};
        double top = -INFINITY;
        for (int s = 0; s < kJointStates; ++s) {
            const int n1 = state_n1(s), n2 = state_n2(s);
            Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
            D(0, 0) = n1 * p.V_Y1;
            D(1, 1) = n2 * p.V_Y2;
            const Gaussian2 g{{n1 * p.mu_Y1, n2 * p.mu_Y2}, C0 + D};
            logw[s] = p.jump_joint_pmf[s] > 0 ? std::log(p.jump_joint_pmf[s]) + g.log_pdf(e) : -INFINITY;
            top = std::max(top, logw[s]);
            const Eigen::Matrix2d K = D * g.cov.inverse();
            out.jump_mean[ti][s] = g.mean + K * (e - g.mean);
            out.jump_var[ti][s] = (D - K * D).diagonal();
        }
        double sum = 0;
        for (int s = 0; s < kJointStates; ++s)
            sum += std::exp(logw[s] - top);
        out.loglik += top + std::log(sum);
        double kept = 0;
        for (int s = 0; s < kJointStates; ++s) {
            double v = std::exp(logw[s] - top) / sum;
            if (v < kPrune)
                v = 0;
            out.w[ti][s] = v;
            kept += v;
        }
        Eigen::Vector2d jump = Eigen::Vector2d::Zero();
        for (int s = 0; s < kJointStates; ++s) {
            out.w[ti][s] /= kept;
            jump += out.w[ti][s] * out.jump_mean[ti][s];
        }
        out.k1_hat[ti] = k1(t) - jump(0);
        out.k2_hat[ti] = k2(t) - jump(1);
    }
    return out;
}

ZhouStyleParams initial_params(const Vector& k1, const Vector& k2) {
    ZhouStyleParams p;
    std::vector<double> r;
    for (Eigen::Index t = 1; t < k1.size(); ++t)
        r.push_back(k1(t) - k1(t - 1));
    p.mu_k = mean_of(r);
    p.V_Z = std::max(variance(r, p.mu_k), kVarFloor);
    const double sd = std::sqrt(p.V_Z);
    p.mu_Y1 = p.mu_Y2 = 3 * sd;
    p.V_Y1 = p.V_Y2 = p.V_Z;
    std::vector<double> d(static_cast<std::size_t>(k1.size()));
    for (Eigen::Index t = 0; t < k1.size(); ++t)
        d[static_cast<std::size_t>(t)] = k1(t) - k2(t);
    try {
        const auto ar = fit_ar1(d);
        p.mu_Dk = ar.psi0;
        p.phi_Dk = std::clamp(ar.psi1, -0.99, 0.99);
        p.V_ZDk = std::max(ar.innovation_sd * ar.innovation_sd, kVarFloor);
    } catch (const Error&) {
        p.mu_Dk = mean_of(d);
        p.phi_Dk = 0;
        p.V_ZDk = kVarFloor;
    }
    p.jump_joint_pmf = {0.85, 0.05, 0.05, 0.05};
    return p;
}

double max_change(const ZhouStyleParams& a, const ZhouStyleParams& b) {
    double m = 0;
    for (auto [x, y] : {std::pair{a.mu_k, b.mu_k}, {a.V_Z, b.V_Z}, {a.mu_Y1, b.mu_Y1}, {a.mu_Y2, b.mu_Y2},
                        {a.V_Y1, b.V_Y1}, {a.V_Y2, b.V_Y2}, {a.mu_Dk, b.mu_Dk}, {a.phi_Dk, b.phi_Dk},
                        {a.V_ZDk, b.V_ZDk}})
        m = std::max(m, std::abs(x - y));
    for (int s = 0; s < kJointStates; ++s)
        m = std::max(m, std::abs(a.jump_joint_pmf[s] - b.jump_joint_pmf[s]));
    return m;
}

double robust_variance(std::vector<double> v) {
    auto mid = [](std::vector<double>& x) {
        std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2), x.end());
        return x[x.size() / 2];
    };
    const double med = mid(v);
    for (double& x : v)
        x = std::abs(x - med);
    const double mad = 1.4826 * mid(v);
    return mad * mad;
}

// Lower bounds that keep the mixture away from its degenerate optima (all
// years explained as jumps, or single-point jump components). Scales come
// from outlier-resistant moments of the raw indices.
struct VarianceFloors {
    double V_Z;
    double V_ZDk;
    double V_Y;
};

VarianceFloors variance_floors(const Vector& k1, const Vector& k2, const ZhouStyleParams& moments) {
    std::vector<double> r, e;
    for (Eigen::Index t = 1; t < k1.size(); ++t) {
        r.push_back(k1(t) - k1(t - 1));
        const double d0 = k1(t - 1) - k2(t - 1), d1 = k1(t) - k2(t);
        e.push_back(d1 - moments.mu_Dk - moments.phi_Dk * d0);
    }
    const double vz = std::max(robust_variance(r), kVarFloor);
    const double vd = std::max(robust_variance(e), kVarFloor);
    return {0.5 * vz, 0.5 * vd, vz};
}

void m_step(ZhouStyleParams& p, const EStep& e, const VarianceFloors& floors) {
    const std::size_t T = e.w.size();
    std::array<double, kJointStates> pmf{};
    for (std::size_t t = 1; t < T; ++t)
        for (int s = 0; s < kJointStates; ++s)
            pmf[s] += e.w[t][s];
    for (auto& v : pmf)
        v /= static_cast<double>(T - 1);
    p.jump_joint_pmf = pmf;

    for (int pop = 0; pop < 2; ++pop) {
        double W = 0, M = 0;
        for (std::size_t t = 1; t < T; ++t)
            for (int s = 0; s < kJointStates; ++s)
                if ((pop == 0 ? state_n1(s) : state_n2(s)) == 1) {
                    W += e.w[t][s];
                    M += e.w[t][s] * e.jump_mean[t][s](pop);
                }
        if (W < 1e-8)
            continue;
        const double mu = M / W;
        double V = 0;
        for (std::size_t t = 1; t < T; ++t)
            for (int s = 0; s < kJointStates; ++s)
                if ((pop == 0 ? state_n1(s) : state_n2(s)) == 1) {
                    const double dm = e.jump_mean[t][s](pop) - mu;
                    V += e.w[t][s] * (e.jump_var[t][s](pop) + dm * dm);
                }
        (pop == 0 ? p.mu_Y1 : p.mu_Y2) = mu;
        (pop == 0 ? p.V_Y1 : p.V_Y2) = std::max(V / W, floors.V_Y);
    }

    std::vector<double> r;
    for (std::size_t t = 1; t < T; ++t)
        r.push_back(e.k1_hat[t] - e.k1_hat[t - 1]);
    p.mu_k = mean_of(r);
    p.V_Z = std::max(variance(r, p.mu_k), floors.V_Z);

    std::vector<double> d(T);
    for (std::size_t t = 0; t < T; ++t)
        d[t] = e.k1_hat[t] - e.k2_hat[t];
    try {
        const auto ar = fit_ar1(d);
        p.mu_Dk = ar.psi0;
        p.phi_Dk = std::clamp(ar.psi1, -0.99, 0.99);
        const double m = static_cast<double>(T - 1);
        p.V_ZDk = std::max(ar.innovation_sd * ar.innovation_sd * (m - 2) / m, floors.V_ZDk);
    } catch (const Error&) {
        p.V_ZDk = floors.V_ZDk;
    }
}

ZhouStyleParams blend(const ZhouStyleParams& a, const ZhouStyleParams& b, double t) {
    ZhouStyleParams r = a;
    auto mix = [t](double x, double y) { return x + t * (y - x); };
    r.mu_k = mix(a.mu_k, b.mu_k);
    r.V_Z = mix(a.V_Z, b.V_Z);
    r.mu_Y1 = mix(a.mu_Y1, b.mu_Y1);
    r.mu_Y2 = mix(a.mu_Y2, b.mu_Y2);
    r.V_Y1 = mix(a.V_Y1, b.V_Y1);
    r.V_Y2 = mix(a.V_Y2, b.V_Y2);
    r.mu_Dk = mix(a.mu_Dk, b.mu_Dk);
    r.phi_Dk = mix(a.phi_Dk, b.phi_Dk);
    r.V_ZDk = mix(a.V_ZDk, b.V_ZDk);
    for (int s = 0; s < kJointStates; ++s)
        r.jump_joint_pmf[s] = mix(a.jump_joint_pmf[s], b.jump_joint_pmf[s]);
    return r;
}

// The filter's cleaned indices move with the parameters, so a plain M-step
// can lower the likelihood. Steps are halved until the likelihood rises.
ZhouStyleParams em_ascent(ZhouStyleParams p, const Vector& k1, const Vector& k2, const VarianceFloors& floors,
                          const ZhouFitOptions& options) {
    p.converged = false;
    EStep e = run_filter(p, k1, k2);
    for (int it = 1; it <= options.max_iter; ++it) {
        ZhouStyleParams target = p;
        m_step(target, e, floors);
        p.iterations = it;
        bool moved = false;
        for (double t = 1; t >= 1.0 / 1024; t /= 2) {
            ZhouStyleParams cand = blend(p, target, t);
            EStep ce = run_filter(cand, k1, k2);
            if (ce.loglik >= e.loglik) {
                const double change = max_change(cand, p);
                cand.iterations = it;
                p = std::move(cand);
                e = std::move(ce);
                moved = change >= options.tol;
                break;
            }
        }
        if (!moved) {
            p.converged = true;
            break;
        }
    }
    return p;
}

} // namespace

ZhouStyleParams fit_zhou_indices(const Vector& k1, const Vector& k2, const Vector& k1_tail,
                                 const ZhouFitOptions& options) {
    require(k1.size() == k2.size(), ErrorKind::DomainError, "index series must cover the same years");
    require(k1.size() >= 6, ErrorKind::DegenerateFit, "the jump model needs at least 6 overlapping years");
    const ZhouStyleParams moments = initial_params(k1, k2);
    const VarianceFloors floors = variance_floors(k1, k2, moments);
    std::vector<ZhouStyleParams> starts;
    if (options.init) {
        starts.push_back(*options.init);
    } else {
        starts.push_back(moments);
        ZhouStyleParams quiet = moments;
        quiet.jump_joint_pmf = {0.97, 0.01, 0.01, 0.01};
        starts.push_back(quiet);
        ZhouStyleParams base = moments;
        base.jump_joint_pmf = {1, 0, 0, 0};
        base = em_ascent(base, k1, k2, floors, options);
        starts.push_back(base);
        const double sd = std::sqrt(base.V_Z);
        for (double m : {3.0, -3.0}) {
            ZhouStyleParams s = base;
            s.mu_Y1 = s.mu_Y2 = m * sd;
            s.V_Y1 = s.V_Y2 = std::max(base.V_Z, floors.V_Y);
            s.jump_joint_pmf = {0.94, 0.02, 0.02, 0.02};
            starts.push_back(s);
        }
    }
    ZhouStyleParams p;
    double best = -INFINITY;
    for (const auto& start : starts) {
        ZhouStyleParams q = em_ascent(start, k1, k2, floors, options);
        const double ll = run_filter(q, k1, k2).loglik;
        if (ll > best) {
            best = ll;
            p = std::move(q);
        }
    }
    if (!p.converged) {
        if (options.strict)
            throw Error(ErrorKind::NonConvergence, "jump-state EM did not converge");
        log::warn("jump-state EM stopped at the iteration limit");
    }
    EStep e;
    e = run_filter(p, k1, k2);
    p.state_posterior = e.w;
    p.loglik = e.loglik;

    const double p1 = p.jump_joint_pmf[2] + p.jump_joint_pmf[3];
    double k1_hat = e.k1_hat.back();
    for (Eigen::Index t = 0; t < k1_tail.size(); ++t) {
        const double err = k1_tail(t) - (k1_hat + p.mu_k);
        const double l0 = (1 - p1) > 0 ? std::log(1 - p1) + log_normal_pdf(err, 0, p.V_Z) : -INFINITY;
        const double l1 = p1 > 0 ? std::log(p1) + log_normal_pdf(err, p.mu_Y1, p.V_Z + p.V_Y1) : -INFINITY;
        const double top = std::max(l0, l1);
        const double w1 = std::exp(l1 - top) / (std::exp(l0 - top) + std::exp(l1 - top));
        const double jump = p.mu_Y1 + p.V_Y1 / (p.V_Z + p.V_Y1) * (err - p.mu_Y1);
        k1_hat = k1_tail(t) - w1 * jump;
    }
    p.k1_hat_last = k1_hat;
    p.delta_hat_last = e.k1_hat.back() - e.k2_hat.back();
    p.gap = static_cast<int>(k1_tail.size());
    return p;
}

ZhouStyleParams fit_zhou(const MortalityPanel& ref_panel, const MortalityPanel& book_panel,
                         const ZhouFitOptions& options) {
    const AlignedPair pair = align_panels(ref_panel, book_panel);
    LCFitOptions lc1, lc2;
    lc1.strict = lc2.strict = options.strict;
    if (options.init) {
        if (options.init->pop1.ages == pair.reference.ages && options.init->pop1.years == pair.reference.years)
            lc1.init = &options.init->pop1;
        if (options.init->pop2.ages == pair.book.ages && options.init->pop2.years == pair.book.years)
            lc2.init = &options.init->pop2;
    }
    const LCParams pop1 = fit_lc(pair.reference, lc1).params;
    const LCParams pop2 = fit_lc(pair.book, lc2).params;
    const IntRange ov = pair.overlap_years;
    const Vector k1 = pop1.k.segment(pop1.years.index(ov.first), ov.size());
    const Vector k2 = pop2.k.segment(pop2.years.index(ov.first), ov.size());
    const int tail = std::max(0, pop1.years.last - ov.last);
    const Vector k1_tail = pop1.k.tail(tail);
    ZhouStyleParams p = fit_zhou_indices(k1, k2, k1_tail, options);
    p.pop1 = pop1;
    p.pop2 = pop2;
    p.posterior_years = ov;
    return p;
}

ZhouPaths simulate_zhou(const ZhouStyleParams& p, int horizon, Engine& rng, JumpSource source) {
    require(horizon >= 1, ErrorKind::DomainError, "horizon must be at least 1");
    require(std::abs(p.phi_Dk) < 1, ErrorKind::DomainError, "spread AR coefficient must satisfy |phi| < 1");
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    const double sz = std::sqrt(p.V_Z), sd = std::sqrt(p.V_ZDk);
    const double sy1 = std::sqrt(p.V_Y1), sy2 = std::sqrt(p.V_Y2);
    double delta = p.delta_hat_last;
    for (int g = 0; g < p.gap; ++g)
        delta = p.mu_Dk + p.phi_Dk * delta + sd * z(rng);
    double k1_hat = p.k1_hat_last;
    ZhouPaths out;
    out.k1.reserve(static_cast<std::size_t>(horizon));
    out.k2.reserve(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        k1_hat += p.mu_k + sz * z(rng);
        delta = p.mu_Dk + p.phi_Dk * delta + sd * z(rng);
        const double k2_hat = k1_hat - delta;
        const double v = u(rng);
        int state = kJointStates - 1;
        double acc = 0;
        for (int s = 0; s < kJointStates; ++s) {
            acc += p.jump_joint_pmf[s];
            if (v < acc) {
                state = s;
                break;
            }
        }
        const double y1 = p.mu_Y1 + sy1 * z(rng);
        const double y2 = p.mu_Y2 + sy2 * z(rng);
        const double j1 = state_n1(state) * y1;
        const double j2 = source == JumpSource::Own ? state_n2(state) * y2 : j1;
        out.k1.push_back(k1_hat + j1);
        out.k2.push_back(k2_hat + j2);
    }
    return out;
}

ParamTable to_param_table(const ZhouStyleParams& p) {
    ParamTable t;
    t.meta["model"] = "zhou_jumps";
    if (p.pop1.a.size() > 0) {
        t.add_vector("a_R", p.pop1.ages, p.pop1.a);
        t.add_vector("b_R", p.pop1.ages, p.pop1.b);
        t.add_vector("k_R", p.pop1.years, p.pop1.k);
    }
    if (p.pop2.a.size() > 0) {
        t.add_vector("a_B", p.pop2.ages, p.pop2.a);
        t.add_vector("b_B", p.pop2.ages, p.pop2.b);
        if (p.pop2.k.size() > 0)
            t.add_vector("k_B", p.pop2.years, p.pop2.k);
    }
    t.add_scalar("mu_k", p.mu_k);
    t.add_scalar("V_Z", p.V_Z);
    t.add_scalar("mu_Y1", p.mu_Y1);
    t.add_scalar("mu_Y2", p.mu_Y2);
    t.add_scalar("V_Y1", p.V_Y1);
    t.add_scalar("V_Y2", p.V_Y2);
    t.add_scalar("mu_Dk", p.mu_Dk);
    t.add_scalar("phi_Dk", p.phi_Dk);
    t.add_scalar("V_ZDk", p.V_ZDk);
    for (int s = 0; s < kJointStates; ++s)
        t.add("pmf", s, p.jump_joint_pmf[s]);
    t.add_scalar("k1_hat_last", p.k1_hat_last);
    t.add_scalar("delta_hat_last", p.delta_hat_last);
    t.add_scalar("gap", p.gap);
    return t;
}

ZhouStyleParams zhou_params_from_table(const ParamTable& t) {
    ZhouStyleParams p;
    p.mu_k = t.scalar("mu_k");
    p.V_Z = t.scalar("V_Z");
    p.mu_Y1 = t.scalar("mu_Y1");
    p.mu_Y2 = t.scalar("mu_Y2");
    p.V_Y1 = t.scalar("V_Y1");
    p.V_Y2 = t.scalar("V_Y2");
    p.mu_Dk = t.scalar("mu_Dk");
    p.phi_Dk = t.scalar("phi_Dk");
    p.V_ZDk = t.has("V_ZDk") ? t.scalar("V_ZDk") : 0.0;
    IntRange states;
    const Vector pmf = t.vector("pmf", &states);
    require(states == IntRange{0, kJointStates - 1}, ErrorKind::ConfigError, "pmf must list states 0..3");
    for (int s = 0; s < kJointStates; ++s)
        p.jump_joint_pmf[s] = pmf(s);
    require(std::abs(pmf.sum() - 1) <= 1e-12 && (pmf.array() >= 0).all(), ErrorKind::ConfigError,
            "joint jump pmf must be non-negative and sum to 1");
    if (t.has("a_B")) {
        p.pop2.a = t.vector("a_B", &p.pop2.ages);
        p.pop2.b = t.vector("b_B");
    }
    if (t.has("k1_hat_last"))
        p.k1_hat_last = t.scalar("k1_hat_last");
    if (t.has("delta_hat_last"))
        p.delta_hat_last = t.scalar("delta_hat_last");
    if (t.has("gap"))
        p.gap = static_cast<int>(t.scalar("gap"));
    return p;
}

namespace {

Matrix cohort_log_rates(const LCParams& lc, const Vector& gamma, const CohortGrouping& groups, const Vector& k,
                        IntRange years) {
    Matrix out(lc.a.size(), years.size());
    for (int j = 0; j < years.size(); ++j)
        for (int i = 0; i < lc.ages.size(); ++i) {
            const int g = groups.group_for_cohort(years.value(j) - lc.ages.value(i));
            out(i, j) = lc.a(i) + lc.b(i) * k(j) + (g >= 0 ? gamma(g) : 0.0);
        }
    return out;
}

} // namespace

LCCohortsFit fit_lc_cohorts(const MortalityPanel& ref_panel, const MortalityPanel& book_panel,
                            const LCCohortsOptions& options) {
    const AlignedPair pair = align_panels(ref_panel, book_panel);
    const MortalityPanel& ref = pair.reference;
    LCCohortsFit fit;
    fit.ref_cohorts = make_cohort_grouping(ref.ages, ref.years, 3);

    const LCCohortsFit* init = options.init && options.init->reference.ages == ref.ages &&
                                       options.init->reference.years == ref.years
                                   ? options.init
                                   : nullptr;
    PoissonTermState start;
    if (init) {
        start = {init->reference.a, init->reference.b, init->reference.k, init->gamma_R};
    } else {
        LCFitOptions lc;
        lc.strict = options.strict;
        const auto base = fit_lc(ref, lc).params;
        start = {base.a, base.b, base.k, Vector::Zero(fit.ref_cohorts.n_groups())};
    }
    PoissonTermSpec spec;
    spec.cohorts = &fit.ref_cohorts;
    spec.convergence = options.convergence;
    auto res = fit_poisson_terms(ref.deaths, ref.exposures, spec, std::move(start));
    if (!res.converged && options.strict)
        throw Error(ErrorKind::NonConvergence, "LC+cohort reference fit did not converge");
    fit.reference = apply_constraints(ref.ages, ref.years, res.state.a, res.state.b, res.state.k);
    fit.gamma_R = res.state.gamma;
    fit.iterations = res.iterations;
    fit.converged = res.converged;

    const Matrix log_ref = cohort_log_rates(fit.reference, fit.gamma_R, fit.ref_cohorts, fit.reference.k, ref.years);
    fit.ref_loglik = poisson_loglik(ref.deaths, ref.exposures, log_ref);
    const RateSurface ref_rates{ref.ages, ref.years, log_ref.array().exp(), RateKind::CentralRate};

    const MortalityPanel book = restrict(pair.book, pair.book.ages, pair.overlap_years);
    BookFitOptions bo;
    bo.convergence = options.convergence;
    bo.strict = options.strict;
    if (options.init)
        bo.init = &options.init->book;
    fit.book = fit_book(BookFamily::CAE, fit.reference, ref_rates, book, bo);
    fit.converged = fit.converged && fit.book.converged;
    return fit;
}

RateSurface lc_cohorts_reference_rates(const LCCohortsFit& fit, const Vector& k_path, IntRange years) {
    require(k_path.size() == years.size(), ErrorKind::DomainError, "k path length does not match the years");
    return {fit.reference.ages, years,
            cohort_log_rates(fit.reference, fit.gamma_R, fit.ref_cohorts, k_path, years).array().exp(),
            RateKind::CentralRate};
}

ParamTable to_param_table(const LCCohortsFit& fit) {
    ParamTable t = to_param_table(fit.book);
    t.meta["model"] = "lc_cohorts";
    t.add_vector("a_R", fit.reference.ages, fit.reference.a);
    t.add_vector("k_R", fit.reference.years, fit.reference.k);
    t.add_vector("gamma_R", {0, fit.ref_cohorts.n_groups() - 1}, fit.gamma_R);
    return t;
}

} // namespace longbasis
