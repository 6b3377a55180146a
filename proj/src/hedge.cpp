#include "longbasis/hedge.hpp"

#include "longbasis/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace longbasis {

void validate(const HedgeConfig& cfg) {
    require(cfg.interest_rate > -1, ErrorKind::ConfigError, "interest_rate must exceed -1");
    require(cfg.liability_horizon >= 1, ErrorKind::ConfigError, "liability_horizon must be at least 1");
    require(!cfg.book_sizes.empty(), ErrorKind::ConfigError, "book_sizes must not be empty");
    for (int b : cfg.book_sizes)
        require(b >= 1, ErrorKind::ConfigError, "book sizes must be at least 1");
    require(cfg.forwards.empty() || static_cast<int>(cfg.forwards.size()) >= cfg.liability_horizon,
            ErrorKind::ConfigError, "forward curve shorter than the liability horizon");
}

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0;
        for (double v : x)
            s += v;
        return s;
    }
    const std::size_t h = x.size() / 2;
    return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

double sample_mean(std::span<const double> x) {
    require(!x.empty(), ErrorKind::DomainError, "mean of an empty sample");
    return pairwise_sum(x) / static_cast<double>(x.size());
}

double sample_covariance(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), ErrorKind::DomainError, "samples differ in length");
    require(x.size() >= 2, ErrorKind::DomainError, "covariance needs at least two samples");
    const double mx = sample_mean(x), my = sample_mean(y);
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        p[i] = (x[i] - mx) * (y[i] - my);
    return pairwise_sum(p) / static_cast<double>(x.size() - 1);
}

double sample_variance(std::span<const double> x) { return sample_covariance(x, x); }

namespace {

double discount(const HedgeConfig& cfg, int t) { return std::pow(1 + cfg.interest_rate, -t); }

} // namespace

double liability_pv(std::span<const std::uint32_t> lives, const HedgeConfig& cfg) {
    const int H = cfg.liability_horizon;
    require(static_cast<int>(lives.size()) >= H + 1, ErrorKind::DomainError, "lives path shorter than the horizon");
    double pv = 0;
    for (int t = 1; t <= H; ++t)
        pv += static_cast<double>(lives[static_cast<std::size_t>(t)]) * discount(cfg, t);
    return cfg.payment * pv;
}

double survivor_index(std::span<const double> q_path, int t) {
    require(t >= 0 && t <= static_cast<int>(q_path.size()), ErrorKind::DomainError, "survivor index beyond the path");
    double p = 1;
    for (int s = 0; s < t; ++s) {
        const double q = q_path[static_cast<std::size_t>(s)];
        require(q >= 0 && q <= 1, ErrorKind::DomainError, "death probability outside [0, 1]");
        p *= 1 - q;
    }
    return p;
}

std::vector<double> forward_survivor_index(const ScenarioSet& set, int horizon) {
    require(set.size() > 0, ErrorKind::DomainError, "empty scenario set");
    require(horizon <= set.config.horizon, ErrorKind::DomainError, "horizon beyond the scenario set");
    std::vector<std::vector<double>> by_t(static_cast<std::size_t>(horizon), std::vector<double>(set.ref_m.size()));
    for (int s = 0; s < set.size(); ++s) {
        const auto q = set.reference_q_path(s);
        double p = 1;
        for (int t = 1; t <= horizon; ++t) {
            p *= 1 - q[static_cast<std::size_t>(t - 1)];
            by_t[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(s)] = p;
        }
    }
    std::vector<double> out;
    for (const auto& v : by_t)
        out.push_back(sample_mean(v));
    return out;
}

double forward_survivor_index(const ScenarioSet& set, int t, int horizon) {
    require(t >= 1 && t <= horizon, ErrorKind::DomainError, "forward index time outside 1..horizon");
    return forward_survivor_index(set, horizon)[static_cast<std::size_t>(t - 1)];
}

double swap_pv(std::span<const double> q_path, std::span<const double> forwards, const HedgeConfig& cfg) {
    const int H = cfg.liability_horizon;
    require(static_cast<int>(q_path.size()) >= H && static_cast<int>(forwards.size()) >= H, ErrorKind::DomainError,
            "swap legs shorter than the horizon");
    double pv = 0, p = 1;
    for (int t = 1; t <= H; ++t) {
        p *= 1 - q_path[static_cast<std::size_t>(t - 1)];
        pv += (p - forwards[static_cast<std::size_t>(t - 1)]) * discount(cfg, t);
    }
    return pv;
}

double optimal_weight(std::span<const double> L, std::span<const double> S) {
    const double v = sample_variance(S);
    require(v > 0, ErrorKind::ZeroSwapVariance, "swap value has zero variance");
    return sample_covariance(L, S) / v;
}

double risk_reduction(std::span<const double> L, std::span<const double> S, double w) {
    require(L.size() == S.size(), ErrorKind::DomainError, "samples differ in length");
    const double v = sample_variance(L);
    require(v > 0, ErrorKind::ZeroUnhedgedVariance, "liability has zero variance");
    std::vector<double> h(L.size());
    for (std::size_t i = 0; i < L.size(); ++i)
        h[i] = L[i] - w * S[i];
    return 1 - sample_variance(h) / v;
}

HedgeResult evaluate_hedge(const ScenarioSet& set, const HedgeConfig& cfg) {
    validate(cfg);
    require(set.config.start_age == cfg.annuity_start_age, ErrorKind::ConfigError,
            "scenario start age differs from the annuity start age");
    const int H = cfg.liability_horizon;
    require(H <= set.config.horizon, ErrorKind::ConfigError, "liability horizon beyond the scenario horizon");
    const std::vector<double> fwd = cfg.forwards.empty() ? forward_survivor_index(set, H) : cfg.forwards;
    HedgeResult r;
    for (int s = 0; s < set.size(); ++s) {
        r.L_samples.push_back(liability_pv(set.lives[static_cast<std::size_t>(s)], cfg));
        r.S_samples.push_back(swap_pv(set.reference_q_path(s), fwd, cfg));
    }
    r.w = optimal_weight(r.L_samples, r.S_samples);
    r.var_unhedged = sample_variance(r.L_samples);
    r.rr = risk_reduction(r.L_samples, r.S_samples, r.w);
    r.var_hedged = (1 - r.rr) * r.var_unhedged;
    return r;
}

std::vector<HedgeReportRow> hedge_rows(const ScenarioSet& set, const HedgeConfig& cfg) {
    std::vector<HedgeReportRow> rows;
    for (int size : cfg.book_sizes) {
        const HedgeResult r = evaluate_hedge(with_book_size(set, size), cfg);
        rows.push_back({std::string(to_string(set.config.model)), size, r.w, r.rr, r.var_unhedged, r.var_hedged,
                        set.size(), set.config.master_seed});
    }
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void write_hedge_csv(std::ostream& out, std::span<const HedgeReportRow> rows) {
    out << "model,book_size,w,rr,var_unhedged,var_hedged,n_scenarios,seed\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.book_size << ',' << fmt(r.w) << ',' << fmt(r.rr) << ',' << fmt(r.var_unhedged)
            << ',' << fmt(r.var_hedged) << ',' << r.n_scenarios << ',' << r.seed << '\n';
}

void write_hedge_table(std::ostream& out, std::span<const HedgeReportRow> rows) {
    std::vector<int> sizes;
    std::vector<std::string> models;
    std::map<std::pair<std::string, int>, double> cell;
    for (const auto& r : rows) {
        if (std::find(sizes.begin(), sizes.end(), r.book_size) == sizes.end())
            sizes.push_back(r.book_size);
        if (std::find(models.begin(), models.end(), r.model) == models.end())
            models.push_back(r.model);
        cell[{r.model, r.book_size}] = r.rr;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-14s", "l(65)");
    out << buf;
    for (const auto& m : models) {
        std::snprintf(buf, sizeof buf, "%14s", m.c_str());
        out << buf;
    }
    out << '\n';
    for (int size : sizes) {
        std::snprintf(buf, sizeof buf, "%-14d", size);
        out << buf;
        for (const auto& m : models) {
            const auto it = cell.find({m, size});
            if (it == cell.end())
                std::snprintf(buf, sizeof buf, "%14s", "-");
            else
                std::snprintf(buf, sizeof buf, "%13.2f%%", 100 * it->second);
            out << buf;
        }
        out << '\n';
    }
}

} // namespace longbasis
