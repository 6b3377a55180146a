#pragma once

#include "longbasis/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace longbasis {

struct HedgeConfig {
    double interest_rate = 0.03;
    // Years summed in the liability and the swap.
    int liability_horizon = 10;
    int annuity_start_age = 65;
    double payment = 1.0;
    std::vector<int> book_sizes{5000, 10000, 100000};
    // Optional fixed-leg curve, t = 1..horizon; empty means in-sample means.
    std::vector<double> forwards;
};

void validate(const HedgeConfig& cfg);

enum class RiskMeasure { Variance };

struct HedgeResult {
    std::vector<double> L_samples;
    std::vector<double> S_samples;
    double w = 0;
    double rr = 0;
    double var_unhedged = 0;
    double var_hedged = 0;
    RiskMeasure risk_measure = RiskMeasure::Variance;
};

// Fixed-order pairwise sum, so results do not depend on how callers batch.
double pairwise_sum(std::span<const double> x);
double sample_mean(std::span<const double> x);
// Divisor n - 1.
double sample_variance(std::span<const double> x);
double sample_covariance(std::span<const double> x, std::span<const double> y);

// payment * sum_{t=1}^{H} l_t (1+r)^-t with lives[t] = l_{65+t,t}.
double liability_pv(std::span<const std::uint32_t> lives, const HedgeConfig& cfg);

// prod_{s<t} (1 - q_s).
double survivor_index(std::span<const double> q_path, int t);

// Monte Carlo mean of the scenario survivor indices, t = 1..horizon.
std::vector<double> forward_survivor_index(const ScenarioSet& set, int horizon);
double forward_survivor_index(const ScenarioSet& set, int t, int horizon);

// sum_{t=1}^{H} (tp - forward_t) (1+r)^-t; forwards[t-1] holds forward_t.
double swap_pv(std::span<const double> q_path, std::span<const double> forwards, const HedgeConfig& cfg);

double optimal_weight(std::span<const double> L, std::span<const double> S);
double risk_reduction(std::span<const double> L, std::span<const double> S, double w);

HedgeResult evaluate_hedge(const ScenarioSet& set, const HedgeConfig& cfg);

struct HedgeReportRow {
    std::string model;
    int book_size = 0;
    double w = 0;
    double rr = 0;
    double var_unhedged = 0;
    double var_hedged = 0;
    int n_scenarios = 0;
    std::uint64_t seed = 0;
};

// One row per book size, lives redrawn on the set's rate scenarios.
std::vector<HedgeReportRow> hedge_rows(const ScenarioSet& set, const HedgeConfig& cfg);

void write_hedge_csv(std::ostream& out, std::span<const HedgeReportRow> rows);
// Models as rows, book sizes as columns, rr in percent.
void write_hedge_table(std::ostream& out, std::span<const HedgeReportRow> rows);

} // namespace longbasis
