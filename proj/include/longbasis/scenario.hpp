#pragma once

#include "longbasis/alt_models.hpp"
#include "longbasis/book_models.hpp"
#include "longbasis/jump_diffusion.hpp"
#include "longbasis/lee_carter.hpp"
#include "longbasis/panel.hpp"
#include "longbasis/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace longbasis {

enum class ScenarioModel { RenewalJump, ZhouJumps, LCCohorts };

std::string_view to_string(ScenarioModel m);
ScenarioModel parse_scenario_model(std::string_view text);
inline constexpr ScenarioModel kAllScenarioModels[] = {ScenarioModel::RenewalJump, ScenarioModel::ZhouJumps,
                                                       ScenarioModel::LCCohorts};

struct ScenarioConfig {
    int n_scenarios = 10000;
    int horizon = 10;
    std::uint64_t master_seed = 0;
    int book_size_l65 = 10000;
    int start_age = 65;
    ScenarioModel model = ScenarioModel::RenewalJump;
    // Book family under the renewal-jump reference.
    BookFamily book_family = BookFamily::CAE;
    RenewalFamily renewal_family = RenewalFamily::Weibull;
    JumpPersistence persistence = JumpPersistence::OneYear;
    JumpSource jump2_source = JumpSource::Own;
    // Replaces zero resampled reference rates when positive.
    double floor_rate = 0;
    // Off: every scenario reuses the base fit (process error only).
    bool resample = true;
    int threads = 1;
    // Refit attempts per scenario before the scenario counts as failed.
    int max_attempts = 20;
};

void validate(const ScenarioConfig& cfg);

// Everything fitted once on the observed panels.
struct BaseFit {
    ScenarioModel model = ScenarioModel::RenewalJump;
    AlignedPair data;
    LCParams reference;
    JumpCalibration jumps;
    BookModelFit book;
    // One per book period index.
    std::vector<AR1Params> book_ar;
    ZhouStyleParams zhou;
    LCCohortsFit cohorts;
    // Fitted central rates over each panel's own window.
    Matrix ref_fitted;
    Matrix book_fitted;
};

BaseFit fit_base(const MortalityPanel& ref_panel, const MortalityPanel& book_panel, const ScenarioConfig& cfg);

struct ResampledPanels {
    MortalityPanel reference;
    MortalityPanel book;
};

// Reference deaths ~ Poisson(m E), book deaths ~ Binomial(round(E), 1 - exp(-m))
// around the base fitted rates.
ResampledPanels resample_panels(const BaseFit& base, Engine& rng);

struct ScenarioSet {
    ScenarioConfig config;
    IntRange ages;
    // Future calendar years, the first one right after the reference data.
    IntRange years;
    // One entry per scenario, ages x future years.
    std::vector<Matrix> ref_m;
    std::vector<Matrix> book_m;
    std::vector<Matrix> book_q;
    // l_{start+t,t}, t = 0..horizon.
    std::vector<std::vector<std::uint32_t>> lives;
    // Seed actually used by each scenario after redraws.
    std::vector<std::uint64_t> scenario_seeds;
    int redraws = 0;

    int size() const { return static_cast<int>(ref_m.size()); }
    // q^R_{start+t, t}, t = 0..horizon-1.
    std::vector<double> reference_q_path(int s) const;
    std::vector<double> book_q_path(int s) const;
};

// Seed of attempt `attempt` at scenario `s`.
std::uint64_t scenario_seed(std::uint64_t master, int s, int attempt);

ScenarioSet bootstrap_scenarios(const MortalityPanel& ref_panel, const MortalityPanel& book_panel,
                                const ScenarioConfig& cfg);
ScenarioSet bootstrap_scenarios(const BaseFit& base, const ScenarioConfig& cfg);

// l_{t+1} ~ Binomial(l_t, 1 - q_t).
std::vector<std::uint32_t> simulate_lives(std::uint32_t l0, std::span<const double> q_path, Engine& rng);

// Lives paths for another initial size, drawn from the same per-scenario
// lives streams, so rates are shared across sizes.
ScenarioSet with_book_size(const ScenarioSet& set, int book_size_l65);

// Persistence: `manifest.json` plus `scenarios.bin`. Per scenario, in order:
// seed (u64), ref m, book m, book q (f64, ages fastest, then years), lives
// (u32, horizon + 1 values); all little-endian.
void write_scenario_set(const ScenarioSet& set, const std::filesystem::path& dir);
ScenarioSet read_scenario_set(const std::filesystem::path& dir);

} // namespace longbasis
