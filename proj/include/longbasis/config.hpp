#pragma once

#include "longbasis/book_models.hpp"
#include "longbasis/hedge.hpp"
#include "longbasis/log.hpp"
#include "longbasis/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace longbasis {

struct DataConfig {
    std::filesystem::path reference;
    std::filesystem::path book;
    std::optional<IntRange> ages;
    std::optional<IntRange> reference_years;
    std::optional<IntRange> book_years;
};

struct RunConfig {
    DataConfig data;
    int jump_starts = 8;
    std::vector<BookFamily> book_families{std::begin(kAllBookFamilies), std::end(kAllBookFamilies)};
    std::vector<ScenarioModel> compare_models{std::begin(kAllScenarioModels), std::end(kAllScenarioModels)};
    ScenarioConfig scenario;
    HedgeConfig hedge;
    std::filesystem::path output_dir = "out";
    log::Level log_level = log::Level::Warn;
};

// Relative paths resolve against the config file's directory. The master
// seed is required.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
// Every field, defaults included.
nlohmann::json to_json(const RunConfig& cfg);

nlohmann::json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HedgeConfig& cfg);
HedgeConfig hedge_config_from_json(const nlohmann::json& j);

// Two-space indented JSON with a trailing newline.
std::string dump(const nlohmann::json& j);

} // namespace longbasis
