#include "longbasis/config.hpp"

#include "longbasis/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace longbasis {

using nlohmann::json;

namespace {

std::string_view level_name(log::Level l) {
    switch (l) {
    case log::Level::Error:
        return "error";
    case log::Level::Warn:
        return "warn";
    case log::Level::Info:
        return "info";
    case log::Level::Debug:
        return "debug";
    }
    return "warn";
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    require(j.is_object(), ErrorKind::ConfigError, where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        require(ok.count(key) > 0, ErrorKind::ConfigError, "unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, where + "." + key + ": " + e.what());
    }
}

std::optional<IntRange> read_range(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    std::vector<int> v;
    read(j, key, v, where);
    require(v.size() == 2 && v[0] <= v[1], ErrorKind::ConfigError, where + "." + key + " must be [first, last]");
    return IntRange{v[0], v[1]};
}

json range_json(const std::optional<IntRange>& r) {
    return r ? json::array({r->first, r->last}) : json(nullptr);
}

std::string read_string(const json& j, const char* key, const std::string& where, std::string fallback) {
    read(j, key, fallback, where);
    return fallback;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    return p.empty() || p.is_absolute() || base.empty() ? p : base / p;
}

std::vector<double> read_forward_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open forward curve " + path.string());
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0)
            continue;
        const auto comma = line.find(',');
        try {
            out.push_back(std::stod(comma == std::string::npos ? line : line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorKind::ConfigError, "bad forward curve line '" + line + "'");
        }
    }
    return out;
}

} // namespace

json to_json(const ScenarioConfig& c) {
    return {{"n_scenarios", c.n_scenarios},
            {"horizon", c.horizon},
            {"master_seed", c.master_seed},
            {"book_size_l65", c.book_size_l65},
            {"start_age", c.start_age},
            {"model", to_string(c.model)},
            {"book_family", to_string(c.book_family)},
            {"renewal_family", to_string(c.renewal_family)},
            {"jump_persistence", to_string(c.persistence)},
            {"jump2_source", to_string(c.jump2_source)},
            {"floor_rate", c.floor_rate},
            {"resample", c.resample},
            {"max_attempts", c.max_attempts}};
}

ScenarioConfig scenario_config_from_json(const json& j) {
    const std::string w = "scenario";
    check_keys(j, w,
               {"n_scenarios", "horizon", "master_seed", "book_size_l65", "start_age", "model", "book_family",
                "renewal_family", "jump_persistence", "jump2_source", "floor_rate", "resample", "threads",
                "max_attempts"});
    ScenarioConfig c;
    read(j, "n_scenarios", c.n_scenarios, w);
    read(j, "horizon", c.horizon, w);
    require(j.contains("master_seed"), ErrorKind::ConfigError, "scenario.master_seed is required");
    read(j, "master_seed", c.master_seed, w);
    read(j, "book_size_l65", c.book_size_l65, w);
    read(j, "start_age", c.start_age, w);
    c.model = parse_scenario_model(read_string(j, "model", w, "renewal_jump"));
    c.book_family = parse_book_family(read_string(j, "book_family", w, "cae"));
    c.renewal_family = parse_renewal_family(read_string(j, "renewal_family", w, "weibull"));
    c.persistence = parse_jump_persistence(read_string(j, "jump_persistence", w, "one_year"));
    c.jump2_source = parse_jump_source(read_string(j, "jump2_source", w, "own"));
    read(j, "floor_rate", c.floor_rate, w);
    read(j, "resample", c.resample, w);
    read(j, "threads", c.threads, w);
    read(j, "max_attempts", c.max_attempts, w);
    validate(c);
    return c;
}

json to_json(const HedgeConfig& c) {
    return {{"interest_rate", c.interest_rate},     {"liability_horizon", c.liability_horizon},
            {"annuity_start_age", c.annuity_start_age}, {"payment", c.payment},
            {"book_sizes", c.book_sizes},           {"forwards", c.forwards.empty() ? json(nullptr) : json(c.forwards)}};
}

HedgeConfig hedge_config_from_json(const json& j) {
    const std::string w = "hedge";
    check_keys(j, w, {"interest_rate", "liability_horizon", "annuity_start_age", "payment", "book_sizes", "forwards"});
    HedgeConfig c;
    read(j, "interest_rate", c.interest_rate, w);
    read(j, "liability_horizon", c.liability_horizon, w);
    read(j, "annuity_start_age", c.annuity_start_age, w);
    read(j, "payment", c.payment, w);
    read(j, "book_sizes", c.book_sizes, w);
    if (j.contains("forwards") && j.at("forwards").is_array())
        read(j, "forwards", c.forwards, w);
    validate(c);
    return c;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j, "config",
               {"data", "renewal", "book", "zhou", "compare", "scenario", "hedge", "output", "log_level"});
    RunConfig c;
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, "data", {"reference", "book", "ages", "reference_years", "book_years"});
        c.data.reference = resolve(read_string(d, "reference", "data", ""), base_dir);
        c.data.book = resolve(read_string(d, "book", "data", ""), base_dir);
        c.data.ages = read_range(d, "ages", "data");
        c.data.reference_years = read_range(d, "reference_years", "data");
        c.data.book_years = read_range(d, "book_years", "data");
    }
    json scen = j.contains("scenario") ? j.at("scenario") : json::object();
    if (j.contains("renewal")) {
        const json& r = j.at("renewal");
        check_keys(r, "renewal", {"family", "starts"});
        if (r.contains("family"))
            scen["renewal_family"] = r.at("family");
        read(r, "starts", c.jump_starts, "renewal");
        require(c.jump_starts >= 1, ErrorKind::ConfigError, "renewal.starts must be at least 1");
    }
    if (j.contains("zhou")) {
        const json& z = j.at("zhou");
        check_keys(z, "zhou", {"jump2_source"});
        if (z.contains("jump2_source"))
            scen["jump2_source"] = z.at("jump2_source");
    }
    c.scenario = scenario_config_from_json(scen);
    if (j.contains("book")) {
        const json& b = j.at("book");
        check_keys(b, "book", {"families"});
        std::vector<std::string> names;
        read(b, "families", names, "book");
        c.book_families.clear();
        for (const auto& n : names)
            c.book_families.push_back(parse_book_family(n));
        require(!c.book_families.empty(), ErrorKind::ConfigError, "book.families must not be empty");
    }
    if (j.contains("compare")) {
        const json& m = j.at("compare");
        check_keys(m, "compare", {"models"});
        std::vector<std::string> names;
        read(m, "models", names, "compare");
        c.compare_models.clear();
        for (const auto& n : names)
            c.compare_models.push_back(parse_scenario_model(n));
        require(!c.compare_models.empty(), ErrorKind::ConfigError, "compare.models must not be empty");
    }
    if (j.contains("hedge")) {
        const json& h = j.at("hedge");
        c.hedge = hedge_config_from_json(h);
        if (h.contains("forwards") && h.at("forwards").is_string())
            c.hedge.forwards = read_forward_file(resolve(h.at("forwards").get<std::string>(), base_dir));
        validate(c.hedge);
    }
    if (j.contains("output"))
        c.output_dir = resolve(read_string(j, "output", "config", "out"), base_dir);
    c.log_level = log::parse_level(read_string(j, "log_level", "config", "warn"));
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, "config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
    std::vector<std::string> families, models;
    for (auto f : c.book_families)
        families.emplace_back(to_string(f));
    for (auto m : c.compare_models)
        models.emplace_back(to_string(m));
    json scen = to_json(c.scenario);
    scen["threads"] = c.scenario.threads;
    return {{"data",
             {{"reference", c.data.reference.generic_string()},
              {"book", c.data.book.generic_string()},
              {"ages", range_json(c.data.ages)},
              {"reference_years", range_json(c.data.reference_years)},
              {"book_years", range_json(c.data.book_years)}}},
            {"renewal", {{"family", to_string(c.scenario.renewal_family)}, {"starts", c.jump_starts}}},
            {"book", {{"families", families}}},
            {"zhou", {{"jump2_source", to_string(c.scenario.jump2_source)}}},
            {"compare", {{"models", models}}},
            {"scenario", scen},
            {"hedge", to_json(c.hedge)},
            {"output", c.output_dir.generic_string()},
            {"log_level", level_name(c.log_level)}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

} // namespace longbasis
