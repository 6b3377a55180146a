#include "longbasis/config.hpp"
#include "longbasis/error.hpp"
#include "longbasis/scenario.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace longbasis {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBinName = "scenarios.bin";

template <class U>
void put(std::string& buf, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class U>
U get(const std::string& buf, std::size_t& pos) {
    require(pos + sizeof(U) <= buf.size(), ErrorKind::IoError, "scenario file is truncated");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += sizeof(U);
    return v;
}

void put_matrix(std::string& buf, const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            put(buf, std::bit_cast<std::uint64_t>(m(i, j)));
}

Matrix get_matrix(const std::string& buf, std::size_t& pos, int rows, int cols) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            m(i, j) = std::bit_cast<double>(get<std::uint64_t>(buf, pos));
    return m;
}

std::string fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

} // namespace

void write_scenario_set(const ScenarioSet& set, const fs::path& dir) {
    fs::create_directories(dir);
    std::string buf;
    const int X = set.ages.size(), H = set.years.size();
    buf.reserve(static_cast<std::size_t>(set.size()) * (8 + 24 * X * H + 4 * (H + 1)));
    for (int s = 0; s < set.size(); ++s) {
        const auto si = static_cast<std::size_t>(s);
        put(buf, set.scenario_seeds[si]);
        put_matrix(buf, set.ref_m[si]);
        put_matrix(buf, set.book_m[si]);
        put_matrix(buf, set.book_q[si]);
        for (std::uint32_t l : set.lives[si])
            put(buf, l);
    }
    {
        std::ofstream out(dir / kBinName, std::ios::binary);
        require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + (dir / kBinName).string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    const json manifest{
        {"format", "longbasis-scenarios"},
        {"version", 1},
        {"config", to_json(set.config)},
        {"ages", {set.ages.first, set.ages.last}},
        {"years", {set.years.first, set.years.last}},
        {"n_scenarios", set.size()},
        {"redraws", set.redraws},
        {"data_file", kBinName},
        {"layout",
         {{"byte_order", "little"},
          {"per_scenario", {"seed:u64", "ref_m:f64[ages*years]", "book_m:f64[ages*years]", "book_q:f64[ages*years]",
                            "lives:u32[horizon+1]"}},
          {"matrix_order", "ages fastest, then years"}}},
        {"bytes", buf.size()},
        {"fnv1a64", fnv1a(buf)}};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + (dir / "manifest.json").string());
    out << dump(manifest);
}

ScenarioSet read_scenario_set(const fs::path& dir) {
    std::ifstream min(dir / "manifest.json");
    require(static_cast<bool>(min), ErrorKind::IoError, "no manifest.json in " + dir.string());
    json m;
    try {
        m = json::parse(min);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::IoError, std::string("bad scenario manifest: ") + e.what());
    }
    require(m.value("format", "") == "longbasis-scenarios" && m.value("version", 0) == 1, ErrorKind::IoError,
            "unsupported scenario manifest");
    ScenarioSet set;
    set.config = scenario_config_from_json(m.at("config"));
    set.ages = {m.at("ages")[0].get<int>(), m.at("ages")[1].get<int>()};
    set.years = {m.at("years")[0].get<int>(), m.at("years")[1].get<int>()};
    set.redraws = m.at("redraws").get<int>();
    const int n = m.at("n_scenarios").get<int>();

    std::ifstream bin(dir / m.at("data_file").get<std::string>(), std::ios::binary);
    require(static_cast<bool>(bin), ErrorKind::IoError, "missing scenario data file in " + dir.string());
    const std::string buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    require(buf.size() == m.at("bytes").get<std::size_t>() && fnv1a(buf) == m.at("fnv1a64").get<std::string>(),
            ErrorKind::IoError, "scenario data file does not match its manifest");
    const int X = set.ages.size(), H = set.years.size();
    std::size_t pos = 0;
    for (int s = 0; s < n; ++s) {
        set.scenario_seeds.push_back(get<std::uint64_t>(buf, pos));
        set.ref_m.push_back(get_matrix(buf, pos, X, H));
        set.book_m.push_back(get_matrix(buf, pos, X, H));
        set.book_q.push_back(get_matrix(buf, pos, X, H));
        std::vector<std::uint32_t> lives;
        for (int t = 0; t <= H; ++t)
            lives.push_back(get<std::uint32_t>(buf, pos));
        set.lives.push_back(std::move(lives));
    }
    require(pos == buf.size(), ErrorKind::IoError, "scenario data file has trailing bytes");
    return set;
}

} // namespace longbasis
