#include "longbasis/param_csv.hpp"

#include "longbasis/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace longbasis {

void ParamTable::add_vector(const std::string& param, IntRange range, const Vector& v) {
    for (int i = 0; i < range.size(); ++i)
        add(param, range.value(i), v(i));
}

bool ParamTable::has(const std::string& param) const {
    return std::any_of(rows.begin(), rows.end(), [&](const ParamRow& r) { return r.param == param; });
}

double ParamTable::scalar(const std::string& param) const {
    for (const auto& r : rows)
        if (r.param == param)
            return r.value;
    throw Error(ErrorKind::ConfigError, "parameter '" + param + "' not found");
}

Vector ParamTable::vector(const std::string& param, IntRange* range) const {
    std::vector<std::pair<int, double>> items;
    for (const auto& r : rows)
        if (r.param == param)
            items.emplace_back(r.index, r.value);
    if (items.empty())
        throw Error(ErrorKind::ConfigError, "parameter '" + param + "' not found");
    std::sort(items.begin(), items.end());
    for (std::size_t i = 1; i < items.size(); ++i)
        if (items[i].first != items[i - 1].first + 1)
            throw Error(ErrorKind::ConfigError, "parameter '" + param + "' has non-contiguous indices");
    Vector v(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = items[i].second;
    if (range)
        *range = {items.front().first, items.back().first};
    return v;
}

ParamTable read_param_csv(std::istream& in) {
    ParamTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        if (!header) {
            if (line != "param,index,value")
                throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": expected header param,index,value");
            header = true;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": expected 3 fields");
        std::string param = line.substr(0, c1);
        std::string index = line.substr(c1 + 1, c2 - c1 - 1);
        std::string value = line.substr(c2 + 1);
        if (param == "meta") {
            table.meta[index] = value;
            continue;
        }
        ParamRow row{param, 0, 0};
        auto [p1, e1] = std::from_chars(index.data(), index.data() + index.size(), row.index);
        const char* vb = value.data() + (value.starts_with('+') ? 1 : 0);
        auto [p2, e2] = std::from_chars(vb, value.data() + value.size(), row.value);
        if (e1 != std::errc() || p1 != index.data() + index.size() || e2 != std::errc() ||
            p2 != value.data() + value.size())
            throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": bad index or value");
        table.rows.push_back(std::move(row));
    }
    if (!header)
        throw Error(ErrorKind::MalformedRow, "empty parameter file");
    return table;
}

ParamTable read_param_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return read_param_csv(in);
}

void write_param_csv(std::ostream& out, const ParamTable& table) {
    std::ostringstream buf;
    buf << "param,index,value\n";
    for (const auto& [key, value] : table.meta)
        buf << "meta," << key << ',' << value << '\n';
    char num[64];
    for (const auto& r : table.rows) {
        auto [end, ec] = std::to_chars(num, num + sizeof num, r.value);
        buf << r.param << ',' << r.index << ',' << std::string_view(num, static_cast<std::size_t>(end - num)) << '\n';
    }
    out << buf.str();
}

void write_param_csv_file(const std::filesystem::path& path, const ParamTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    write_param_csv(out, table);
}

ParamTable to_param_table(const LCParams& params) {
    ParamTable t;
    t.add_vector("a", params.ages, params.a);
    t.add_vector("b", params.ages, params.b);
    t.add_vector("k", params.years, params.k);
    return t;
}

LCParams lc_params_from_table(const ParamTable& table) {
    LCParams p;
    IntRange b_ages;
    p.a = table.vector("a", &p.ages);
    p.b = table.vector("b", &b_ages);
    if (!(b_ages == p.ages))
        throw Error(ErrorKind::ConfigError, "a and b cover different ages");
    if (table.has("k"))
        p.k = table.vector("k", &p.years);
    return p;
}

} // namespace longbasis
