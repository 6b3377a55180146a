#pragma once

#include "longbasis/lee_carter.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace longbasis {

// Parameter CSV: header `param,index,value`. Numeric rows carry a named
// parameter, an integer index (age, year, cohort or 0 for scalars) and a
// decimal value; `meta` rows carry a key in the index column and free text in
// the value column.
struct ParamRow {
    std::string param;
    int index = 0;
    double value = 0;
};

struct ParamTable {
    std::vector<ParamRow> rows;
    std::map<std::string, std::string> meta;

    void add(const std::string& param, int index, double value) { rows.push_back({param, index, value}); }
    void add_vector(const std::string& param, IntRange range, const Vector& v);
    void add_scalar(const std::string& param, double value) { add(param, 0, value); }

    bool has(const std::string& param) const;
    double scalar(const std::string& param) const;
    // Values of `param` ordered by index; the indices must be contiguous.
    Vector vector(const std::string& param, IntRange* range = nullptr) const;
};

ParamTable read_param_csv(std::istream& in);
ParamTable read_param_csv_file(const std::filesystem::path& path);
void write_param_csv(std::ostream& out, const ParamTable& table);
void write_param_csv_file(const std::filesystem::path& path, const ParamTable& table);

ParamTable to_param_table(const LCParams& params);
// Reads `a`, `b` (by age) and optionally `k` (by year).
LCParams lc_params_from_table(const ParamTable& table);

} // namespace longbasis
