#include "longbasis/panel.hpp"

#include "longbasis/error.hpp"
#include "longbasis/log.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace longbasis {

std::string_view to_string(Population p) {
    return p == Population::Reference ? "reference" : "book";
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::optional<Population> parse_population(std::string_view s) {
    std::string lower(s);
    for (auto& c : lower)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "reference" || lower == "r")
        return Population::Reference;
    if (lower == "book" || lower == "b")
        return Population::Book;
    return std::nullopt;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
    throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": " + why);
}

} // namespace

MortalityPanel load_panel(std::istream& in, Population population, std::optional<IntRange> age_filter,
                          std::optional<IntRange> year_filter) {
    struct Cell {
        double deaths;
        double exposure;
        std::size_t line;
    };
    std::map<std::pair<int, int>, Cell> cells;

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (line_no == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF")
            view.remove_prefix(3);
        if (view.empty())
            continue;
        auto fields = split(view);
        if (!header_seen) {
            if (fields.size() != 5 || fields[0] != "population" || fields[1] != "age" || fields[2] != "year" ||
                fields[3] != "deaths" || fields[4] != "exposure")
                malformed(line_no, "expected header population,age,year,deaths,exposure");
            header_seen = true;
            continue;
        }
        if (fields.size() != 5)
            malformed(line_no, "expected 5 fields, found " + std::to_string(fields.size()));
        auto pop = parse_population(fields[0]);
        if (!pop)
            malformed(line_no, "unknown population '" + std::string(fields[0]) + "'");
        int age = 0, year = 0;
        double deaths = 0, exposure = 0;
        if (!parse_number(fields[1], age))
            malformed(line_no, "bad age '" + std::string(fields[1]) + "'");
        if (!parse_number(fields[2], year))
            malformed(line_no, "bad year '" + std::string(fields[2]) + "'");
        if (!parse_number(fields[3], deaths) || !std::isfinite(deaths))
            malformed(line_no, "bad deaths '" + std::string(fields[3]) + "'");
        if (!parse_number(fields[4], exposure) || !std::isfinite(exposure))
            malformed(line_no, "bad exposure '" + std::string(fields[4]) + "'");
        if (*pop != population)
            continue;
        if ((age_filter && !age_filter->contains(age)) || (year_filter && !year_filter->contains(year)))
            continue;
        if (deaths < 0)
            malformed(line_no, "negative deaths");
        if (exposure <= 0)
            throw Error(ErrorKind::NonPositiveExposure,
                        "line " + std::to_string(line_no) + ": exposure " + std::string(fields[4]) + " at age " +
                            std::to_string(age) + ", year " + std::to_string(year));
        if (!cells.emplace(std::pair{age, year}, Cell{deaths, exposure, line_no}).second)
            malformed(line_no, "duplicate cell age " + std::to_string(age) + ", year " + std::to_string(year));
    }
    if (!header_seen)
        throw Error(ErrorKind::MalformedRow, "empty panel stream");
    if (cells.empty())
        throw Error(ErrorKind::MissingCell, "no " + std::string(to_string(population)) + " rows after filtering");

    IntRange ages{cells.begin()->first.first, cells.begin()->first.first};
    IntRange years{cells.begin()->first.second, cells.begin()->first.second};
    for (const auto& [key, _] : cells) {
        ages.first = std::min(ages.first, key.first);
        ages.last = std::max(ages.last, key.first);
        years.first = std::min(years.first, key.second);
        years.last = std::max(years.last, key.second);
    }

    MortalityPanel panel{population, ages, years, Matrix(ages.size(), years.size()),
                         Matrix(ages.size(), years.size())};
    for (int x = ages.first; x <= ages.last; ++x) {
        for (int t = years.first; t <= years.last; ++t) {
            auto it = cells.find({x, t});
            if (it == cells.end())
                throw Error(ErrorKind::MissingCell,
                            "no row for age " + std::to_string(x) + ", year " + std::to_string(t));
            panel.deaths(ages.index(x), years.index(t)) = it->second.deaths;
            panel.exposures(ages.index(x), years.index(t)) = it->second.exposure;
        }
    }
    return panel;
}

MortalityPanel load_panel_file(const std::filesystem::path& path, Population population,
                               std::optional<IntRange> age_filter, std::optional<IntRange> year_filter) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return load_panel(in, population, age_filter, year_filter);
}

void write_panel(std::ostream& out, const MortalityPanel& panel) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "population,age,year,deaths,exposure\n";
    for (int x = panel.ages.first; x <= panel.ages.last; ++x)
        for (int t = panel.years.first; t <= panel.years.last; ++t)
            buf << to_string(panel.population) << ',' << x << ',' << t << ',' << panel.deaths_at(x, t) << ','
                << panel.exposure_at(x, t) << '\n';
    out << buf.str();
}

void validate(const MortalityPanel& panel) {
    const auto rows = panel.ages.size();
    const auto cols = panel.years.size();
    require(rows > 0 && cols > 0, ErrorKind::MissingCell, "empty panel");
    require(panel.deaths.rows() == rows && panel.deaths.cols() == cols && panel.exposures.rows() == rows &&
                panel.exposures.cols() == cols,
            ErrorKind::MissingCell, "deaths/exposures do not match the age x year grid");
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            require(panel.exposures(i, j) > 0 && std::isfinite(panel.exposures(i, j)),
                    ErrorKind::NonPositiveExposure,
                    "age " + std::to_string(panel.ages.value(i)) + ", year " + std::to_string(panel.years.value(j)));
            require(panel.deaths(i, j) >= 0 && std::isfinite(panel.deaths(i, j)), ErrorKind::MalformedRow,
                    "negative or non-finite deaths at age " + std::to_string(panel.ages.value(i)));
        }
    }
}

MortalityPanel restrict(const MortalityPanel& panel, IntRange ages, IntRange years) {
    require(panel.ages.contains(ages) && panel.years.contains(years) && !ages.empty() && !years.empty(),
            ErrorKind::MissingCell, "restriction outside panel range");
    const int r0 = panel.ages.index(ages.first);
    const int c0 = panel.years.index(years.first);
    return {panel.population, ages, years, panel.deaths.block(r0, c0, ages.size(), years.size()),
            panel.exposures.block(r0, c0, ages.size(), years.size())};
}

RateSurface central_rates(const MortalityPanel& panel) {
    RateSurface s{panel.ages, panel.years, panel.deaths.cwiseQuotient(panel.exposures), RateKind::CentralRate};
    if (auto zeros = zero_rate_cells(s); !zeros.empty())
        log::warn("ZeroRateCell: " + std::to_string(zeros.size()) + " cells with zero deaths in " +
                  std::string(to_string(panel.population)) + " panel (first at age " +
                  std::to_string(zeros.front().age) + ", year " + std::to_string(zeros.front().year) + ")");
    return s;
}

std::vector<CellIndex> zero_rate_cells(const RateSurface& surface) {
    std::vector<CellIndex> out;
    for (int j = 0; j < surface.values.cols(); ++j)
        for (int i = 0; i < surface.values.rows(); ++i)
            if (surface.values(i, j) == 0.0)
                out.push_back({surface.ages.value(i), surface.years.value(j)});
    return out;
}

RateSurface floor_rates(const RateSurface& surface, double floor_rate, int* n_floored) {
    RateSurface out = surface;
    int count = 0;
    for (auto& v : out.values.reshaped()) {
        if (v == 0.0) {
            v = floor_rate;
            ++count;
        }
    }
    if (count > 0)
        log::warn("ZeroRateCell: floored " + std::to_string(count) + " zero rates to " + std::to_string(floor_rate));
    if (n_floored)
        *n_floored = count;
    return out;
}

double q_from_m(double m) {
    require(std::isfinite(m) && m >= 0, ErrorKind::DomainError, "central rate must be finite and >= 0");
    return -std::expm1(-m);
}

double m_from_q(double q) {
    require(q >= 0 && q < 1, ErrorKind::DomainError, "death probability must lie in [0, 1)");
    return -std::log1p(-q);
}

RateSurface q_from_m(const RateSurface& surface) {
    require(surface.kind == RateKind::CentralRate, ErrorKind::DomainError, "expected a central-rate surface");
    RateSurface out{surface.ages, surface.years, surface.values.unaryExpr([](double m) { return q_from_m(m); }),
                    RateKind::DeathProbability};
    return out;
}

RateSurface m_from_q(const RateSurface& surface) {
    require(surface.kind == RateKind::DeathProbability, ErrorKind::DomainError, "expected a probability surface");
    RateSurface out{surface.ages, surface.years, surface.values.unaryExpr([](double q) { return m_from_q(q); }),
                    RateKind::CentralRate};
    return out;
}

AlignedPair align_panels(const MortalityPanel& reference, const MortalityPanel& book) {
    const IntRange ages = intersect(reference.ages, book.ages);
    if (ages.empty())
        throw Error(ErrorKind::EmptyAgeIntersection,
                    "reference ages " + to_string(reference.ages) + " vs book ages " + to_string(book.ages));
    const IntRange overlap = intersect(reference.years, book.years);
    if (overlap.empty())
        throw Error(ErrorKind::EmptyYearOverlap,
                    "reference years " + to_string(reference.years) + " vs book years " + to_string(book.years));
    return {restrict(reference, ages, reference.years), restrict(book, ages, book.years), overlap};
}

} // namespace longbasis
