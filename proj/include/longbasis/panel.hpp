#pragma once

#include "longbasis/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace longbasis {

enum class Population { Reference, Book };

std::string_view to_string(Population p);

// Deaths and exposures for one population over a rectangular age x year grid.
// Rows of the matrices are ages, columns are calendar years.
struct MortalityPanel {
    Population population = Population::Reference;
    IntRange ages;
    IntRange years;
    Matrix deaths;
    Matrix exposures;

    double deaths_at(int age, int year) const { return deaths(ages.index(age), years.index(year)); }
    double exposure_at(int age, int year) const { return exposures(ages.index(age), years.index(year)); }
};

enum class RateKind { CentralRate, DeathProbability };

struct RateSurface {
    IntRange ages;
    IntRange years;
    Matrix values;
    RateKind kind = RateKind::CentralRate;

    double at(int age, int year) const { return values(ages.index(age), years.index(year)); }
};

struct CellIndex {
    int age;
    int year;
};

// Parses the panel CSV (header `population,age,year,deaths,exposure`). Rows
// tagged with the other population are ignored, rows outside the filters are
// dropped, and the remaining grid must be complete.
MortalityPanel load_panel(std::istream& in, Population population,
                          std::optional<IntRange> age_filter = std::nullopt,
                          std::optional<IntRange> year_filter = std::nullopt);

MortalityPanel load_panel_file(const std::filesystem::path& path, Population population,
                               std::optional<IntRange> age_filter = std::nullopt,
                               std::optional<IntRange> year_filter = std::nullopt);

void write_panel(std::ostream& out, const MortalityPanel& panel);

// Throws unless the panel satisfies its shape and sign invariants.
void validate(const MortalityPanel& panel);

MortalityPanel restrict(const MortalityPanel& panel, IntRange ages, IntRange years);

// m = D / E cell by cell. Cells with zero deaths give m = 0 and are logged.
RateSurface central_rates(const MortalityPanel& panel);

std::vector<CellIndex> zero_rate_cells(const RateSurface& surface);

// Replaces exact-zero central rates by `floor_rate`, logging a warning.
RateSurface floor_rates(const RateSurface& surface, double floor_rate, int* n_floored = nullptr);

double q_from_m(double m);
double m_from_q(double q);
RateSurface q_from_m(const RateSurface& surface);
RateSurface m_from_q(const RateSurface& surface);

struct AlignedPair {
    MortalityPanel reference;
    MortalityPanel book;
    IntRange overlap_years;
};

// Restricts both panels to the common age range; each keeps its own years.
AlignedPair align_panels(const MortalityPanel& reference, const MortalityPanel& book);

} // namespace longbasis
