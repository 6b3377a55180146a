#pragma once

#include "longbasis/config.hpp"
#include "longbasis/error.hpp"
#include "longbasis/jump_diffusion.hpp"
#include "longbasis/lee_carter.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace longbasis {

// Module failures surface with the pipeline stage that raised them.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause);
    const std::string& stage() const noexcept { return stage_; }
    ErrorKind cause() const noexcept { return cause_; }

private:
    std::string stage_;
    ErrorKind cause_;
};

// Runs f, rethrowing module errors as StageError tagged with `stage`.
// Config and IO errors pass through untouched.
template <class F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::IoError)
            throw;
        throw StageError(stage, e);
    }
}

struct PipelineData {
    MortalityPanel reference;
    MortalityPanel book;
};

PipelineData load_data(const RunConfig& cfg);

LCFit fit_reference(const PipelineData& data);
JumpCalibration calibrate_reference(const LCParams& lc, const RunConfig& cfg);
std::vector<BookModelFit> fit_book_families(const PipelineData& data, const LCParams& lc, const RunConfig& cfg);

void write_bic_csv(std::ostream& out, const std::vector<BookModelFit>& fits);
ParamTable to_param_table(const JumpCalibration& cal);

// Percentiles of the start-age central rate across scenarios, by future year.
struct FanRow {
    std::string model;
    std::string population;
    int year = 0;
    std::array<double, 5> q{};
};
inline constexpr std::array<double, 5> kFanLevels{0.05, 0.25, 0.5, 0.75, 0.95};
std::vector<FanRow> fan_rows(const ScenarioSet& set);
void write_fan_csv(std::ostream& out, const std::vector<FanRow>& rows);

struct Comparison {
    std::vector<HedgeReportRow> rows;
    std::vector<FanRow> fans;
};
Comparison compare_models(const PipelineData& data, const RunConfig& cfg);

struct Report {
    LCFit reference;
    JumpCalibration jumps;
    std::vector<BookModelFit> books;
    Comparison comparison;
};
Report run_report(const RunConfig& cfg);
// Fixed-precision text: the golden-file format.
void write_report(std::ostream& out, const Report& report, const RunConfig& cfg);

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};
std::vector<ValidationCheck> validate_pipeline(const RunConfig& cfg);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string to_text(const std::function<void(std::ostream&)>& writer);

} // namespace longbasis
