#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pertsde/models.hpp"
#include "pertsde/paths.hpp"
#include "pertsde/verify.hpp"

namespace pertsde::cli {

/// Bad configuration; field() names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class Command { Simulate, Verify, Law, Picard, Convergence };

std::string_view to_string(Command command) noexcept;

using KeyValues = std::map<std::string, std::string>;

/// Every accepted configuration key except the threshold.<metric> family.
const std::vector<std::string>& known_keys();

/// Flat `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Later duplicates win.
KeyValues parse_config_text(std::string_view text);
KeyValues read_config_file(const std::filesystem::path& path);

/// Preset grammar `name[:p1,p2,...]`; `const<c>` is shorthand for `const:<c>`.
///   coefficients: const:c  affine:a,c  sine:offset,amp[,freq]  piecewise:below,above[,threshold]
Coefficient parse_coefficient(std::string_view field, std::string_view text);
///   zero  atan:k,c
MaxDriftCoefficient parse_max_drift(std::string_view field, std::string_view text);
///   linear:c  tanh:c
MonotoneTransform parse_transform(std::string_view field, std::string_view text);
///   ramp:a0,a1
TimeDependentWeight parse_weight(std::string_view field, std::string_view text);

struct OutputOptions {
    std::filesystem::path directory = ".";
    bool csv = true;
    bool json = true;
    std::size_t sample_paths_out = 10;
};

struct RunConfig {
    Command command = Command::Simulate;
    ProblemSpec problem;
    double t_end = 1.0;
    std::size_t n_steps = 1024;
    std::size_t n_paths = 100;
    std::uint64_t seed = 1;
    OutputOptions output;
    std::map<std::string, double> thresholds;

    std::string verify_study = "uniqueness_gap";
    LawKind law_kind = LawKind::MaxLaw;
    std::size_t levels = 4;
    LawOptions law;
    PicardRateOptions picard;
};

/// Builds and checks a RunConfig. `default_out_dir` is used when out_dir is
/// absent. Throws ConfigError on unknown keys, unknown presets, malformed
/// numbers and parameter violations that leave the schemes undefined.
RunConfig build_config(const KeyValues& values, const std::string& default_out_dir = ".");

struct RunResult {
    int exit_code = 0;
    StudyReport report;
    std::vector<std::filesystem::path> files;
};

/// Runs the command and writes paths.csv / metrics.csv (csv) and report.json
/// (json). Exit code 0 on pass, 1 on fail.
RunResult run(const RunConfig& config);

std::string report_json(const StudyReport& report);
std::string per_path_csv(const StudyReport& report);

/// Command-line entry point. Exit codes: 0 pass, 1 fail, 2 config or
/// validation error.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pertsde::cli
