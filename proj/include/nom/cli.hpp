#pragma once

#include "nom/baselines.hpp"
#include "nom/error.hpp"
#include "nom/gradcheck.hpp"
#include "nom/nom.hpp"
#include "nom/problems.hpp"
#include "nom/surrogate.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nom::cli {

/// Written into every JSON report.
inline constexpr int format_version = 1;

enum ExitCode : int {
    exit_ok = 0,
    exit_failed = 1, ///< run completed but something was infeasible, errored or failed a check
    exit_usage = 2,  ///< bad flags, config or problem
};

/// Bad command line or config file.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct CompareOptions {
    std::vector<std::string> optimizers{"nom", "nelder-mead", "de", "pso"};
};

struct BaselineOptions {
    double rho = 1e4;
    std::size_t start_grid_n = 10000; ///< lattice used to seed Nelder-Mead
    NelderMeadOptions nelder_mead;
    DeOptions de;
    PsoOptions pso;
};

struct MooOptions {
    std::size_t n_sweep = 20;
    std::size_t oracle_resolution = 400;
    /// Largest allowed dominance margin of an oracle point over a sweep
    /// point, as a fraction of each objective's range over the oracle front.
    double excess_tolerance = 0.02;
};

struct MinimaStudyOptions {
    std::size_t repetitions = 10;
    std::size_t starting_points = 5; ///< the multi-start column
};

struct GradCheckConfig {
    std::vector<std::string> suites = gradcheck_suites();
    GradCheckOptions options;
};

/// Everything a command needs. Defaults are the published hyperparameters;
/// the global seed is copied into every seeded component by finalize().
struct RunConfig {
    /// Registered problem name or path to a problem file; empty selects the
    /// command's default problem.
    std::string problem;
    std::optional<nlohmann::json> inline_problem;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    FitOptions fit;
    NomConfig nom;
    CompareOptions compare;
    BaselineOptions baselines;
    MooOptions moo;
    MinimaStudyOptions minima_study;
    GradCheckConfig gradcheck;

    /// Propagates the seed and validates ranges; throws ConfigError.
    void finalize();
};

/// Overlays a JSON config onto `cfg`. Sections: problem (name, path or
/// inline problem object), seed, out, train, nom, compare, baselines, moo,
/// minima_study, gradcheck. Unknown keys and wrong types throw ConfigError.
void apply_config(const nlohmann::json& j, RunConfig& cfg);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// The effective configuration in the same shape apply_config reads.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Problem named by the config, or `fallback` when none is named.
ProblemSpec resolve_problem(const RunConfig& cfg, std::string_view fallback);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Writes via a temporary sibling file and a rename; creates parent dirs.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Small CSV builder: comma-separated, LF line endings, doubles in
/// shortest round-trip form.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter& cell(double v);
    CsvWriter& cell(std::int64_t v);
    CsvWriter& cell(std::size_t v) { return cell(static_cast<std::int64_t>(v)); }
    CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
    CsvWriter& cell(bool v) { return cell(static_cast<std::int64_t>(v ? 1 : 0)); }
    CsvWriter& cell(std::string_view v);
    CsvWriter& cell(const char* v) { return cell(std::string_view(v)); }
    CsvWriter& empty_cell() { return cell(std::string_view{}); }
    /// Ends the row; throws Error if the cell count does not match the header.
    void end_row();
    const std::string& str() const { return text_; }

private:
    void append(std::string_view raw);
    std::size_t columns_;
    std::size_t filled_ = 0;
    std::string text_;
};

/// Surrogate for objective `index`, loaded from `<out>/<problem>.f<index+1>.nomsurr`
/// if present, otherwise fitted with cfg.fit and saved there.
std::shared_ptr<const SurrogateModel> surrogate_for(const ProblemSpec& p, std::size_t index,
                                                    const RunConfig& cfg, std::ostream& log);
std::filesystem::path model_path(const RunConfig& cfg, const ProblemSpec& p, std::size_t index);

int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_compare(const RunConfig& cfg, std::ostream& log);
int cmd_moo(const RunConfig& cfg, std::ostream& log);
int cmd_minima_study(const RunConfig& cfg, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point (args excludes the program name).
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace nom::cli
