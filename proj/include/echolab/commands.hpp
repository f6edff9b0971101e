#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echolab/baseline.hpp"
#include "echolab/echo.hpp"
#include "echolab/forward.hpp"
#include "echolab/inference.hpp"
#include "echolab/io.hpp"
#include "echolab/trajectories.hpp"

namespace echolab {

enum class OutputFormat { csv, json };

std::string_view to_string(OutputFormat f);
OutputFormat output_format_from_string(std::string_view s);

struct EchoBlock {
    std::vector<Interpolation> methods{Interpolation::monotone_cubic, Interpolation::linear};
    Extension extension = Extension::hold;
    std::size_t nodes = 48;
    double half_width = 6.0;
    bool check_convergence = true;
    double tau_max_ms = 6.0;
    double tau_step_ms = 0.05;
    PlateauOptions plateau;
    /// Also compute one curve per fitted run (requires a fit summary as input).
    bool family = false;
    /// Run the (rho25, rho05) sweep instead of single curves.
    bool sweep = false;
    std::vector<double> sweep_rho25{0.82, 0.72, 0.62, 0.52, 0.42, 0.32};
    std::vector<double> sweep_rho05{0.80, 0.60, 0.40, 0.20, 0.0, -0.20};

    EchoOptions options(Interpolation method) const;
    std::vector<double> taus() const { return tau_grid(tau_max_ms, tau_step_ms); }
    bool operator==(const EchoBlock&) const = default;
};

struct TrajectoryBlock {
    WindowSpec w0_window{6.5, 0.5, 0};
    std::vector<WindowSpec> w2_windows{{6.5, 0.52, 1}, {7.07, 0.52, 1}};
    std::size_t samples = 20;  ///< per w2 window
    Interpolation method = Interpolation::monotone_cubic;
    Extension extension = Extension::hold;
    GridSpec final_grid = kModelGrid;
    std::size_t increment_points = 81;
    bool operator==(const TrajectoryBlock&) const = default;
};

struct BaselineBlock {
    LatticeConfig lattice;
    std::size_t atoms = 20000;
    /// Ensemble trajectories written to the trajectories CSV.
    std::size_t export_trajectories = 50;
    PlateauOptions plateau;
    bool operator==(const BaselineBlock&) const = default;
};

/// Everything a command needs. Paths are resolved against the config file's directory.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    SkewNormalParams truth = averaged_params();
    PulsePair pulses;
    GridSpec dataset_grid = kDatasetGrid;
    double noise_sigma = 0.0;
    /// Fit input; empty means synthesize from `truth`.
    std::string dataset_path;
    /// Echo / trajectory input: a fit summary or a parameter object. Empty means `params`
    /// if present, else `truth`.
    std::string params_path;
    std::optional<SkewNormalParams> params;
    FitConfig fit;
    int fit_runs = 12;
    EchoBlock echo;
    TrajectoryBlock trajectories;
    BaselineBlock baseline;
    double hole_pump_khz = 6.45;

    /// Throws ValidationError for inconsistent settings.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

void to_json(json& j, const RunConfig& c);
/// Relative paths inside `j` are resolved against `base_dir`.
RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir = {});
/// Reads and parses a config file (IoError / ValidationError).
RunConfig load_run_config(const std::filesystem::path& path);

struct CommandResult {
    std::vector<std::string> files;     ///< written, relative to the output directory
    std::vector<std::string> warnings;  ///< surfaced in metadata, not fatal
    int exit_code = 0;                  ///< nonzero when a stage of `report` failed
};

/// Each command writes into `out_dir` (created if missing). Errors are thrown as the
/// library's exception types; exit_code_for maps them to process exit codes.
CommandResult cmd_synth(const RunConfig& config, const std::filesystem::path& out_dir, OutputFormat format);
CommandResult cmd_fit(const RunConfig& config, const std::filesystem::path& out_dir, OutputFormat format);
CommandResult cmd_echo(const RunConfig& config, const std::filesystem::path& out_dir, OutputFormat format);
CommandResult cmd_traj(const RunConfig& config, const std::filesystem::path& out_dir, OutputFormat format);
CommandResult cmd_baseline(const RunConfig& config, const std::filesystem::path& out_dir, OutputFormat format);
CommandResult cmd_report(const RunConfig& config, const std::filesystem::path& out_dir, OutputFormat format);

/// Files of the reproduction bundle, in manifest order.
const std::vector<std::string>& report_bundle_files();

/// 0 ok, 2 validation, 3 convergence, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace echolab
