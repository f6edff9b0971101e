// echolab command-line front end.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "echolab/commands.hpp"

namespace {

using Command = echolab::CommandResult (*)(const echolab::RunConfig&, const std::filesystem::path&,
                                           echolab::OutputFormat);

const std::map<std::string, std::pair<Command, const char*>>& commands() {
    static const std::map<std::string, std::pair<Command, const char*>> table{
        {"synth", {echolab::cmd_synth, "Synthesize a dataset from the truth parameters"}},
        {"fit", {echolab::cmd_fit, "Run the multi-start genetic-algorithm fit"}},
        {"echo", {echolab::cmd_echo, "Echo curves and plateau reports (or the correlation sweep)"}},
        {"traj", {echolab::cmd_traj, "Trajectory samples, final probabilities and increment projection"}},
        {"baseline", {echolab::cmd_baseline, "Ballistic-expansion baseline"}},
        {"report", {echolab::cmd_report, "Full reproduction bundle"}},
    };
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"echolab: skew-normal trajectory inference and echo prediction"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "csv";
    for (const auto& [name, entry] : commands()) {
        auto* sub = app.add_subcommand(name, entry.second);
        sub->add_option("--config", config_path, "Run configuration (JSON)");
        sub->add_option("--seed", seed, "Seed; overrides the config's seed");
        sub->add_option("--out", out_dir, "Output directory")->required();
        sub->add_option("--format", format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        echolab::RunConfig config = config_path.empty() ? echolab::RunConfig{} : echolab::load_run_config(config_path);
        if (seed) config.seed = *seed;
        const auto* sub = app.get_subcommands().front();
        const auto& [command, help] = commands().at(sub->get_name());
        (void)help;
        const auto result = command(config, out_dir, echolab::output_format_from_string(format));
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
        for (const auto& f : result.files) std::cout << (std::filesystem::path(out_dir) / f).string() << '\n';
        return result.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return echolab::exit_code_for(e);
    }
}
