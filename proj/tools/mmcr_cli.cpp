// Command-line front end for the experiment runner.
//
//   mmcr_cli run <config.json> [--seed N] [--output-dir DIR] [--serial]
//   mmcr_cli bench <config.json>
//   mmcr_cli report <dir>
//   mmcr_cli presets
//   mmcr_cli show-config <preset>
//
// Exit code 0 on success. Failures print one JSON object on stderr:
// {"error": <kind>, "message": <text>}.

#include "mmcr/error.hpp"
#include "mmcr/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>
#include <optional>

namespace {

int fail(const std::string& kind, const std::string& message, int code)
{
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

void print_run(const mmcr::RunManifest& m)
{
    nlohmann::ordered_json j;
    j["experiment"] = m.config.experiment;
    j["output_dir"] = m.config.output_dir;
    j["deterministic"] = m.deterministic;
    j["files"] = nlohmann::json::array();
    for (const auto& f : m.files)
        j["files"].push_back(f.path);
    std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MMCR desk-scale experiment runner"};
    app.require_subcommand(1);

    std::string config_path, report_dir, preset;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    bool serial = false;

    auto* run = app.add_subcommand("run", "Run the preset named in a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--output-dir", output_dir, "Override the output directory");
    run->add_flag("--serial", serial, "Run kernels single-threaded");

    auto* bench = app.add_subcommand("bench", "Time the loss on the config's bench grid");
    bench->add_option("config", config_path, "Config file")->required();

    auto* rep = app.add_subcommand("report", "Merge every run under a directory into report.json and CSVs");
    rep->add_option("dir", report_dir, "Directory holding run outputs")->required();

    auto* presets = app.add_subcommand("presets", "List preset names");
    auto* show = app.add_subcommand("show-config", "Print the default config of a preset");
    show->add_option("preset", preset, "Preset name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage_error", e.what(), 2);
    }

    try {
        if (*presets) {
            for (const auto& name : mmcr::preset_names())
                std::cout << name << (mmcr::preset_is_deterministic(name) ? "" : " (timing, not deterministic)")
                          << '\n';
            return 0;
        }
        if (*show) {
            std::cout << mmcr::config_to_json(mmcr::preset_config(preset)) << '\n';
            return 0;
        }
        if (*rep) {
            const auto r = mmcr::report(report_dir);
            nlohmann::ordered_json j;
            j["runs"] = r.runs;
            j["report"] = r.json_path.string();
            j["summary_csv"] = r.csv_path.string();
            j["history_csv"] = r.history_csv_path.string();
            j["problems"] = r.problems;
            std::cout << j.dump(2) << '\n';
            return 0;
        }

        mmcr::ExperimentConfig cfg = mmcr::load_config(config_path);
        if (*bench && cfg.experiment != "bench") {
            cfg.experiment = "bench";
            cfg.output_dir = mmcr::preset_config("bench").output_dir;
        }
        if (seed)
            cfg.seed = *seed;
        if (!output_dir.empty())
            cfg.output_dir = output_dir;
        mmcr::apply_env_overrides(cfg);
        const auto m = mmcr::run(cfg, serial ? mmcr::Exec::serial : mmcr::Exec::parallel);
        print_run(m);
        return 0;
    } catch (const mmcr::ConfigError& e) {
        return fail(e.kind(), e.what(), 2);
    } catch (const mmcr::Error& e) {
        return fail(e.kind(), e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal_error", e.what(), 1);
    }
}
