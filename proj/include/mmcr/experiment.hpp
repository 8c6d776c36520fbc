#pragma once

#include "mmcr/bench.hpp"
#include "mmcr/data.hpp"
#include "mmcr/encoder.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mmcr {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct TrainingParams {
    std::size_t batch_b = 32;
    std::size_t views_k = 8;
    double lambda = 0.0;
    double lr = kDefaultLearningRate;
    double weight_decay = kDefaultWeightDecay;
    std::size_t epochs = 100;

    bool operator==(const TrainingParams&) const = default;
};

struct AnalysisParams {
    std::size_t capacity_samples = 200;
    double kappa = 0.0;
    std::size_t capacity_max_dim = 64;
    // Held-out scenes per class and views per scene for manifold analyses.
    std::size_t scenes_per_class = 8;
    std::size_t manifold_views = 16;
    std::size_t coherence_batches_per_class = 10;
    std::size_t coherence_batch_b = 8;
    std::size_t coherence_views_k = 4;
    std::vector<double> attack_epsilons{0.0, 0.05, 0.1, 0.2, 0.4, 0.8};
    std::size_t attack_iterations = 20;
    std::vector<std::size_t> attack_iteration_grid{1, 5, 10, 20, 50};
    double attack_sweep_epsilon = 0.2;
    std::vector<double> lambda_grid{0.0, 0.001, 0.01, 0.1};
    std::vector<std::size_t> batch_grid{8, 16, 32, 64};
    std::size_t theorem_n = 8;
    std::size_t theorem_k = 3;
    std::size_t theorem_d = 4;
    std::size_t theorem_trials = 10000;

    bool operator==(const AnalysisParams&) const = default;
};

/// Everything one run needs. Serialized as JSON; every field is optional in
/// the file (missing fields keep their defaults) and unknown fields are
/// rejected.
struct ExperimentConfig {
    std::string experiment = "train-basic";
    std::uint64_t seed = 0;
    std::string output_dir = "runs/train-basic";
    DatasetConfig dataset;
    double test_fraction = 0.25;
    AugmentationSpec augmentation;
    std::vector<std::size_t> encoder_dims{64, 64, 64, 16};
    std::size_t projector_layers = 1;
    TrainingParams training;
    AnalysisParams analysis;
    ScalingGrid bench;

    bool operator==(const ExperimentConfig&) const = default;
};

const std::vector<std::string>& preset_names();
/// True for presets whose metric files are hash-identical across reruns.
bool preset_is_deterministic(const std::string& name);
/// Default config for a preset. Throws ConfigError listing the presets on an unknown name.
ExperimentConfig preset_config(const std::string& name);

/// Throws ConfigError naming the offending field path.
void validate(const ExperimentConfig& config);

std::string config_to_json(const ExperimentConfig& config, int indent = 2);
/// Parses and validates. Errors name the field path, e.g. "training.batch_b".
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// MMCR_OUTPUT_DIR replaces output_dir; MMCR_THREADS sets the OpenMP thread
/// count. Throws ConfigError on a malformed thread count.
void apply_env_overrides(ExperimentConfig& config);

struct ManifestFile {
    std::string path;  // relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    ExperimentConfig config;
    std::string artifact_version = kArtifactVersion;
    std::string started_utc, finished_utc;
    bool deterministic = true;
    std::vector<ManifestFile> files;
};

/// Executes the named preset, writing every output plus manifest.json under
/// config.output_dir. Library errors are rethrown with the experiment name
/// prefixed and the original kind kept.
RunManifest run(const ExperimentConfig& config, Exec exec = Exec::parallel);

std::string manifest_to_json(const RunManifest& m, int indent = 2);
RunManifest manifest_from_json(const std::string& text);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct ReportResult {
    std::filesystem::path json_path, csv_path, history_csv_path;
    std::size_t runs = 0;
    std::vector<std::string> problems;  // missing, corrupt or hash-mismatched files
};

/// Finds every manifest.json under `dir`, groups runs by experiment and
/// writes report.json, summary.csv (per-metric mean and 95% CI over runs) and
/// history.csv (per-epoch mean and CI of every history field). Problems are
/// listed and the report is still produced. Throws IoError naming the path
/// when no manifest is found.
ReportResult report(const std::filesystem::path& dir);

/// Two-sided 95% Student-t quantile for `dof` degrees of freedom.
double t95(std::size_t dof);

}  // namespace mmcr
