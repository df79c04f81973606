#pragma once

#include "alne/datapool.hpp"
#include "alne/evaluation.hpp"
#include "alne/nas.hpp"
#include "alne/noise_model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace alne {

inline constexpr const char* kToolVersion = "0.1.0";

struct DataFilesConfig {
    std::string embeddings;
    std::string labels;
    std::string test_embeddings;
    std::string test_labels;
};

struct DataConfig {
    std::optional<SyntheticSpec> synthetic;
    std::optional<DataFilesConfig> files;
    double test_fraction = 0.2;  // synthetic held-out pool, share of points per class
};

struct NoiseConfig {
    NoiseKind kind = NoiseKind::None;
    double rate = 0.0;
    std::string transition;  // asymmetric: matrix file path, or "auto"
    int transition_probe_epochs = 5;
    std::optional<double> cluster_fraction;
};

struct StrategyConfig {
    std::string label;  // appears verbatim in the CSV
    StrategyParams params;
    bool nas = false;
    std::string nas_filter = "lowbudget_aum";
    NasConfig nas_config;
};

struct ExperimentConfig {
    DataConfig data;
    std::vector<NoiseConfig> noises;
    std::vector<int> budgets_spc;  // expanded via budget_for_spc per noise rate
    std::vector<int> budgets_raw;
    std::vector<StrategyConfig> strategies;
    std::vector<std::string> filters;  // train-time filters ("none" trains unfiltered)
    std::vector<TrainPolicy> policies;
    std::vector<uint64_t> seeds;
    LinearProbeConfig eval_probe;  // defaults: 500 epochs, cosine
    std::string output_dir = "out";
    int workers = 1;
    bool record_timing = true;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& document);
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical JSON (defaults filled, keys sorted) backing the config hash.
nlohmann::json normalized_config(const ExperimentConfig& config);

/// FNV-1a hash of the canonical form; whitespace and key order never matter.
std::string config_hash(const ExperimentConfig& config);

struct RunRecord {
    std::string config_hash;
    std::string tool_version;
    std::string csv_path;
    std::vector<std::string> trace_paths;
    int rows = 0;
    bool completed = false;
};

/// Executes the full grid, writes results.csv + traces, prints a summary.
RunRecord run_experiment(const ExperimentConfig& config);

/// Built-in desk-scale preset: C=10, N=2000, q=0.3, {random, probcover, npc}.
ExperimentConfig smoke_preset();

// Resolves a filter name against a concrete pool/annotator. `noise_rate`
// seeds the known-rate AUM prior.
BoundFilter bind_filter(const std::string& name, const EmbeddingPool& pool,
                        const Annotator& annotator, uint64_t seed, double noise_rate);

const std::vector<std::string>& known_filter_names();

}  // namespace alne
