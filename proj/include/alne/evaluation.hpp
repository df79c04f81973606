#pragma once

#include "alne/datapool.hpp"
#include "alne/filters.hpp"
#include "alne/nas.hpp"
#include "alne/noise_model.hpp"
#include "alne/probe.hpp"

#include <optional>
#include <string>
#include <vector>

namespace alne {

enum class TrainPolicyMode { FilterThenTrain, AllSamples, TopPConfident };

const char* to_string(TrainPolicyMode mode);
TrainPolicyMode policy_from_string(const std::string& name);

struct TrainPolicy {
    TrainPolicyMode mode = TrainPolicyMode::FilterThenTrain;
    std::optional<double> p;  // top_p_confident; unset derives 1 - q_hat from the filter
};

struct FilterMetrics {
    double precision = 1.0;       // noisy treated as the positive class
    double recall = 1.0;
    double predicted_ratio = 0.0; // q_hat
};

FilterMetrics filter_metrics(const FilterVerdict& verdict, const Annotator& annotator,
                             const std::vector<int>& labeled);

struct EvalResult {
    double test_accuracy = 0.0;
    int n_train_used = 0;
    std::optional<FilterMetrics> metrics;  // present when a filter ran
    uint64_t seed = 0;
    bool degenerate = false;  // empty training set, accuracy is the 1/C prior
};

// Trains the evaluation probe on the labeled set under `policy` and scores it
// on the held-out pool's true labels. The filter (when the policy needs one)
// sees only observed labels; ground truth enters through filter_metrics alone.
EvalResult evaluate(const EmbeddingPool& pool, const LabelState& state,
                    const Annotator& annotator, const TrainPolicy& policy,
                    const EmbeddingPool& test_pool, const LinearProbeConfig& probe_config,
                    const BoundFilter* filter);

struct DeltaSummary {
    std::vector<double> per_seed;
    double mean = 0.0;
    double standard_error = 0.0;
};

// Paired per-seed accuracy differences against the random baseline. Both
// maps must cover the same seeds.
DeltaSummary accuracy_delta_vs_random(const std::vector<std::pair<uint64_t, double>>& strategy_acc,
                                      const std::vector<std::pair<uint64_t, double>>& random_acc);

}  // namespace alne
