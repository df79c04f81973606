#pragma once

#include "alne/datapool.hpp"
#include "alne/filters.hpp"
#include "alne/noise_model.hpp"
#include "alne/strategies.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace alne {

enum class StrategyKind { Random, ProbCover, MaxHerding, Coreset };

const char* to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

struct StrategyParams {
    StrategyKind kind = StrategyKind::ProbCover;
    double delta = 0.5;             // probcover ball radius
    bool delta_update = true;       // probcover radius re-selection on exhaustion
    int delta_grid_size = 16;
    double sigma = 1.0;             // maxherding kernel lengthscale
};

/// A noise filter bound to a name, as NAS consumes it.
struct BoundFilter {
    std::string name;
    bool ideal = false;
    std::function<FilterVerdict(const std::vector<int>& labeled,
                                const std::vector<int>& observed,
                                const std::vector<int>& unlabeled)>
        run;
};

struct NasConfig {
    int inner_batch = 0;                    // 0 resolves to C (1 for the ideal filter)
    std::optional<bool> use_noise_dropout;  // unset: on for lowbudget_aum, off otherwise
    bool weighted_mode = false;             // Weighted NPC edge reweighing
    int warmup_budget = 0;                  // plain-strategy rounds below this labeled size
    uint64_t seed = 0;
};

struct RoundTrace {
    int round = 0;
    double q_hat = 0.0;   // predicted noise ratio before dropout
    double eta = 0.0;     // dropout percentage applied (0 when off)
    int n_clean = 0;      // after dropout
    int n_noisy = 0;      // after dropout
    std::vector<int> picks;
    double delta = 0.0;   // radius in effect (0 for non-probcover strategies)
    std::vector<std::string> events;
};

struct NasRun {
    LabelState state;
    std::vector<RoundTrace> traces;
    int filter_calls = 0;          // rounds in which the filter ran
    double filter_seconds = 0.0;
    double strategy_seconds = 0.0;
};

/// eta = 100 * max(min(q_hat, 1 - q_hat), 0.1)
double noise_dropout_eta(double q_hat);

// Moves round(eta% * |noisy|) uniformly random samples from noisy to clean.
// predicted_noise_ratio keeps its pre-dropout value for logging.
FilterVerdict noise_dropout(const FilterVerdict& verdict, uint64_t seed);

// The NAS loop: filter the labeled set, optionally apply noise dropout,
// select an inner batch with the strategy seeing only the clean subset,
// annotate, repeat until the budget is spent.
NasRun run_nas(const EmbeddingPool& pool, const Annotator& annotator, LabelState state,
               const NasConfig& config, const StrategyParams& strategy, const BoundFilter& filter,
               int budget);

/// One-shot selection with the plain strategy up to the budget (the baseline NAS wraps).
NasRun run_plain(const EmbeddingPool& pool, const Annotator& annotator, LabelState state,
                 const StrategyParams& strategy, int budget, uint64_t seed);

/// T_S + ceil(B / b) * T_A
double complexity_estimate(int inner_batch, int budget, double strategy_time, double filter_time);

}  // namespace alne
