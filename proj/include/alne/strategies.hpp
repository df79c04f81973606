#pragma once

#include "alne/covergraph.hpp"
#include "alne/datapool.hpp"

#include <memory>
#include <string>
#include <vector>

namespace alne {

struct StrategyRequest {
    std::vector<int> labeled_clean;  // anchor set the strategy treats as labeled
    std::vector<int> unlabeled;      // candidates, ascending
    int batch = 1;
    uint64_t seed = 0;               // random strategy; probcover exhaustion fallback
};

struct Selection {
    std::vector<int> chosen;               // exactly batch distinct candidates, pick order
    std::vector<double> per_pick_scores;   // greedy objective value at each pick
};

/// ProbCover state shared across NAS rounds: the delta-ball graph, the
/// current radius, and the weight context the graph was last refreshed with.
class ProbCoverEngine {
public:
    ProbCoverEngine(const EmbeddingPool& pool, double delta, bool delta_update_enabled = true,
                    int delta_grid_size = 16);

    // From-scratch weight refresh (all weights 1, then in order: incoming
    // edges of B(noisy) to noisy_weight, incoming edges of B(clean) to 0,
    // outgoing edges of noisy to 0). The order keeps clean coverage zeroed
    // on overlap and noisy samples unselectable.
    void refresh(std::vector<int> clean, std::vector<int> noisy, double noisy_weight);

    const CoverGraph& graph() const { return *graph_; }
    CoverGraph& graph() { return *graph_; }
    double delta() const { return delta_; }
    const EmbeddingPool& pool() const { return pool_; }
    bool delta_update_enabled() const { return delta_update_enabled_; }
    int delta_grid_size() const { return delta_grid_size_; }

    // Rebuild at a new radius and reapply the stored context plus the picks
    // already made in the current batch.
    void rebuild(double new_delta, const std::vector<int>& chosen_so_far);

private:
    const EmbeddingPool& pool_;
    double delta_;
    bool delta_update_enabled_;
    int delta_grid_size_;
    std::unique_ptr<CoverGraph> graph_;
    std::vector<int> ctx_clean_;
    std::vector<int> ctx_noisy_;
    double ctx_noisy_weight_ = 1.0;
};

// Greedy max-coverage picks: argmax out-degree rank, then zero the winner's
// ball. The engine must have been refreshed for the current labeled state.
// On exhaustion (max odr <= 1) the radius is re-chosen once per event; if
// that also exhausts, the remaining picks are uniform random (event-logged).
Selection probcover_select(const StrategyRequest& request, ProbCoverEngine& engine,
                           std::vector<std::string>* events = nullptr);

/// Greedy kernel herding with a Gaussian kernel of lengthscale sigma.
Selection maxherding_select(const StrategyRequest& request, const EmbeddingPool& pool,
                            double sigma);

/// Greedy k-center: maximize distance to the nearest anchor or prior pick.
Selection coreset_select(const StrategyRequest& request, const EmbeddingPool& pool);

Selection random_select(const StrategyRequest& request, uint64_t seed);

}  // namespace alne
