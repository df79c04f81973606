#include "alne/strategies.hpp"

#include "alne/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace alne {

namespace {

void validate_request(const StrategyRequest& request) {
    if (request.unlabeled.empty()) throw std::invalid_argument("selection: empty candidate set");
    if (request.batch < 1 || request.batch > static_cast<int>(request.unlabeled.size())) {
        throw std::invalid_argument("selection: batch must be in [1, |unlabeled|]");
    }
}

void erase_value(std::vector<int>& v, int value) {
    const auto it = std::lower_bound(v.begin(), v.end(), value);
    if (it != v.end() && *it == value) v.erase(it);
}

}  // namespace

ProbCoverEngine::ProbCoverEngine(const EmbeddingPool& pool, double delta,
                                 bool delta_update_enabled, int delta_grid_size)
    : pool_(pool),
      delta_(delta),
      delta_update_enabled_(delta_update_enabled),
      delta_grid_size_(delta_grid_size),
      graph_(std::make_unique<CoverGraph>(pool, delta)) {}

void ProbCoverEngine::refresh(std::vector<int> clean, std::vector<int> noisy,
                              double noisy_weight) {
    ctx_clean_ = std::move(clean);
    ctx_noisy_ = std::move(noisy);
    ctx_noisy_weight_ = noisy_weight;

    graph_->reset_weights();
    if (!ctx_noisy_.empty() && ctx_noisy_weight_ != 1.0) {
        graph_->set_incoming_weight(ctx_noisy_, ctx_noisy_weight_);
    }
    graph_->zero_incoming(ctx_clean_);
    graph_->zero_outgoing(ctx_noisy_);
}

void ProbCoverEngine::rebuild(double new_delta, const std::vector<int>& chosen_so_far) {
    delta_ = new_delta;
    graph_ = std::make_unique<CoverGraph>(pool_, delta_);
    if (!ctx_noisy_.empty() && ctx_noisy_weight_ != 1.0) {
        graph_->set_incoming_weight(ctx_noisy_, ctx_noisy_weight_);
    }
    std::vector<int> covered = ctx_clean_;
    covered.insert(covered.end(), chosen_so_far.begin(), chosen_so_far.end());
    graph_->zero_incoming(covered);
    graph_->zero_outgoing(ctx_noisy_);
}

Selection probcover_select(const StrategyRequest& request, ProbCoverEngine& engine,
                           std::vector<std::string>* events) {
    validate_request(request);
    std::vector<int> candidates = request.unlabeled;

    Selection selection;
    selection.chosen.reserve(request.batch);
    selection.per_pick_scores.reserve(request.batch);

    const auto log_event = [&](const std::string& message) {
        if (events) events->push_back(message);
    };

    for (int pick = 0; pick < request.batch; ++pick) {
        if (engine.delta_update_enabled() && engine.graph().max_odr(candidates) <= 1.0) {
            const auto grid = delta_candidate_grid(engine.delta(), engine.delta_grid_size());
            std::vector<int> masked = request.labeled_clean;
            masked.insert(masked.end(), selection.chosen.begin(), selection.chosen.end());
            const DeltaUpdateResult update =
                update_delta(engine.pool(), masked, candidates, grid, engine.delta());
            if (update.exhausted) {
                // one random pick per exhaustion event, seeded by the total
                // labeled count so a b=1 NAS loop and a one-shot batch draw
                // the same sequence
                log_event("exhausted: random fallback pick");
                const uint64_t position =
                    request.labeled_clean.size() + selection.chosen.size();
                Rng rng(derive_seed(derive_seed(request.seed, "probcover-fallback"), position));
                const int fallback = candidates[rng.index(candidates.size())];
                selection.chosen.push_back(fallback);
                selection.per_pick_scores.push_back(0.0);
                engine.graph().zero_incoming({fallback});
                erase_value(candidates, fallback);
                continue;
            }
            log_event("delta_update: " + std::to_string(engine.delta()) + " -> " +
                      std::to_string(update.delta));
            engine.rebuild(update.delta, selection.chosen);
        }

        const int winner = engine.graph().argmax_odr(candidates);
        selection.per_pick_scores.push_back(engine.graph().odr(winner));
        selection.chosen.push_back(winner);
        engine.graph().zero_incoming({winner});
        erase_value(candidates, winner);
    }
    return selection;
}

Selection maxherding_select(const StrategyRequest& request, const EmbeddingPool& pool,
                            double sigma) {
    validate_request(request);
    if (sigma <= 0.0) throw std::invalid_argument("maxherding: sigma must be positive");
    const int n = pool.size();
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    const auto kernel = [&](int a, int b) {
        return std::exp(-squared_distance(pool, a, b) * inv_two_sigma_sq);
    };

    // best similarity to any anchor so far
    std::vector<double> best_sim(n, 0.0);
    for (int anchor : request.labeled_clean) {
        for (int x = 0; x < n; ++x) best_sim[x] = std::max(best_sim[x], kernel(anchor, x));
    }

    std::vector<int> candidates = request.unlabeled;

    // candidate-to-pool kernel rows, precomputed when affordable
    const size_t cells = candidates.size() * static_cast<size_t>(n);
    std::vector<double> krows;
    const bool cached = cells <= size_t{16} * 1024 * 1024;
    std::vector<int> row_of(n, -1);
    if (cached) {
        krows.resize(cells);
        for (size_t r = 0; r < candidates.size(); ++r) {
            row_of[candidates[r]] = static_cast<int>(r);
            for (int x = 0; x < n; ++x) krows[r * n + x] = kernel(candidates[r], x);
        }
    }

    Selection selection;
    for (int pick = 0; pick < request.batch; ++pick) {
        int best_c = -1;
        double best_gain = -1.0;
        std::vector<double> winner_row;
        for (int c : candidates) {
            double gain = 0.0;
            if (cached) {
                const double* row = krows.data() + static_cast<size_t>(row_of[c]) * n;
                for (int x = 0; x < n; ++x) {
                    const double k = row[x];
                    if (k > best_sim[x]) gain += k - best_sim[x];
                }
            } else {
                for (int x = 0; x < n; ++x) {
                    const double k = kernel(c, x);
                    if (k > best_sim[x]) gain += k - best_sim[x];
                }
            }
            if (gain > best_gain) {  // ties keep the lowest candidate index
                best_gain = gain;
                best_c = c;
            }
        }
        selection.chosen.push_back(best_c);
        selection.per_pick_scores.push_back(best_gain);
        if (cached) {
            const double* row = krows.data() + static_cast<size_t>(row_of[best_c]) * n;
            for (int x = 0; x < n; ++x) best_sim[x] = std::max(best_sim[x], row[x]);
        } else {
            for (int x = 0; x < n; ++x) best_sim[x] = std::max(best_sim[x], kernel(best_c, x));
        }
        erase_value(candidates, best_c);
    }
    return selection;
}

Selection coreset_select(const StrategyRequest& request, const EmbeddingPool& pool) {
    validate_request(request);
    const int n = pool.size();

    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    for (int anchor : request.labeled_clean) {
        for (int x = 0; x < n; ++x) {
            min_dist[x] = std::min(min_dist[x], squared_distance(pool, anchor, x));
        }
    }

    std::vector<int> candidates = request.unlabeled;
    Selection selection;
    for (int pick = 0; pick < request.batch; ++pick) {
        int best_c = candidates.front();
        for (int c : candidates) {
            if (min_dist[c] > min_dist[best_c]) best_c = c;  // ties keep the lowest index
        }
        selection.chosen.push_back(best_c);
        selection.per_pick_scores.push_back(
            std::isinf(min_dist[best_c]) ? std::numeric_limits<double>::infinity()
                                         : std::sqrt(min_dist[best_c]));
        for (int x = 0; x < n; ++x) {
            min_dist[x] = std::min(min_dist[x], squared_distance(pool, best_c, x));
        }
        erase_value(candidates, best_c);
    }
    return selection;
}

Selection random_select(const StrategyRequest& request, uint64_t seed) {
    validate_request(request);
    Rng rng(seed);
    Selection selection;
    selection.chosen = rng.sample(request.unlabeled, static_cast<size_t>(request.batch));
    selection.per_pick_scores.assign(selection.chosen.size(), 0.0);
    return selection;
}

}  // namespace alne
