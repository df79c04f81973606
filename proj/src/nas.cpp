#include "alne/nas.hpp"

#include "alne/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace alne {

const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Random: return "random";
        case StrategyKind::ProbCover: return "probcover";
        case StrategyKind::MaxHerding: return "maxherding";
        case StrategyKind::Coreset: return "coreset";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
    if (name == "random") return StrategyKind::Random;
    if (name == "probcover") return StrategyKind::ProbCover;
    if (name == "maxherding") return StrategyKind::MaxHerding;
    if (name == "coreset") return StrategyKind::Coreset;
    throw std::invalid_argument("unknown strategy: " + name);
}

double noise_dropout_eta(double q_hat) {
    return 100.0 * std::max(std::min(q_hat, 1.0 - q_hat), 0.1);
}

FilterVerdict noise_dropout(const FilterVerdict& verdict, uint64_t seed) {
    FilterVerdict out = verdict;  // predicted_noise_ratio stays pre-dropout
    if (verdict.noisy.empty()) return out;

    const double eta = noise_dropout_eta(verdict.predicted_noise_ratio);
    const int moves = static_cast<int>(
        round_half_up(eta / 100.0 * static_cast<double>(verdict.noisy.size())));
    if (moves == 0) return out;

    Rng rng(derive_seed(seed, "noise-dropout"));
    const std::vector<int> moved = rng.sample(verdict.noisy, static_cast<size_t>(moves));
    for (int index : moved) {
        out.noisy.erase(std::find(out.noisy.begin(), out.noisy.end(), index));
        out.clean.insert(std::lower_bound(out.clean.begin(), out.clean.end(), index), index);
    }
    return out;
}

double complexity_estimate(int inner_batch, int budget, double strategy_time,
                           double filter_time) {
    if (inner_batch < 1) throw std::invalid_argument("complexity_estimate: b must be >= 1");
    const int calls = (budget + inner_batch - 1) / inner_batch;
    return strategy_time + static_cast<double>(calls) * filter_time;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Selection select_plain(const StrategyParams& strategy, const StrategyRequest& request,
                       const EmbeddingPool& pool, ProbCoverEngine* engine,
                       std::vector<std::string>* events) {
    switch (strategy.kind) {
        case StrategyKind::Random:
            return random_select(request, request.seed);
        case StrategyKind::ProbCover:
            return probcover_select(request, *engine, events);
        case StrategyKind::MaxHerding:
            return maxherding_select(request, pool, strategy.sigma);
        case StrategyKind::Coreset:
            return coreset_select(request, pool);
    }
    throw std::logic_error("select_plain: unreachable");
}

}  // namespace

NasRun run_nas(const EmbeddingPool& pool, const Annotator& annotator, LabelState state,
               const NasConfig& config, const StrategyParams& strategy, const BoundFilter& filter,
               int budget) {
    if (budget > pool.size()) throw std::invalid_argument("run_nas: budget exceeds pool");
    if (config.warmup_budget >= budget && config.warmup_budget > 0) {
        throw std::invalid_argument("run_nas: warmup_budget must be below the budget");
    }
    if (!filter.run) throw std::invalid_argument("run_nas: filter is not bound");

    const int inner_batch =
        config.inner_batch > 0 ? config.inner_batch : (filter.ideal ? 1 : pool.class_count);
    const bool dropout = config.use_noise_dropout.value_or(filter.name == "lowbudget_aum");

    NasRun run;
    run.state = std::move(state);

    std::unique_ptr<ProbCoverEngine> engine;
    if (strategy.kind == StrategyKind::ProbCover) {
        engine = std::make_unique<ProbCoverEngine>(pool, strategy.delta, strategy.delta_update,
                                                   strategy.delta_grid_size);
    }

    int round = 0;
    while (static_cast<int>(run.state.labeled().size()) < budget) {
        RoundTrace trace;
        trace.round = round;

        const std::vector<int>& labeled = run.state.labeled();
        const int remaining = budget - static_cast<int>(labeled.size());
        const int batch = std::min(inner_batch, remaining);

        // Alg. 1 runs the filter at the top of every round; during warmup the
        // strategy stays plain and the filter is not consulted.
        FilterVerdict verdict;
        const bool warmup = static_cast<int>(labeled.size()) < config.warmup_budget;
        if (warmup) {
            verdict = make_verdict(labeled, std::vector<char>(labeled.size(), 0));
            trace.events.push_back("warmup: filter skipped");
        } else {
            const auto filter_start = Clock::now();
            try {
                verdict = filter.run(labeled, run.state.observed_labels_of(labeled),
                                     run.state.unlabeled());
                if (labeled.empty()) trace.events.push_back("filter: empty labeled set");
            } catch (const std::exception& error) {
                verdict = make_verdict(labeled, std::vector<char>(labeled.size(), 0));
                trace.events.push_back(std::string("filter failed, treating all labeled as clean: ") +
                                       error.what());
            }
            run.filter_seconds += seconds_since(filter_start);
            ++run.filter_calls;
        }

        trace.q_hat = verdict.predicted_noise_ratio;
        if (dropout && !warmup) {
            trace.eta = noise_dropout_eta(verdict.predicted_noise_ratio);
            verdict = noise_dropout(verdict, derive_seed(config.seed, 7000 + static_cast<uint64_t>(round)));
        }
        trace.n_clean = static_cast<int>(verdict.clean.size());
        trace.n_noisy = static_cast<int>(verdict.noisy.size());

        StrategyRequest request;
        request.labeled_clean = verdict.clean;
        request.unlabeled = run.state.unlabeled();
        request.batch = batch;
        // probcover's exhaustion fallback must draw the same stream whether
        // the budget arrives in one batch or one pick per round
        request.seed = strategy.kind == StrategyKind::ProbCover
                           ? derive_seed(config.seed, "probcover")
                           : derive_seed(config.seed, 8000 + static_cast<uint64_t>(round));

        const auto strategy_start = Clock::now();
        if (strategy.kind == StrategyKind::ProbCover) {
            // Alg. 2 weight refresh: fresh weights, reweigh the noisy balls
            // (1 for NPC, 1 - q_hat for Weighted NPC), zero the clean balls,
            // zero the noisy samples' outgoing edges.
            const int total = verdict.labeled_count();
            const double q_post =
                total > 0 ? static_cast<double>(verdict.noisy.size()) / total : 0.0;
            const double noisy_weight = config.weighted_mode ? 1.0 - q_post : 1.0;
            engine->refresh(verdict.clean, verdict.noisy, noisy_weight);
        }
        const Selection picks = select_plain(strategy, request, pool, engine.get(), &trace.events);
        run.strategy_seconds += seconds_since(strategy_start);

        std::vector<int> labels;
        labels.reserve(picks.chosen.size());
        for (int index : picks.chosen) labels.push_back(annotator.annotate_one(index));
        run.state.record_round(round, picks.chosen, labels);

        trace.picks = picks.chosen;
        trace.delta = engine ? engine->delta() : 0.0;
        run.traces.push_back(std::move(trace));
        ++round;
    }
    return run;
}

NasRun run_plain(const EmbeddingPool& pool, const Annotator& annotator, LabelState state,
                 const StrategyParams& strategy, int budget, uint64_t seed) {
    if (budget > pool.size()) throw std::invalid_argument("run_plain: budget exceeds pool");

    NasRun run;
    run.state = std::move(state);

    RoundTrace trace;
    trace.round = 0;

    StrategyRequest request;
    request.labeled_clean = run.state.labeled();
    request.unlabeled = run.state.unlabeled();
    request.batch = budget - static_cast<int>(run.state.labeled().size());
    request.seed =
        strategy.kind == StrategyKind::ProbCover ? derive_seed(seed, "probcover") : seed;

    std::unique_ptr<ProbCoverEngine> engine;
    const auto strategy_start = Clock::now();
    if (strategy.kind == StrategyKind::ProbCover) {
        engine = std::make_unique<ProbCoverEngine>(pool, strategy.delta, strategy.delta_update,
                                                   strategy.delta_grid_size);
        engine->refresh(request.labeled_clean, {}, 1.0);
    }
    const Selection picks = select_plain(strategy, request, pool, engine.get(), &trace.events);
    run.strategy_seconds += seconds_since(strategy_start);

    std::vector<int> labels;
    labels.reserve(picks.chosen.size());
    for (int index : picks.chosen) labels.push_back(annotator.annotate_one(index));
    run.state.record_round(0, picks.chosen, labels);

    trace.picks = picks.chosen;
    trace.n_clean = static_cast<int>(request.labeled_clean.size());
    trace.delta = engine ? engine->delta() : 0.0;
    run.traces.push_back(std::move(trace));
    return run;
}

}  // namespace alne
