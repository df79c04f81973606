#include "alne/evaluation.hpp"

#include "alne/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace alne {

const char* to_string(TrainPolicyMode mode) {
    switch (mode) {
        case TrainPolicyMode::FilterThenTrain: return "filter_then_train";
        case TrainPolicyMode::AllSamples: return "all_samples";
        case TrainPolicyMode::TopPConfident: return "top_p_confident";
    }
    return "?";
}

TrainPolicyMode policy_from_string(const std::string& name) {
    if (name == "filter_then_train") return TrainPolicyMode::FilterThenTrain;
    if (name == "all_samples") return TrainPolicyMode::AllSamples;
    if (name == "top_p_confident") return TrainPolicyMode::TopPConfident;
    throw std::invalid_argument("unknown train policy: " + name);
}

FilterMetrics filter_metrics(const FilterVerdict& verdict, const Annotator& annotator,
                             const std::vector<int>& labeled) {
    int truly_noisy = 0, predicted_noisy = 0, hits = 0;
    for (int index : labeled) {
        const bool truth = annotator.corruption_mask().at(static_cast<size_t>(index));
        const bool predicted =
            std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), index);
        truly_noisy += truth ? 1 : 0;
        predicted_noisy += predicted ? 1 : 0;
        hits += (truth && predicted) ? 1 : 0;
    }
    FilterMetrics metrics;
    metrics.precision =
        predicted_noisy == 0 ? 1.0 : static_cast<double>(hits) / predicted_noisy;
    metrics.recall = truly_noisy == 0 ? 1.0 : static_cast<double>(hits) / truly_noisy;
    metrics.predicted_ratio = verdict.predicted_noise_ratio;
    return metrics;
}

EvalResult evaluate(const EmbeddingPool& pool, const LabelState& state,
                    const Annotator& annotator, const TrainPolicy& policy,
                    const EmbeddingPool& test_pool, const LinearProbeConfig& probe_config,
                    const BoundFilter* filter) {
    const std::vector<int>& labeled = state.labeled();
    if (labeled.empty()) throw std::invalid_argument("evaluate: nothing labeled");
    const std::vector<int> observed = state.observed_labels_of(labeled);

    EvalResult result;
    result.seed = probe_config.seed;

    std::vector<int> train_idx;
    std::vector<int> train_y;
    const auto keep = [&](int pos) {
        train_idx.push_back(labeled[pos]);
        train_y.push_back(observed[pos]);
    };

    FilterVerdict verdict;
    const bool needs_filter = policy.mode != TrainPolicyMode::AllSamples;
    if (needs_filter) {
        if (!filter || !filter->run) {
            throw std::invalid_argument("evaluate: policy requires a filter");
        }
        verdict = filter->run(labeled, observed, state.unlabeled());
        result.metrics = filter_metrics(verdict, annotator, labeled);
    }

    switch (policy.mode) {
        case TrainPolicyMode::AllSamples:
            for (size_t i = 0; i < labeled.size(); ++i) keep(static_cast<int>(i));
            break;
        case TrainPolicyMode::FilterThenTrain:
            for (size_t i = 0; i < labeled.size(); ++i) {
                if (std::binary_search(verdict.clean.begin(), verdict.clean.end(), labeled[i])) {
                    keep(static_cast<int>(i));
                }
            }
            break;
        case TrainPolicyMode::TopPConfident: {
            if (verdict.per_sample_score.empty()) {
                throw std::invalid_argument("evaluate: top_p_confident requires a scoring filter");
            }
            const double p = policy.p.value_or(1.0 - verdict.predicted_noise_ratio);
            if (p < 0.0 || p > 1.0) {
                throw std::invalid_argument("evaluate: p must be in [0, 1]");
            }
            const int take = std::clamp<int>(
                static_cast<int>(round_half_up(p * static_cast<double>(labeled.size()))), 0,
                static_cast<int>(labeled.size()));
            std::vector<int> order(labeled.size());
            std::iota(order.begin(), order.end(), 0);
            // highest scores first; equal scores resolve by index
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double sa = verdict.per_sample_score.at(labeled[a]);
                const double sb = verdict.per_sample_score.at(labeled[b]);
                return sa > sb || (sa == sb && labeled[a] < labeled[b]);
            });
            std::vector<int> picked(order.begin(), order.begin() + take);
            std::sort(picked.begin(), picked.end());
            for (int pos : picked) keep(pos);
            break;
        }
    }

    result.n_train_used = static_cast<int>(train_idx.size());
    if (train_idx.empty()) {
        result.degenerate = true;
        result.test_accuracy = 1.0 / pool.class_count;  // uniform-prior classifier
        return result;
    }

    LinearProbeConfig cfg = probe_config;
    cfg.batch_size = std::min<int>(cfg.batch_size, static_cast<int>(train_idx.size()));
    const LinearProbe probe =
        train_linear_probe(gather_features(pool, train_idx), train_y, pool.class_count, cfg);

    int correct = 0;
    for (int i = 0; i < test_pool.size(); ++i) {
        const Eigen::VectorXd x = test_pool.features.row(i).cast<double>();
        if (probe.predict(x) == test_pool.true_labels[i]) ++correct;
    }
    result.test_accuracy = static_cast<double>(correct) / test_pool.size();
    return result;
}

DeltaSummary accuracy_delta_vs_random(const std::vector<std::pair<uint64_t, double>>& strategy_acc,
                                      const std::vector<std::pair<uint64_t, double>>& random_acc) {
    if (strategy_acc.size() != random_acc.size() || strategy_acc.empty()) {
        throw std::invalid_argument("accuracy_delta_vs_random: seed sets differ");
    }
    auto sorted_strategy = strategy_acc;
    auto sorted_random = random_acc;
    const auto by_seed = [](const auto& a, const auto& b) { return a.first < b.first; };
    std::sort(sorted_strategy.begin(), sorted_strategy.end(), by_seed);
    std::sort(sorted_random.begin(), sorted_random.end(), by_seed);

    DeltaSummary summary;
    for (size_t i = 0; i < sorted_strategy.size(); ++i) {
        if (sorted_strategy[i].first != sorted_random[i].first) {
            throw std::invalid_argument("accuracy_delta_vs_random: seed sets differ");
        }
        summary.per_seed.push_back(sorted_strategy[i].second - sorted_random[i].second);
    }
    const double n = static_cast<double>(summary.per_seed.size());
    summary.mean = std::accumulate(summary.per_seed.begin(), summary.per_seed.end(), 0.0) / n;
    if (summary.per_seed.size() > 1) {
        double ss = 0.0;
        for (double d : summary.per_seed) ss += (d - summary.mean) * (d - summary.mean);
        summary.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return summary;
}

}  // namespace alne
