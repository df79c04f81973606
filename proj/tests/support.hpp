// Shared fixtures and brute-force oracles. Everything here recomputes from
// first principles so the library paths under test stay independent.
#pragma once

#include "alne/datapool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

// Same arithmetic as the library distance (index-order double accumulation),
// written out independently.
inline double sq_dist(const alne::EmbeddingPool& pool, int a, int b) {
    double acc = 0.0;
    for (int d = 0; d < pool.dim(); ++d) {
        const double diff = static_cast<double>(pool.features(a, d)) -
                            static_cast<double>(pool.features(b, d));
        acc += diff * diff;
    }
    return acc;
}

inline std::vector<std::vector<char>> ball_adjacency(const alne::EmbeddingPool& pool,
                                                     double delta) {
    const double dsq = delta * delta;
    std::vector<std::vector<char>> adj(pool.size(), std::vector<char>(pool.size(), 0));
    for (int i = 0; i < pool.size(); ++i) {
        for (int j = 0; j < pool.size(); ++j) {
            adj[i][j] = (i == j || sq_dist(pool, i, j) <= dsq) ? 1 : 0;
        }
    }
    return adj;
}

// Plain greedy max-coverage: argmax of uncovered ball members (ties lowest
// index), then mark the winner's ball covered.
inline std::vector<int> greedy_cover_sequence(const alne::EmbeddingPool& pool, double delta,
                                              int budget,
                                              const std::vector<int>& labeled_clean = {}) {
    const auto adj = ball_adjacency(pool, delta);
    std::vector<char> covered(pool.size(), 0);
    std::vector<char> taken(pool.size(), 0);
    for (int z : labeled_clean) {
        taken[z] = 1;
        for (int j = 0; j < pool.size(); ++j) {
            if (adj[z][j]) covered[j] = 1;
        }
    }
    std::vector<int> sequence;
    for (int step = 0; step < budget; ++step) {
        int best = -1;
        int best_score = -1;
        for (int x = 0; x < pool.size(); ++x) {
            if (taken[x]) continue;
            int score = 0;
            for (int j = 0; j < pool.size(); ++j) {
                if (adj[x][j] && !covered[j]) ++score;
            }
            if (score > best_score) {
                best_score = score;
                best = x;
            }
        }
        if (best < 0) break;
        sequence.push_back(best);
        taken[best] = 1;
        for (int j = 0; j < pool.size(); ++j) {
            if (adj[best][j]) covered[j] = 1;
        }
    }
    return sequence;
}

// Greedy k-center: maximize the min squared distance to anchors+picks,
// ties lowest index; empty anchor set starts at index 0.
inline std::vector<int> k_center_sequence(const alne::EmbeddingPool& pool, int budget,
                                          const std::vector<int>& anchors = {}) {
    std::vector<double> min_dist(pool.size(), std::numeric_limits<double>::infinity());
    std::vector<char> taken(pool.size(), 0);
    for (int a : anchors) {
        taken[a] = 1;
        for (int j = 0; j < pool.size(); ++j) {
            min_dist[j] = std::min(min_dist[j], sq_dist(pool, a, j));
        }
    }
    std::vector<int> sequence;
    for (int step = 0; step < budget; ++step) {
        int best = -1;
        for (int x = 0; x < pool.size(); ++x) {
            if (taken[x]) continue;
            if (best < 0 || min_dist[x] > min_dist[best]) best = x;
        }
        if (best < 0) break;
        sequence.push_back(best);
        taken[best] = 1;
        for (int j = 0; j < pool.size(); ++j) {
            min_dist[j] = std::min(min_dist[j], sq_dist(pool, best, j));
        }
    }
    return sequence;
}

// Leave-one-out 1-nearest-neighbor accuracy on true labels.
inline double one_nn_accuracy(const alne::EmbeddingPool& pool) {
    int correct = 0;
    for (int i = 0; i < pool.size(); ++i) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int j = 0; j < pool.size(); ++j) {
            if (j == i) continue;
            const double d = sq_dist(pool, i, j);
            if (d < best_dist) {
                best_dist = d;
                best = j;
            }
        }
        if (pool.true_labels[best] == pool.true_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / pool.size();
}

// Coverage of the clean labeled set, counted directly from the distance table.
inline double clean_coverage_fraction(const alne::EmbeddingPool& pool, double delta,
                                      const std::vector<int>& clean_labeled) {
    const double dsq = delta * delta;
    std::vector<char> covered(pool.size(), 0);
    for (int z : clean_labeled) {
        for (int j = 0; j < pool.size(); ++j) {
            if (sq_dist(pool, z, j) <= dsq) covered[j] = 1;
        }
    }
    int total = 0;
    for (char c : covered) total += c;
    return static_cast<double>(total) / pool.size();
}

// Leave-one-out k-NN vote on a boolean target, for noise clusterability.
inline double knn_mask_accuracy(const alne::EmbeddingPool& pool, const std::vector<bool>& mask,
                                int k) {
    int correct = 0;
    std::vector<std::pair<double, int>> order(pool.size());
    for (int i = 0; i < pool.size(); ++i) {
        order.clear();
        for (int j = 0; j < pool.size(); ++j) {
            if (j != i) order.emplace_back(sq_dist(pool, i, j), j);
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        int votes = 0;
        for (int r = 0; r < k; ++r) votes += mask[order[r].second] ? 1 : 0;
        const bool predicted = votes * 2 > k;
        if (predicted == mask[i]) ++correct;
    }
    return static_cast<double>(correct) / pool.size();
}

}  // namespace oracle
