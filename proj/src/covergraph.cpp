#include "alne/covergraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace alne {

CoverGraph::CoverGraph(const EmbeddingPool& pool, double delta) : delta_(delta) {
    if (delta <= 0.0) throw std::invalid_argument("CoverGraph: delta must be positive");
    const int n = pool.size();
    const double delta_sq = delta * delta;

    out_.resize(n);
    in_.resize(n);
    odr_.assign(n, 0.0);

    for (int i = 0; i < n; ++i) {
        auto& list = out_[i];
        for (int j = 0; j < n; ++j) {
            if (i == j || squared_distance(pool, i, j) <= delta_sq) {
                list.targets.push_back(j);
            }
        }
        list.weights.assign(list.targets.size(), 1.0);
        odr_[i] = static_cast<double>(list.targets.size());
        for (size_t slot = 0; slot < list.targets.size(); ++slot) {
            in_[list.targets[slot]].push_back({i, static_cast<int>(slot)});
        }
    }
}

double CoverGraph::edge_weight(int src, int dst) const {
    const auto& list = out_[src];
    const auto it = std::lower_bound(list.targets.begin(), list.targets.end(), dst);
    if (it == list.targets.end() || *it != dst) return 0.0;  // no edge
    return list.weights[static_cast<size_t>(it - list.targets.begin())];
}

void CoverGraph::reset_weights() {
    for (int v = 0; v < size(); ++v) {
        std::fill(out_[v].weights.begin(), out_[v].weights.end(), 1.0);
        odr_[v] = static_cast<double>(out_[v].targets.size());
    }
}

void CoverGraph::set_edge(int src, int slot, double w) {
    double& stored = out_[src].weights[slot];
    if (stored != w) {
        odr_[src] += w - stored;
        stored = w;
    }
}

std::vector<char> CoverGraph::covered_by(const std::vector<int>& targets) const {
    std::vector<char> covered(out_.size(), 0);
    for (int t : targets) {
        for (int member : out_[t].targets) covered[member] = 1;
    }
    return covered;
}

void CoverGraph::zero_incoming(const std::vector<int>& targets) {
    const std::vector<char> covered = covered_by(targets);
    for (int x = 0; x < size(); ++x) {
        if (!covered[x]) continue;
        for (const InRef& ref : in_[x]) set_edge(ref.src, ref.slot, 0.0);
    }
}

void CoverGraph::zero_outgoing(const std::vector<int>& sources) {
    for (int s : sources) {
        auto& list = out_[s];
        std::fill(list.weights.begin(), list.weights.end(), 0.0);
        odr_[s] = 0.0;
    }
}

void CoverGraph::set_incoming_weight(const std::vector<int>& targets, double w) {
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("set_incoming_weight: w outside [0, 1]");
    const std::vector<char> covered = covered_by(targets);
    for (int x = 0; x < size(); ++x) {
        if (!covered[x]) continue;
        for (const InRef& ref : in_[x]) set_edge(ref.src, ref.slot, w);
    }
}

int CoverGraph::argmax_odr(const std::vector<int>& candidates) const {
    if (candidates.empty()) throw std::invalid_argument("argmax_odr: empty candidate set");
    int best = candidates.front();
    for (int c : candidates) {
        if (odr_[c] > odr_[best] || (odr_[c] == odr_[best] && c < best)) best = c;
    }
    return best;
}

double CoverGraph::max_odr(const std::vector<int>& candidates) const {
    double best = -std::numeric_limits<double>::infinity();
    for (int c : candidates) best = std::max(best, odr_[c]);
    return best;
}

std::vector<std::string> CoverGraph::dump_edges() const {
    std::vector<std::string> lines;
    for (int src = 0; src < size(); ++src) {
        const auto& list = out_[src];
        for (size_t slot = 0; slot < list.targets.size(); ++slot) {
            std::ostringstream line;
            line << src << ' ' << list.targets[slot] << ' ' << list.weights[slot];
            lines.push_back(line.str());
        }
    }
    return lines;
}

CoverageReport coverage(const EmbeddingPool& pool, double delta,
                        const std::vector<int>& labeled_clean) {
    const double delta_sq = delta * delta;
    std::vector<char> covered(pool.size(), 0);
    for (int z : labeled_clean) {
        for (int j = 0; j < pool.size(); ++j) {
            if (!covered[j] && squared_distance(pool, z, j) <= delta_sq) covered[j] = 1;
        }
    }
    CoverageReport report;
    for (int j = 0; j < pool.size(); ++j) {
        if (covered[j]) report.covered.push_back(j);
    }
    report.coverage_fraction =
        static_cast<double>(report.covered.size()) / static_cast<double>(pool.size());
    return report;
}

std::vector<double> delta_candidate_grid(double delta, int count) {
    if (count < 1) throw std::invalid_argument("delta_candidate_grid: count < 1");
    std::vector<double> grid(count);
    const double lo = 0.05 * delta;
    const double hi = 0.95 * delta;
    for (int k = 1; k <= count; ++k) {
        grid[k - 1] = lo + (hi - lo) * static_cast<double>(k) / count;
    }
    return grid;
}

DeltaUpdateResult update_delta(const EmbeddingPool& pool, const std::vector<int>& labeled_clean,
                               const std::vector<int>& unlabeled,
                               const std::vector<double>& candidate_deltas, double current_delta) {
    if (candidate_deltas.empty()) throw std::invalid_argument("update_delta: no candidates");
    std::vector<double> cand = candidate_deltas;
    std::sort(cand.begin(), cand.end());
    for (double d : cand) {
        if (d <= 0.0) throw std::invalid_argument("update_delta: candidate radius <= 0");
    }
    const int k = static_cast<int>(cand.size());
    std::vector<double> cand_sq(k);
    for (int i = 0; i < k; ++i) cand_sq[i] = cand[i] * cand[i];

    const int n = pool.size();
    // squared distance to the nearest clean labeled point; +inf when none
    std::vector<double> clean_dist(n, std::numeric_limits<double>::infinity());
    for (int z : labeled_clean) {
        for (int j = 0; j < n; ++j) {
            clean_dist[j] = std::min(clean_dist[j], squared_distance(pool, z, j));
        }
    }
    // covered_from[j]: first candidate index whose ball radius reaches a clean point
    std::vector<int> covered_from(n);
    for (int j = 0; j < n; ++j) {
        covered_from[j] = static_cast<int>(
            std::lower_bound(cand_sq.begin(), cand_sq.end(), clean_dist[j]) - cand_sq.begin());
    }

    // For each unlabeled x, vertex j contributes to ODR_k(x) for the candidate
    // range [first k with delta_k >= d(x,j), covered_from[j]); accumulate the
    // ranges with a difference array.
    std::vector<double> max_degree(k, 0.0);
    std::vector<int> diff(k + 1);
    for (int x : unlabeled) {
        std::fill(diff.begin(), diff.end(), 0);
        for (int j = 0; j < n; ++j) {
            const int hi = covered_from[j];
            if (hi == 0) continue;  // covered at every radius
            const double d = squared_distance(pool, x, j);
            const int lo = static_cast<int>(
                std::lower_bound(cand_sq.begin(), cand_sq.end(), d) - cand_sq.begin());
            if (lo < hi) {
                ++diff[lo];
                --diff[hi];
            }
        }
        int running = 0;
        for (int i = 0; i < k; ++i) {
            running += diff[i];
            max_degree[i] = std::max(max_degree[i], static_cast<double>(running));
        }
    }

    DeltaUpdateResult result;
    result.curve.reserve(k);
    for (int i = 0; i < k; ++i) result.curve.emplace_back(cand[i], max_degree[i]);

    int best = 0;
    for (int i = 1; i < k; ++i) {
        if (max_degree[i] >= max_degree[best]) best = i;  // ties prefer the larger radius
    }
    if (max_degree[best] <= 1.0) {
        result.delta = current_delta;
        result.exhausted = true;
    } else {
        result.delta = cand[best];
    }
    return result;
}

}  // namespace alne
