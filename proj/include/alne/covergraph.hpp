#pragma once

#include "alne/datapool.hpp"

#include <utility>
#include <vector>

namespace alne {

/// Weighted directed delta-ball graph with cached out-degree ranks.
///
/// Edge (x, x') exists iff d(x, x') <= delta (closed ball, so the self-edge
/// is always present). Weights live in [0, 1]; the out-degree rank of a
/// vertex is the sum of its outgoing weights.
class CoverGraph {
public:
    CoverGraph(const EmbeddingPool& pool, double delta);

    double delta() const { return delta_; }
    int size() const { return static_cast<int>(out_.size()); }

    double odr(int vertex) const { return odr_[vertex]; }
    const std::vector<int>& ball(int vertex) const { return out_[vertex].targets; }
    double edge_weight(int src, int dst) const;

    /// All weights back to 1 (the freshly built graph, structure unchanged).
    void reset_weights();

    /// Weights of all edges into B(targets) drop to 0.
    void zero_incoming(const std::vector<int>& targets);

    /// Outgoing weights of each source drop to 0.
    void zero_outgoing(const std::vector<int>& sources);

    /// Weights of all edges into B(targets) are overwritten with w.
    void set_incoming_weight(const std::vector<int>& targets, double w);

    /// Candidate with maximal odr; ties break toward the lowest index.
    int argmax_odr(const std::vector<int>& candidates) const;

    double max_odr(const std::vector<int>& candidates) const;

    /// "src dst weight" per line, for debugging small graphs.
    std::vector<std::string> dump_edges() const;

private:
    struct OutList {
        std::vector<int> targets;      // ascending
        std::vector<double> weights;   // parallel to targets
    };
    struct InRef {
        int src;
        int slot;  // position inside out_[src]
    };

    void set_edge(int src, int slot, double w);
    std::vector<char> covered_by(const std::vector<int>& targets) const;

    double delta_ = 0.0;
    std::vector<OutList> out_;
    std::vector<std::vector<InRef>> in_;
    std::vector<double> odr_;
};

struct CoverageReport {
    std::vector<int> covered;  // ascending
    double coverage_fraction = 0.0;
};

/// Union of delta-balls around labeled_clean, no graph required.
CoverageReport coverage(const EmbeddingPool& pool, double delta,
                        const std::vector<int>& labeled_clean);

struct DeltaUpdateResult {
    double delta = 0.0;
    bool exhausted = false;   // every candidate's max degree was <= 1
    std::vector<std::pair<double, double>> curve;  // (delta', max odr over unlabeled)
};

/// Evenly spaced radius candidates in (0.05 * delta, 0.95 * delta].
std::vector<double> delta_candidate_grid(double delta, int count = 16);

// Picks the candidate radius whose clean-masked graph has the highest
// maximal out-degree over the unlabeled vertices; ties prefer the larger
// radius. When nothing beats a bare self-loop, `exhausted` is set and
// `delta` echoes current_delta.
DeltaUpdateResult update_delta(const EmbeddingPool& pool, const std::vector<int>& labeled_clean,
                               const std::vector<int>& unlabeled,
                               const std::vector<double>& candidate_deltas, double current_delta);

}  // namespace alne
