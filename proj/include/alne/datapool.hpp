#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace alne {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable pool of embeddings with hidden ground-truth labels.
struct EmbeddingPool {
    FeatureMatrix features;        // N x D, rows unit-L2-normalized when `normalized`
    std::vector<int> true_labels;  // N entries in [0, C)
    int class_count = 0;
    bool normalized = false;

    int size() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
};

// Squared Euclidean distance between rows, double accumulation in index
// order. Every module (and every test oracle that wants bit-equality)
// computes distances exactly this way.
inline double squared_distance(const EmbeddingPool& pool, int a, int b) {
    const float* ra = pool.features.row(a).data();
    const float* rb = pool.features.row(b).data();
    double acc = 0.0;
    for (int d = 0; d < pool.dim(); ++d) {
        const double diff = static_cast<double>(ra[d]) - static_cast<double>(rb[d]);
        acc += diff * diff;
    }
    return acc;
}

struct SyntheticSpec {
    int class_count = 2;
    int points_per_class = 10;
    int dimension = 2;
    double cluster_spread = 0.1;   // per-class isotropic stddev
    double center_spread = 1.0;    // scale of the random class centers
    uint64_t seed = 0;
    // Point-noise stream selector. Centers depend on seed alone, so two specs
    // differing only here sample independent points from the same mixture
    // (this is how held-out synthetic test pools are made).
    uint64_t point_stream = 0;
};

/// Same mixture as `train`, independent points, `fraction` of the size.
SyntheticSpec synthetic_test_spec(const SyntheticSpec& train, double fraction);

/// Labeled/unlabeled bookkeeping for one annotation run.
class LabelState {
public:
    LabelState() = default;
    LabelState(int pool_size, int budget);

    const std::vector<int>& unlabeled() const { return unlabeled_; }
    const std::vector<int>& labeled() const { return labeled_; }
    int budget() const { return budget_; }
    int observed_label(int index) const;
    bool is_labeled(int index) const;
    const std::vector<std::pair<int, int>>& query_log() const { return query_log_; }

    /// Moves `picks` from U to L with their observed labels; one annotation round.
    void record_round(int round, const std::vector<int>& picks, const std::vector<int>& labels);

    std::vector<int> observed_labels_of(const std::vector<int>& indices) const;

private:
    std::vector<int> unlabeled_;  // ascending
    std::vector<int> labeled_;    // ascending
    std::vector<int> observed_;   // -1 where unlabeled
    std::vector<std::pair<int, int>> query_log_;
    int budget_ = 0;
};

EmbeddingPool generate_synthetic(const SyntheticSpec& spec);

// ALNE container: "ALNE" magic, u32 LE version=1, u64 LE N, u64 LE D,
// N*D f32 LE row-major. Labels ride in a separate text file, one class
// index per line.
void save_embeddings(const EmbeddingPool& pool, const std::string& features_path,
                     const std::string& labels_path);
EmbeddingPool load_embeddings(const std::string& features_path, const std::string& labels_path);

void save_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> load_labels(const std::string& path);

LabelState init_label_state(const EmbeddingPool& pool, int budget);

/// B = round(expected_spc * C / (1 - q)), ties up.
int budget_for_spc(int expected_spc, int class_count, double noise_rate);

}  // namespace alne
