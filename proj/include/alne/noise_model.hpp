#pragma once

#include "alne/datapool.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace alne {

enum class NoiseKind { None, Symmetric, Asymmetric, InstanceDependent };

const char* to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double rate = 0.0;                              // symmetric / instance-dependent
    std::optional<Eigen::MatrixXd> transition;      // asymmetric: C x C row-stochastic
    std::optional<double> cluster_fraction;         // instance-dependent: share of anchor regions
    uint64_t seed = 0;
};

/// Fixed noisy labeling of the whole pool; repeat queries always agree.
class Annotator {
public:
    Annotator(std::vector<int> noisy_labels, std::vector<bool> corruption_mask);

    const std::vector<int>& noisy_labels() const { return noisy_labels_; }
    const std::vector<bool>& corruption_mask() const { return corruption_mask_; }

    int annotate_one(int index) const;
    std::map<int, int> annotate(const std::vector<int>& indices) const;

    int size() const { return static_cast<int>(noisy_labels_.size()); }
    double realized_noise_rate() const;

private:
    std::vector<int> noisy_labels_;
    std::vector<bool> corruption_mask_;
};

Annotator build_annotator(const EmbeddingPool& pool, const NoiseSpec& spec);

/// Annotator backed by an externally produced labels file.
Annotator annotator_from_labels(const EmbeddingPool& pool, const std::vector<int>& noisy_labels);

struct TransitionEstimate {
    Eigen::MatrixXd transition;       // C x C, rows sum to 1
    std::vector<std::string> notes;   // degenerate rows, clamped mixing, ...
};

// Row-normalized confusion matrix of a weak linear probe, mixed with the
// identity so the expected off-diagonal mass hits target_rate.
TransitionEstimate confusion_transition(const EmbeddingPool& pool, int probe_epochs,
                                        double target_rate, uint64_t seed);

}  // namespace alne
