#pragma once

#include "alne/datapool.hpp"
#include "alne/noise_model.hpp"
#include "alne/probe.hpp"

#include <map>
#include <string>
#include <vector>

namespace alne {

/// Clean/noisy partition of a labeled set.
struct FilterVerdict {
    std::vector<int> clean;  // ascending
    std::vector<int> noisy;  // ascending
    double predicted_noise_ratio = 0.0;          // |noisy| / |L|, 0 for empty L
    std::map<int, double> per_sample_score;      // optional (AUM margins etc.)

    int labeled_count() const { return static_cast<int>(clean.size() + noisy.size()); }
};

FilterVerdict make_verdict(const std::vector<int>& labeled, const std::vector<char>& noisy_mask);

/// "index observed_label clean|noisy score" per labeled index.
std::vector<std::string> format_verdict(const FilterVerdict& verdict,
                                        const std::vector<int>& labeled,
                                        const std::vector<int>& observed);

// ---- k-fold cross-validation filter -------------------------------------

struct CrossValidationConfig {
    int folds = 3;
    int repeats = 3;  // repeated splits give each sample `repeats` held-out votes
    LinearProbeConfig probe{.epochs = 200, .batch_size = 50};
    uint64_t seed = 0;
};

// Noisy iff fewer than half of the held-out predictions match the observed
// label. Folds are stratified by observed label where possible.
FilterVerdict filter_crossvalidation(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                     const std::vector<int>& observed,
                                     const CrossValidationConfig& config);

// ---- low-budget AUM ------------------------------------------------------

struct AumConfig {
    // 40-epoch early stop; the learning rate is the App-C recipe rescaled
    // for unit-norm embeddings (gradient scale goes with |x|^2)
    LinearProbeConfig probe{.epochs = 40, .base_lr = 0.4, .momentum = 0.9,
                            .weight_decay = 3e-4, .batch_size = 100,
                            .schedule = LrSchedule::Cosine};
    double fake_percentile = 0.80;  // threshold quantile over fake-class scores
    uint64_t seed = 0;
};

// Margins of a (C+1)-way probe over 40 epochs; fake-class samples drawn from
// the unlabeled pool calibrate the clean threshold. Scores of the real
// samples are returned in per_sample_score.
FilterVerdict filter_lowbudget_aum(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                   const std::vector<int>& observed,
                                   const std::vector<int>& unlabeled, const AumConfig& config);

/// AUM scores with a known noise rate: exactly round(q|L|) lowest scores are noisy.
FilterVerdict filter_aum_known_rate(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                    const std::vector<int>& observed,
                                    const std::vector<int>& unlabeled, double known_rate,
                                    const AumConfig& config);

/// Number of fake-class samples the AUM filter will draw.
int aum_fake_count(int labeled_count, int class_count);

// ---- geometric filters ---------------------------------------------------

int knn_filter_k(int labeled_count, int class_count);

FilterVerdict filter_knn(const EmbeddingPool& pool, const std::vector<int>& labeled,
                         const std::vector<int>& observed, int class_count);

struct CentroidsConfig {
    int trials = 10;
    double subset_fraction = 0.7;
    uint64_t seed = 0;
};

// RANSAC centroids: per class keep the subset mean with the smallest
// diagonal-covariance determinant; noisy iff the nearest centroid is foreign.
FilterVerdict filter_centroids_ransac(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                      const std::vector<int>& observed, int class_count,
                                      const CentroidsConfig& config);

// ---- probe-ensemble and eigen-alignment filters ---------------------------

struct DisagreeNetConfig {
    int ensemble_size = 3;
    std::vector<int> checkpoint_epochs{10, 20, 30, 40};
    LinearProbeConfig probe{.epochs = 40, .base_lr = 0.025, .momentum = 0.9,
                            .weight_decay = 3e-4, .batch_size = 100,
                            .schedule = LrSchedule::Cosine};
    uint64_t seed = 0;
};

FilterVerdict filter_disagreenet(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                 const std::vector<int>& observed, int class_count,
                                 const DisagreeNetConfig& config);

// Per-class principal direction of the feature scatter; members whose squared
// cosine alignment falls in the lower 2-means cluster are noisy.
FilterVerdict filter_fine(const EmbeddingPool& pool, const std::vector<int>& labeled,
                          const std::vector<int>& observed, int class_count);

// ---- oracle --------------------------------------------------------------

FilterVerdict filter_ideal(const std::vector<int>& labeled, const Annotator& annotator);

}  // namespace alne
