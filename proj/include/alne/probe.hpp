#pragma once

#include "alne/datapool.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace alne {

enum class LrSchedule { Cosine, Constant };

struct LinearProbeConfig {
    int epochs = 500;
    // the classic SGD recipe with the learning rate rescaled for unit-norm
    // embeddings (every pool in this codebase is L2-normalized)
    double base_lr = 0.4;
    double momentum = 0.9;  // Nesterov
    double weight_decay = 3e-4;
    int batch_size = 100;
    LrSchedule schedule = LrSchedule::Cosine;
    uint64_t seed = 0;
};

/// Multinomial logistic regression over fixed embeddings.
struct LinearProbe {
    Eigen::MatrixXd weights;  // C x D
    Eigen::VectorXd bias;     // C
    std::vector<double> training_log;  // mean loss per epoch

    Eigen::VectorXd logits(const Eigen::VectorXd& x) const { return weights * x + bias; }

    int predict(const Eigen::VectorXd& x) const;

    int class_count() const { return static_cast<int>(weights.rows()); }
};

// Cross-entropy over softmax(Wx+b) plus 0.5 * weight_decay * (|W|^2 + |b|^2),
// averaged over the rows of X. Gradients are written into dW/db.
double probe_loss_and_grad(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                           const Eigen::MatrixXd& X, const std::vector<int>& y,
                           double weight_decay, Eigen::MatrixXd& dW, Eigen::VectorXd& db);

using EpochObserver = std::function<void(int epoch, const LinearProbe& probe)>;

// Mini-batch SGD with Nesterov momentum; deterministic per config.seed.
// The observer (when set) fires after every completed epoch.
LinearProbe train_linear_probe(const Eigen::MatrixXd& X, const std::vector<int>& y,
                               int class_count, const LinearProbeConfig& config,
                               const EpochObserver& observer = {});

/// Rows of `pool.features` at `indices`, promoted to double.
Eigen::MatrixXd gather_features(const EmbeddingPool& pool, const std::vector<int>& indices);

std::vector<int> predict_all(const LinearProbe& probe, const Eigen::MatrixXd& X);

}  // namespace alne
