#include "alne/probe.hpp"

#include "alne/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace alne {

int LinearProbe::predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = logits(x);
    int best = 0;
    for (int c = 1; c < z.size(); ++c) {
        if (z(c) > z(best)) best = c;  // ties keep the lowest class
    }
    return best;
}

double probe_loss_and_grad(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                           const Eigen::MatrixXd& X, const std::vector<int>& y,
                           double weight_decay, Eigen::MatrixXd& dW, Eigen::VectorXd& db) {
    const int n = static_cast<int>(X.rows());
    const int classes = static_cast<int>(weights.rows());
    dW.setZero(weights.rows(), weights.cols());
    db.setZero(bias.size());

    double loss = 0.0;
    Eigen::VectorXd z(classes), p(classes);
    for (int i = 0; i < n; ++i) {
        z.noalias() = weights * X.row(i).transpose() + bias;
        const double zmax = z.maxCoeff();
        p = (z.array() - zmax).exp();
        const double denom = p.sum();
        p /= denom;
        loss += -(z(y[i]) - zmax - std::log(denom));
        p(y[i]) -= 1.0;  // dz for cross-entropy
        dW.noalias() += p * X.row(i);
        db += p;
    }
    const double inv_n = 1.0 / n;
    loss *= inv_n;
    dW *= inv_n;
    db *= inv_n;

    loss += 0.5 * weight_decay * (weights.squaredNorm() + bias.squaredNorm());
    dW += weight_decay * weights;
    db += weight_decay * bias;
    return loss;
}

LinearProbe train_linear_probe(const Eigen::MatrixXd& X, const std::vector<int>& y,
                               int class_count, const LinearProbeConfig& config,
                               const EpochObserver& observer) {
    const int n = static_cast<int>(X.rows());
    if (n == 0) throw std::invalid_argument("train_linear_probe: empty input");
    if (static_cast<int>(y.size()) != n) {
        throw std::invalid_argument("train_linear_probe: label count mismatch");
    }
    if (config.epochs < 1 || config.base_lr <= 0.0 || config.momentum < 0.0 ||
        config.momentum >= 1.0 || config.batch_size < 1) {
        throw std::invalid_argument("train_linear_probe: invalid config");
    }
    for (int label : y) {
        if (label < 0 || label >= class_count) {
            throw std::invalid_argument("train_linear_probe: label out of range");
        }
    }

    LinearProbe probe;
    probe.weights.setZero(class_count, X.cols());
    probe.bias.setZero(class_count);
    probe.training_log.reserve(config.epochs);

    Eigen::MatrixXd vel_w = Eigen::MatrixXd::Zero(class_count, X.cols());
    Eigen::VectorXd vel_b = Eigen::VectorXd::Zero(class_count);
    Eigen::MatrixXd dW;
    Eigen::VectorXd db;

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(config.seed);

    const int batch = std::min(config.batch_size, n);
    Eigen::MatrixXd batch_x(batch, X.cols());
    std::vector<int> batch_y(batch);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.base_lr;
        if (config.schedule == LrSchedule::Cosine) {
            lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / config.epochs));
        }

        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int start = 0; start < n; start += batch) {
            const int count = std::min(batch, n - start);
            for (int k = 0; k < count; ++k) {
                batch_x.row(k) = X.row(order[start + k]);
                batch_y[k] = y[order[start + k]];
            }
            const auto bx = batch_x.topRows(count);
            std::vector<int> by(batch_y.begin(), batch_y.begin() + count);
            const double loss =
                probe_loss_and_grad(probe.weights, probe.bias, bx, by, config.weight_decay, dW, db);
            epoch_loss += loss * count;

            vel_w = config.momentum * vel_w + dW;
            vel_b = config.momentum * vel_b + db;
            probe.weights -= lr * (dW + config.momentum * vel_w);
            probe.bias -= lr * (db + config.momentum * vel_b);
        }
        probe.training_log.push_back(epoch_loss / n);
        if (observer) observer(epoch, probe);
    }

    if (!probe.weights.allFinite() || !probe.bias.allFinite()) {
        throw std::runtime_error("train_linear_probe: diverged to non-finite parameters");
    }
    return probe;
}

Eigen::MatrixXd gather_features(const EmbeddingPool& pool, const std::vector<int>& indices) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), pool.dim());
    for (size_t i = 0; i < indices.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = pool.features.row(indices[i]).cast<double>();
    }
    return out;
}

std::vector<int> predict_all(const LinearProbe& probe, const Eigen::MatrixXd& X) {
    std::vector<int> out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out[static_cast<size_t>(i)] = probe.predict(X.row(i).transpose());
    }
    return out;
}

}  // namespace alne
