#include "alne/probe.hpp"

#include "alne/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace alne;

namespace {

// Independent separability check: the classic perceptron loop converges only
// on linearly separable data.
bool perceptron_separable(const Eigen::MatrixXd& X, const std::vector<int>& y, int max_rounds) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
    double b = 0.0;
    for (int round = 0; round < max_rounds; ++round) {
        bool mistakes = false;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double target = y[static_cast<size_t>(i)] == 1 ? 1.0 : -1.0;
            if (target * (X.row(i).dot(w) + b) <= 0.0) {
                w += target * X.row(i).transpose();
                b += target;
                mistakes = true;
            }
        }
        if (!mistakes) return true;
    }
    return false;
}

struct ToyProblem {
    Eigen::MatrixXd X;
    std::vector<int> y;
};

ToyProblem two_blobs(int per_class, double gap, uint64_t seed) {
    Rng rng(seed);
    ToyProblem problem;
    problem.X.resize(2 * per_class, 2);
    for (int i = 0; i < per_class; ++i) {
        problem.X(i, 0) = -gap + 0.3 * rng.normal();
        problem.X(i, 1) = 0.3 * rng.normal();
        problem.y.push_back(0);
    }
    for (int i = 0; i < per_class; ++i) {
        problem.X(per_class + i, 0) = gap + 0.3 * rng.normal();
        problem.X(per_class + i, 1) = 0.3 * rng.normal();
        problem.y.push_back(1);
    }
    return problem;
}

double training_accuracy(const LinearProbe& probe, const Eigen::MatrixXd& X,
                         const std::vector<int>& y) {
    int correct = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (probe.predict(X.row(i).transpose()) == y[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / X.rows();
}

}  // namespace

TEST_CASE("probe reaches full accuracy on separable blobs") {
    const ToyProblem problem = two_blobs(50, 2.0, 17);
    REQUIRE(perceptron_separable(problem.X, problem.y, 200));

    LinearProbeConfig config;
    config.epochs = 200;
    config.batch_size = 25;
    config.seed = 5;
    const LinearProbe probe = train_linear_probe(problem.X, problem.y, 2, config);
    CHECK(training_accuracy(probe, problem.X, problem.y) == doctest::Approx(1.0));
    CHECK(probe.training_log.size() == 200);
}

TEST_CASE("single sample trains to its own label") {
    Eigen::MatrixXd X(1, 3);
    X << 0.2, -0.4, 1.0;
    LinearProbeConfig config;
    config.epochs = 50;
    config.seed = 1;
    const LinearProbe probe = train_linear_probe(X, {2}, 4, config);
    CHECK(probe.predict(X.row(0).transpose()) == 2);
}

TEST_CASE("loss gradient matches central finite differences") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 3 + static_cast<int>(rng.bounded(4));
        const int dim = 2 + static_cast<int>(rng.bounded(3));
        const int classes = 2 + static_cast<int>(rng.bounded(3));
        Eigen::MatrixXd X(n, dim);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < dim; ++d) X(i, d) = rng.normal();
            y[i] = static_cast<int>(rng.bounded(classes));
        }
        Eigen::MatrixXd W(classes, dim);
        Eigen::VectorXd b(classes);
        for (int c = 0; c < classes; ++c) {
            for (int d = 0; d < dim; ++d) W(c, d) = 0.5 * rng.normal();
            b(c) = 0.5 * rng.normal();
        }
        const double wd = 0.01;

        Eigen::MatrixXd dW;
        Eigen::VectorXd db;
        probe_loss_and_grad(W, b, X, y, wd, dW, db);

        const double h = 1e-6;
        Eigen::MatrixXd unused_w;
        Eigen::VectorXd unused_b;
        double max_err = 0.0;
        for (int c = 0; c < classes; ++c) {
            for (int d = 0; d < dim; ++d) {
                Eigen::MatrixXd wp = W, wm = W;
                wp(c, d) += h;
                wm(c, d) -= h;
                const double lp = probe_loss_and_grad(wp, b, X, y, wd, unused_w, unused_b);
                const double lm = probe_loss_and_grad(wm, b, X, y, wd, unused_w, unused_b);
                max_err = std::max(max_err, std::abs((lp - lm) / (2 * h) - dW(c, d)));
            }
            Eigen::VectorXd bp = b, bm = b;
            bp(c) += h;
            bm(c) -= h;
            const double lp = probe_loss_and_grad(W, bp, X, y, wd, unused_w, unused_b);
            const double lm = probe_loss_and_grad(W, bm, X, y, wd, unused_w, unused_b);
            max_err = std::max(max_err, std::abs((lp - lm) / (2 * h) - db(c)));
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("training is deterministic per seed") {
    const ToyProblem problem = two_blobs(20, 1.0, 31);
    LinearProbeConfig config;
    config.epochs = 30;
    config.batch_size = 10;
    config.seed = 77;
    const LinearProbe a = train_linear_probe(problem.X, problem.y, 2, config);
    const LinearProbe b = train_linear_probe(problem.X, problem.y, 2, config);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
    CHECK(a.training_log == b.training_log);
}

TEST_CASE("training loss trends downward") {
    const ToyProblem problem = two_blobs(40, 1.5, 41);
    LinearProbeConfig config;
    config.epochs = 120;
    config.batch_size = 20;
    config.seed = 3;
    const LinearProbe probe = train_linear_probe(problem.X, problem.y, 2, config);
    // smoothed over windows of 10 the sequence must not increase
    const auto window_mean = [&](size_t start) {
        double sum = 0.0;
        for (size_t i = start; i < start + 10; ++i) sum += probe.training_log[i];
        return sum / 10.0;
    };
    for (size_t start = 0; start + 20 <= probe.training_log.size(); start += 10) {
        CHECK(window_mean(start + 10) <= window_mean(start) + 1e-9);
    }
}

TEST_CASE("probe rejects invalid inputs") {
    Eigen::MatrixXd X(1, 2);
    X << 1.0, 0.0;
    LinearProbeConfig config;
    CHECK_THROWS_AS(train_linear_probe(Eigen::MatrixXd(0, 2), {}, 2, config),
                    std::invalid_argument);
    CHECK_THROWS_AS(train_linear_probe(X, {5}, 2, config), std::invalid_argument);
    config.base_lr = -1.0;
    CHECK_THROWS_AS(train_linear_probe(X, {0}, 2, config), std::invalid_argument);
}
