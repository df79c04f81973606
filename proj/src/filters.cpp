#include "alne/filters.hpp"

#include "alne/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace alne {

FilterVerdict make_verdict(const std::vector<int>& labeled, const std::vector<char>& noisy_mask) {
    if (labeled.size() != noisy_mask.size()) {
        throw std::invalid_argument("make_verdict: mask size mismatch");
    }
    FilterVerdict verdict;
    for (size_t i = 0; i < labeled.size(); ++i) {
        (noisy_mask[i] ? verdict.noisy : verdict.clean).push_back(labeled[i]);
    }
    std::sort(verdict.clean.begin(), verdict.clean.end());
    std::sort(verdict.noisy.begin(), verdict.noisy.end());
    verdict.predicted_noise_ratio =
        labeled.empty() ? 0.0
                        : static_cast<double>(verdict.noisy.size()) /
                              static_cast<double>(labeled.size());
    return verdict;
}

std::vector<std::string> format_verdict(const FilterVerdict& verdict,
                                        const std::vector<int>& labeled,
                                        const std::vector<int>& observed) {
    std::vector<std::string> lines;
    lines.reserve(labeled.size());
    for (size_t i = 0; i < labeled.size(); ++i) {
        const int index = labeled[i];
        const bool noisy =
            std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), index);
        double score = 0.0;
        if (const auto it = verdict.per_sample_score.find(index);
            it != verdict.per_sample_score.end()) {
            score = it->second;
        }
        std::ostringstream line;
        line << index << ' ' << observed[i] << ' ' << (noisy ? "noisy" : "clean") << ' '
             << score;
        lines.push_back(line.str());
    }
    return lines;
}

namespace {

void check_labeled_inputs(const std::vector<int>& labeled, const std::vector<int>& observed) {
    if (labeled.size() != observed.size()) {
        throw std::invalid_argument("filter: labeled/observed size mismatch");
    }
}

// squared distance between two labeled pool rows, same arithmetic as
// alne::squared_distance
double sq_dist(const EmbeddingPool& pool, int a, int b) { return squared_distance(pool, a, b); }

}  // namespace

// ---- cross-validation ------------------------------------------------------

FilterVerdict filter_crossvalidation(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                     const std::vector<int>& observed,
                                     const CrossValidationConfig& config) {
    check_labeled_inputs(labeled, observed);
    if (labeled.empty()) return make_verdict(labeled, {});
    const int n = static_cast<int>(labeled.size());
    if (config.folds < 2) throw std::invalid_argument("filter_crossvalidation: folds < 2");
    if (config.repeats < 1) throw std::invalid_argument("filter_crossvalidation: repeats < 1");
    if (n < config.folds) {
        throw std::invalid_argument("filter_crossvalidation: |L| < folds");
    }
    const int classes = pool.class_count;

    std::vector<int> agreements(n, 0);
    for (int repeat = 0; repeat < config.repeats; ++repeat) {
        // stratified fold assignment: shuffle within each observed class,
        // then deal round-robin
        Rng rng(derive_seed(config.seed, 1000 + static_cast<uint64_t>(repeat)));
        std::vector<std::vector<int>> by_class(classes);
        for (int i = 0; i < n; ++i) by_class[observed[i]].push_back(i);
        std::vector<int> fold_of(n, 0);
        int cursor = 0;
        for (auto& group : by_class) {
            rng.shuffle(group);
            for (int pos : group) fold_of[pos] = cursor++ % config.folds;
        }

        for (int fold = 0; fold < config.folds; ++fold) {
            std::vector<int> train_rows, held_rows;
            for (int i = 0; i < n; ++i) (fold_of[i] == fold ? held_rows : train_rows).push_back(i);
            if (train_rows.empty() || held_rows.empty()) continue;

            std::vector<int> train_idx, train_y;
            for (int i : train_rows) {
                train_idx.push_back(labeled[i]);
                train_y.push_back(observed[i]);
            }
            LinearProbeConfig probe_cfg = config.probe;
            probe_cfg.batch_size = std::min<int>(probe_cfg.batch_size,
                                                 static_cast<int>(train_idx.size()));
            probe_cfg.seed = derive_seed(config.seed, 2000 + static_cast<uint64_t>(repeat) * 16 +
                                                          static_cast<uint64_t>(fold));
            const LinearProbe probe =
                train_linear_probe(gather_features(pool, train_idx), train_y, classes, probe_cfg);

            for (int i : held_rows) {
                const Eigen::VectorXd x = pool.features.row(labeled[i]).cast<double>();
                if (probe.predict(x) == observed[i]) ++agreements[i];
            }
        }
    }

    std::vector<char> noisy(n, 0);
    const double votes = static_cast<double>(config.repeats);
    for (int i = 0; i < n; ++i) {
        noisy[i] = agreements[i] < 0.5 * votes ? 1 : 0;
    }
    return make_verdict(labeled, noisy);
}

// ---- AUM -------------------------------------------------------------------

int aum_fake_count(int labeled_count, int class_count) {
    return std::max<int>(class_count,
                         static_cast<int>(round_half_up(static_cast<double>(labeled_count) /
                                                        (class_count + 1))));
}

namespace {

// AUM scores of the real labeled samples: train a (C+1)-way probe on
// labeled + fake samples, track per-epoch margins (assigned logit minus the
// best other logit) for everyone, average over epochs.
struct AumScores {
    std::vector<double> real;  // aligned with labeled
    std::vector<double> fake;  // aligned with the fake draw
};

AumScores compute_aum_scores(const EmbeddingPool& pool, const std::vector<int>& labeled,
                             const std::vector<int>& observed, const std::vector<int>& unlabeled,
                             const AumConfig& config) {
    const int n = static_cast<int>(labeled.size());
    const int classes = pool.class_count;
    const int fake_count = aum_fake_count(n, classes);
    if (fake_count < 5) {
        throw std::invalid_argument("filter_lowbudget_aum: fewer than 5 fake samples, "
                                    "threshold would be meaningless");
    }
    if (static_cast<int>(unlabeled.size()) < fake_count) {
        throw std::invalid_argument("filter_lowbudget_aum: unlabeled pool too small to donate " +
                                    std::to_string(fake_count) + " fake samples");
    }

    Rng rng(derive_seed(config.seed, "aum-fakes"));
    const std::vector<int> fakes = rng.sample(unlabeled, static_cast<size_t>(fake_count));

    std::vector<int> train_idx = labeled;
    train_idx.insert(train_idx.end(), fakes.begin(), fakes.end());
    std::vector<int> train_y = observed;
    train_y.insert(train_y.end(), static_cast<size_t>(fake_count), classes);  // fake label C

    const Eigen::MatrixXd X = gather_features(pool, train_idx);
    LinearProbeConfig probe_cfg = config.probe;
    probe_cfg.batch_size = std::min<int>(probe_cfg.batch_size, n);  // min(100, |L|)
    probe_cfg.seed = derive_seed(config.seed, "aum-probe");

    std::vector<double> margin_sum(train_idx.size(), 0.0);
    const auto observer = [&](int /*epoch*/, const LinearProbe& probe) {
        for (size_t i = 0; i < train_idx.size(); ++i) {
            const Eigen::VectorXd z = probe.logits(X.row(static_cast<Eigen::Index>(i)).transpose());
            const int assigned = train_y[i];
            double best_other = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < z.size(); ++c) {
                if (c != assigned) best_other = std::max(best_other, z(c));
            }
            margin_sum[i] += z(assigned) - best_other;
        }
    };
    train_linear_probe(X, train_y, classes + 1, probe_cfg, observer);

    AumScores scores;
    scores.real.resize(n);
    scores.fake.resize(fake_count);
    const double inv_epochs = 1.0 / probe_cfg.epochs;
    for (int i = 0; i < n; ++i) scores.real[i] = margin_sum[i] * inv_epochs;
    for (int f = 0; f < fake_count; ++f) scores.fake[f] = margin_sum[n + f] * inv_epochs;
    return scores;
}

double percentile_nearest_rank(std::vector<double> values, double quantile) {
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<long long>(std::ceil(quantile * values.size()));
    const auto idx = std::clamp<long long>(rank - 1, 0, static_cast<long long>(values.size()) - 1);
    return values[static_cast<size_t>(idx)];
}

}  // namespace

FilterVerdict filter_lowbudget_aum(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                   const std::vector<int>& observed,
                                   const std::vector<int>& unlabeled, const AumConfig& config) {
    check_labeled_inputs(labeled, observed);
    if (labeled.empty()) return make_verdict(labeled, {});

    const AumScores scores = compute_aum_scores(pool, labeled, observed, unlabeled, config);
    const double threshold = percentile_nearest_rank(scores.fake, config.fake_percentile);

    std::vector<char> noisy(labeled.size(), 0);
    FilterVerdict verdict;
    for (size_t i = 0; i < labeled.size(); ++i) {
        noisy[i] = scores.real[i] > threshold ? 0 : 1;
    }
    verdict = make_verdict(labeled, noisy);
    for (size_t i = 0; i < labeled.size(); ++i) verdict.per_sample_score[labeled[i]] = scores.real[i];
    return verdict;
}

FilterVerdict filter_aum_known_rate(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                    const std::vector<int>& observed,
                                    const std::vector<int>& unlabeled, double known_rate,
                                    const AumConfig& config) {
    check_labeled_inputs(labeled, observed);
    if (known_rate < 0.0 || known_rate > 1.0) {
        throw std::invalid_argument("filter_aum_known_rate: rate must be in [0, 1]");
    }
    if (labeled.empty()) return make_verdict(labeled, {});
    const int n = static_cast<int>(labeled.size());
    const int noisy_count =
        std::clamp<int>(static_cast<int>(round_half_up(known_rate * n)), 0, n);

    std::vector<double> scores(n, 0.0);
    FilterVerdict verdict;
    if (noisy_count > 0 && noisy_count < n) {
        scores = compute_aum_scores(pool, labeled, observed, unlabeled, config).real;
    }
    // lowest scores first; equal scores resolve by index
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[a] < scores[b] || (scores[a] == scores[b] && labeled[a] < labeled[b]);
    });
    std::vector<char> noisy(n, 0);
    for (int k = 0; k < noisy_count; ++k) noisy[order[k]] = 1;
    verdict = make_verdict(labeled, noisy);
    for (int i = 0; i < n; ++i) verdict.per_sample_score[labeled[i]] = scores[i];
    return verdict;
}

// ---- kNN --------------------------------------------------------------------

int knn_filter_k(int labeled_count, int class_count) {
    return std::max(1, labeled_count / class_count);
}

FilterVerdict filter_knn(const EmbeddingPool& pool, const std::vector<int>& labeled,
                         const std::vector<int>& observed, int class_count) {
    check_labeled_inputs(labeled, observed);
    if (labeled.empty()) return make_verdict(labeled, {});
    const int n = static_cast<int>(labeled.size());
    if (n < 2) throw std::invalid_argument("filter_knn: |L| must be at least 2");
    const int k = std::min(knn_filter_k(n, class_count), n - 1);

    std::vector<char> noisy(n, 0);
    std::vector<std::pair<double, int>> order;  // (distance, position)
    order.reserve(n - 1);
    for (int i = 0; i < n; ++i) {
        order.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            order.emplace_back(sq_dist(pool, labeled[i], labeled[j]), j);
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](const auto& a, const auto& b) {
                              return a.first < b.first ||
                                     (a.first == b.first &&
                                      labeled[a.second] < labeled[b.second]);
                          });
        std::vector<int> counts(class_count, 0);
        for (int r = 0; r < k; ++r) ++counts[observed[order[r].second]];
        const int max_count = *std::max_element(counts.begin(), counts.end());
        // plurality ties resolve toward the sample's own label
        noisy[i] = counts[observed[i]] < max_count ? 1 : 0;
    }
    return make_verdict(labeled, noisy);
}

// ---- RANSAC centroids ---------------------------------------------------------

FilterVerdict filter_centroids_ransac(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                      const std::vector<int>& observed, int class_count,
                                      const CentroidsConfig& config) {
    check_labeled_inputs(labeled, observed);
    if (labeled.empty()) return make_verdict(labeled, {});
    if (config.trials < 1 || config.subset_fraction <= 0.0 || config.subset_fraction > 1.0) {
        throw std::invalid_argument("filter_centroids_ransac: invalid config");
    }
    const int dim = pool.dim();

    std::vector<std::vector<int>> members(class_count);  // positions into labeled
    for (size_t i = 0; i < labeled.size(); ++i) members[observed[i]].push_back(static_cast<int>(i));

    std::vector<Eigen::VectorXd> centroids(class_count);
    std::vector<char> has_centroid(class_count, 0);
    for (int c = 0; c < class_count; ++c) {
        const auto& group = members[c];
        if (group.empty()) continue;
        has_centroid[c] = 1;
        if (group.size() == 1) {
            centroids[c] = pool.features.row(labeled[group[0]]).cast<double>();
            continue;
        }
        const int subset_size = std::max<int>(
            1, static_cast<int>(std::ceil(config.subset_fraction * group.size())));
        Rng rng(derive_seed(config.seed, 3000 + static_cast<uint64_t>(c)));

        double best_logdet = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_mean = Eigen::VectorXd::Zero(dim);
        bool have_best = false;
        for (int trial = 0; trial < config.trials; ++trial) {
            const std::vector<int> subset = rng.sample(group, static_cast<size_t>(subset_size));
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
            for (int pos : subset) mean += pool.features.row(labeled[pos]).cast<double>();
            mean /= static_cast<double>(subset.size());

            // diagonal covariance; log-determinant = sum of log variances
            double logdet = 0.0;
            for (int d = 0; d < dim; ++d) {
                double var = 0.0;
                for (int pos : subset) {
                    const double diff =
                        static_cast<double>(pool.features(labeled[pos], d)) - mean(d);
                    var += diff * diff;
                }
                var /= static_cast<double>(subset.size());
                logdet += std::log(var);  // -inf for a zero-variance dimension
            }
            if (!have_best || logdet < best_logdet) {
                best_logdet = logdet;
                best_mean = mean;
                have_best = true;
            }
        }
        centroids[c] = best_mean;
    }

    std::vector<char> noisy(labeled.size(), 0);
    for (size_t i = 0; i < labeled.size(); ++i) {
        const Eigen::VectorXd x = pool.features.row(labeled[i]).cast<double>();
        const int own = observed[i];
        const double own_dist = (x - centroids[own]).squaredNorm();
        bool foreign_closer = false;
        for (int c = 0; c < class_count; ++c) {
            if (c == own || !has_centroid[c]) continue;
            if ((x - centroids[c]).squaredNorm() < own_dist) {  // ties stay clean
                foreign_closer = true;
                break;
            }
        }
        noisy[i] = foreign_closer ? 1 : 0;
    }
    return make_verdict(labeled, noisy);
}

// ---- DisagreeNet ---------------------------------------------------------------

FilterVerdict filter_disagreenet(const EmbeddingPool& pool, const std::vector<int>& labeled,
                                 const std::vector<int>& observed, int class_count,
                                 const DisagreeNetConfig& config) {
    check_labeled_inputs(labeled, observed);
    if (config.ensemble_size < 2) {
        throw std::invalid_argument("filter_disagreenet: ensemble_size must be at least 2");
    }
    if (labeled.empty()) return make_verdict(labeled, {});

    std::vector<int> checkpoints;
    for (int e : config.checkpoint_epochs) {
        if (e >= 1 && e <= config.probe.epochs) checkpoints.push_back(e);
    }
    if (checkpoints.empty()) {
        throw std::invalid_argument("filter_disagreenet: no checkpoint epoch within training");
    }

    const Eigen::MatrixXd X = gather_features(pool, labeled);
    const int n = static_cast<int>(labeled.size());
    std::vector<int> agree(n, 0);
    for (int member = 0; member < config.ensemble_size; ++member) {
        LinearProbeConfig probe_cfg = config.probe;
        probe_cfg.batch_size = std::min(probe_cfg.batch_size, n);
        probe_cfg.seed = derive_seed(config.seed, 4000 + static_cast<uint64_t>(member));
        const auto observer = [&](int epoch, const LinearProbe& probe) {
            if (!std::binary_search(checkpoints.begin(), checkpoints.end(), epoch + 1)) return;
            for (int i = 0; i < n; ++i) {
                if (probe.predict(X.row(i).transpose()) == observed[i]) ++agree[i];
            }
        };
        train_linear_probe(X, observed, class_count, probe_cfg, observer);
    }

    const double total =
        static_cast<double>(config.ensemble_size) * static_cast<double>(checkpoints.size());
    std::vector<char> noisy(n, 0);
    FilterVerdict verdict;
    for (int i = 0; i < n; ++i) {
        noisy[i] = (static_cast<double>(agree[i]) / total) < 0.5 ? 1 : 0;
    }
    verdict = make_verdict(labeled, noisy);
    for (int i = 0; i < n; ++i) {
        verdict.per_sample_score[labeled[i]] = static_cast<double>(agree[i]) / total;
    }
    return verdict;
}

// ---- FINE ------------------------------------------------------------------------

namespace {

// 1-D 2-means split; returns the boundary (scores < boundary are the low
// cluster) or NaN when no split exists
double two_means_boundary(std::vector<double> scores) {
    std::sort(scores.begin(), scores.end());
    if (scores.front() == scores.back()) return std::numeric_limits<double>::quiet_NaN();
    double lo = scores.front();
    double hi = scores.back();
    for (int iter = 0; iter < 100; ++iter) {
        const double mid = 0.5 * (lo + hi);
        double lo_sum = 0.0, hi_sum = 0.0;
        int lo_n = 0, hi_n = 0;
        for (double s : scores) {
            if (s < mid) {
                lo_sum += s;
                ++lo_n;
            } else {
                hi_sum += s;
                ++hi_n;
            }
        }
        if (lo_n == 0 || hi_n == 0) break;
        const double new_lo = lo_sum / lo_n;
        const double new_hi = hi_sum / hi_n;
        if (new_lo == lo && new_hi == hi) break;
        lo = new_lo;
        hi = new_hi;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

FilterVerdict filter_fine(const EmbeddingPool& pool, const std::vector<int>& labeled,
                          const std::vector<int>& observed, int class_count) {
    check_labeled_inputs(labeled, observed);
    if (labeled.empty()) return make_verdict(labeled, {});
    const int dim = pool.dim();

    std::vector<std::vector<int>> members(class_count);
    for (size_t i = 0; i < labeled.size(); ++i) members[observed[i]].push_back(static_cast<int>(i));

    std::vector<char> noisy(labeled.size(), 0);
    FilterVerdict verdict;
    std::map<int, double> alignment;
    for (int c = 0; c < class_count; ++c) {
        const auto& group = members[c];
        if (group.size() < 3) continue;  // pass-through, stays clean

        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
        for (int pos : group) {
            const Eigen::VectorXd x = pool.features.row(labeled[pos]).cast<double>();
            scatter.noalias() += x * x.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter);
        Eigen::VectorXd principal = solver.eigenvectors().col(dim - 1);  // largest eigenvalue

        double mean_align = 0.0;
        for (int pos : group) {
            mean_align += principal.dot(pool.features.row(labeled[pos]).cast<double>());
        }
        if (mean_align < 0.0) principal = -principal;

        std::vector<double> scores(group.size());
        for (size_t g = 0; g < group.size(); ++g) {
            const Eigen::VectorXd x = pool.features.row(labeled[group[g]]).cast<double>();
            const double norm_sq = x.squaredNorm();
            const double dot = principal.dot(x);
            scores[g] = norm_sq > 0.0 ? (dot * dot) / norm_sq : 0.0;
        }
        const double boundary = two_means_boundary(scores);
        if (std::isnan(boundary)) continue;  // all alignments identical
        for (size_t g = 0; g < group.size(); ++g) {
            if (scores[g] < boundary) noisy[group[g]] = 1;
            alignment[labeled[group[g]]] = scores[g];
        }
    }
    verdict = make_verdict(labeled, noisy);
    verdict.per_sample_score = std::move(alignment);
    return verdict;
}

// ---- ideal -------------------------------------------------------------------------

FilterVerdict filter_ideal(const std::vector<int>& labeled, const Annotator& annotator) {
    std::vector<char> noisy(labeled.size(), 0);
    for (size_t i = 0; i < labeled.size(); ++i) {
        noisy[i] = annotator.corruption_mask().at(static_cast<size_t>(labeled[i])) ? 1 : 0;
    }
    return make_verdict(labeled, noisy);
}

}  // namespace alne
