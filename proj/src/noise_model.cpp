#include "alne/noise_model.hpp"

#include "alne/probe.hpp"
#include "alne/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace alne {

const char* to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::None: return "none";
        case NoiseKind::Symmetric: return "symmetric";
        case NoiseKind::Asymmetric: return "asymmetric";
        case NoiseKind::InstanceDependent: return "instance_dependent";
    }
    return "?";
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "none") return NoiseKind::None;
    if (name == "symmetric") return NoiseKind::Symmetric;
    if (name == "asymmetric") return NoiseKind::Asymmetric;
    if (name == "instance_dependent") return NoiseKind::InstanceDependent;
    throw std::invalid_argument("unknown noise kind: " + name);
}

Annotator::Annotator(std::vector<int> noisy_labels, std::vector<bool> corruption_mask)
    : noisy_labels_(std::move(noisy_labels)), corruption_mask_(std::move(corruption_mask)) {
    if (noisy_labels_.size() != corruption_mask_.size()) {
        throw std::invalid_argument("Annotator: labels/mask size mismatch");
    }
}

int Annotator::annotate_one(int index) const {
    if (index < 0 || index >= size()) {
        throw std::invalid_argument("annotate: index " + std::to_string(index) + " out of range");
    }
    return noisy_labels_[index];
}

std::map<int, int> Annotator::annotate(const std::vector<int>& indices) const {
    std::map<int, int> out;
    for (int i : indices) out[i] = annotate_one(i);
    return out;
}

double Annotator::realized_noise_rate() const {
    if (noisy_labels_.empty()) return 0.0;
    const auto corrupted =
        std::count(corruption_mask_.begin(), corruption_mask_.end(), true);
    return static_cast<double>(corrupted) / static_cast<double>(size());
}

namespace {

void validate_spec(const EmbeddingPool& pool, const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::None:
            break;
        case NoiseKind::Symmetric:
        case NoiseKind::InstanceDependent:
            if (spec.rate < 0.0 || spec.rate >= 1.0) {
                throw std::invalid_argument("noise rate must be in [0, 1)");
            }
            break;
        case NoiseKind::Asymmetric: {
            if (!spec.transition) {
                throw std::invalid_argument("asymmetric noise requires a transition matrix");
            }
            const auto& t = *spec.transition;
            if (t.rows() != pool.class_count || t.cols() != pool.class_count) {
                throw std::invalid_argument("transition matrix must be C x C");
            }
            for (Eigen::Index i = 0; i < t.rows(); ++i) {
                if (t.row(i).minCoeff() < 0.0) {
                    throw std::invalid_argument("transition row " + std::to_string(i) +
                                                " has a negative entry");
                }
                if (std::abs(t.row(i).sum() - 1.0) > 1e-9) {
                    throw std::invalid_argument("transition row " + std::to_string(i) +
                                                " does not sum to 1");
                }
            }
            break;
        }
    }
}

std::vector<int> corrupted_subset_symmetric(int n, double rate, Rng& rng) {
    const int count = static_cast<int>(round_half_up(rate * n));
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    return rng.sample(all, static_cast<size_t>(count));
}

// Most frequent true class other than own among the anchor's nearest
// neighbors; ties break toward the lower class index.
int dominant_foreign_class(const EmbeddingPool& pool, int anchor, int neighborhood) {
    struct Entry {
        double dist;
        int index;
    };
    std::vector<Entry> order;
    order.reserve(pool.size() - 1);
    for (int i = 0; i < pool.size(); ++i) {
        if (i == anchor) continue;
        order.push_back({squared_distance(pool, anchor, i), i});
    }
    const int take = std::min<int>(neighborhood, static_cast<int>(order.size()));
    std::partial_sort(order.begin(), order.begin() + take, order.end(),
                      [](const Entry& a, const Entry& b) {
                          return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
                      });
    const int own = pool.true_labels[anchor];
    std::vector<int> counts(pool.class_count, 0);
    for (int k = 0; k < take; ++k) {
        const int label = pool.true_labels[order[k].index];
        if (label != own) ++counts[label];
    }
    int best = -1;
    for (int c = 0; c < pool.class_count; ++c) {
        if (c == own) continue;
        if (best < 0 || counts[c] > counts[best]) best = c;
    }
    if (best < 0 || counts[best] == 0) return (own + 1) % pool.class_count;
    return best;
}

Annotator build_instance_dependent(const EmbeddingPool& pool, const NoiseSpec& spec) {
    const int n = pool.size();
    const int anchors_total = pool.class_count;  // K = C
    Rng anchor_rng(derive_seed(spec.seed, "anchors"));
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> anchors = anchor_rng.sample(all, static_cast<size_t>(anchors_total));

    int noisy_anchor_count = anchors_total;
    if (spec.cluster_fraction) {
        noisy_anchor_count = std::clamp<int>(
            static_cast<int>(round_half_up(*spec.cluster_fraction * anchors_total)), 1,
            anchors_total);
    }
    anchors.resize(noisy_anchor_count);

    std::vector<int> foreign(noisy_anchor_count);
    for (int a = 0; a < noisy_anchor_count; ++a) {
        foreign[a] = dominant_foreign_class(pool, anchors[a], 50);
    }

    // rank everything by distance to the nearest noisy anchor
    std::vector<double> nearest_dist(n);
    std::vector<int> nearest_anchor(n);
    for (int i = 0; i < n; ++i) {
        double best = squared_distance(pool, i, anchors[0]);
        int arg = 0;
        for (int a = 1; a < noisy_anchor_count; ++a) {
            const double d = squared_distance(pool, i, anchors[a]);
            if (d < best) {
                best = d;
                arg = a;
            }
        }
        nearest_dist[i] = best;
        nearest_anchor[i] = arg;
    }
    std::vector<int> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    std::sort(rank.begin(), rank.end(), [&](int a, int b) {
        return nearest_dist[a] < nearest_dist[b] ||
               (nearest_dist[a] == nearest_dist[b] && a < b);
    });

    const int corrupt_count = static_cast<int>(round_half_up(spec.rate * n));
    std::vector<int> noisy = pool.true_labels;
    std::vector<bool> mask(n, false);
    for (int k = 0; k < corrupt_count; ++k) {
        const int i = rank[k];
        const int a = nearest_anchor[i];
        int label = foreign[a];
        if (label == pool.true_labels[i]) label = pool.true_labels[anchors[a]];
        noisy[i] = label;
        mask[i] = true;
    }
    return Annotator(std::move(noisy), std::move(mask));
}

}  // namespace

Annotator build_annotator(const EmbeddingPool& pool, const NoiseSpec& spec) {
    validate_spec(pool, spec);
    const int n = pool.size();

    switch (spec.kind) {
        case NoiseKind::None: {
            return Annotator(pool.true_labels, std::vector<bool>(n, false));
        }
        case NoiseKind::Symmetric: {
            Rng rng(derive_seed(spec.seed, "symmetric"));
            const std::vector<int> subset = corrupted_subset_symmetric(n, spec.rate, rng);
            std::vector<int> noisy = pool.true_labels;
            std::vector<bool> mask(n, false);
            for (int i : subset) {
                const int draw = static_cast<int>(rng.bounded(pool.class_count - 1));
                noisy[i] = draw >= pool.true_labels[i] ? draw + 1 : draw;
                mask[i] = true;
            }
            return Annotator(std::move(noisy), std::move(mask));
        }
        case NoiseKind::Asymmetric: {
            Rng rng(derive_seed(spec.seed, "asymmetric"));
            const auto& t = *spec.transition;
            std::vector<int> noisy(n);
            std::vector<bool> mask(n, false);
            for (int i = 0; i < n; ++i) {
                const int y = pool.true_labels[i];
                const double u = rng.uniform();
                double cum = 0.0;
                int drawn = pool.class_count - 1;
                for (int c = 0; c < pool.class_count; ++c) {
                    cum += t(y, c);
                    if (u < cum) {
                        drawn = c;
                        break;
                    }
                }
                noisy[i] = drawn;
                mask[i] = drawn != y;
            }
            return Annotator(std::move(noisy), std::move(mask));
        }
        case NoiseKind::InstanceDependent:
            return build_instance_dependent(pool, spec);
    }
    throw std::logic_error("build_annotator: unreachable");
}

Annotator annotator_from_labels(const EmbeddingPool& pool, const std::vector<int>& noisy_labels) {
    if (static_cast<int>(noisy_labels.size()) != pool.size()) {
        throw std::invalid_argument("annotator_from_labels: label count does not match pool");
    }
    std::vector<bool> mask(noisy_labels.size());
    for (size_t i = 0; i < noisy_labels.size(); ++i) {
        mask[i] = noisy_labels[i] != pool.true_labels[i];
    }
    return Annotator(noisy_labels, std::move(mask));
}

TransitionEstimate confusion_transition(const EmbeddingPool& pool, int probe_epochs,
                                        double target_rate, uint64_t seed) {
    const int classes = pool.class_count;
    if (probe_epochs < 1) throw std::invalid_argument("confusion_transition: epochs < 1");
    if (target_rate < 0.0 || target_rate >= 1.0) {
        throw std::invalid_argument("confusion_transition: rate must be in [0, 1)");
    }

    std::vector<std::vector<int>> members(classes);
    for (int i = 0; i < pool.size(); ++i) members[pool.true_labels[i]].push_back(i);
    for (int c = 0; c < classes; ++c) {
        if (members[c].size() < 2) {
            throw std::invalid_argument("confusion_transition: class " + std::to_string(c) +
                                        " has fewer than 2 samples");
        }
    }

    TransitionEstimate result;
    result.transition = Eigen::MatrixXd::Identity(classes, classes);
    if (target_rate == 0.0) return result;  // alpha = 0

    // stratified half split; the probe never sees the held-out half
    Rng split_rng(derive_seed(seed, "confusion-split"));
    std::vector<int> train_idx, held_idx;
    for (int c = 0; c < classes; ++c) {
        auto group = members[c];
        split_rng.shuffle(group);
        const size_t train_count = (group.size() + 1) / 2;
        train_idx.insert(train_idx.end(), group.begin(), group.begin() + train_count);
        held_idx.insert(held_idx.end(), group.begin() + train_count, group.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(held_idx.begin(), held_idx.end());

    LinearProbeConfig config;
    config.epochs = probe_epochs;
    config.batch_size = std::min<int>(100, static_cast<int>(train_idx.size()));
    config.seed = derive_seed(seed, "confusion-probe");
    const LinearProbe probe =
        train_linear_probe(gather_features(pool, train_idx),
                           [&] {
                               std::vector<int> y;
                               y.reserve(train_idx.size());
                               for (int i : train_idx) y.push_back(pool.true_labels[i]);
                               return y;
                           }(),
                           classes, config);

    Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(classes, classes);
    const Eigen::MatrixXd held_x = gather_features(pool, held_idx);
    for (size_t k = 0; k < held_idx.size(); ++k) {
        const int truth = pool.true_labels[held_idx[k]];
        const int pred = probe.predict(held_x.row(static_cast<Eigen::Index>(k)).transpose());
        confusion(truth, pred) += 1.0;
    }
    for (int c = 0; c < classes; ++c) {
        const double mass = confusion.row(c).sum();
        if (mass <= 0.0) {
            result.notes.push_back("class " + std::to_string(c) +
                                   ": no held-out predictions, uniform off-diagonal fallback");
            confusion.row(c).setConstant(1.0 / (classes - 1));
            confusion(c, c) = 0.0;
        } else {
            confusion.row(c) /= mass;
        }
    }

    // empirical class priors over the pool
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(classes);
    for (int label : pool.true_labels) prior(label) += 1.0;
    prior /= static_cast<double>(pool.size());

    double off_mass = 0.0;
    for (int c = 0; c < classes; ++c) off_mass += prior(c) * (1.0 - confusion(c, c));
    double alpha = 0.0;
    if (off_mass <= 0.0) {
        result.notes.push_back("probe confusion is diagonal; target rate unreachable");
    } else {
        alpha = target_rate / off_mass;
        if (alpha > 1.0) {
            result.notes.push_back("mixing clamped to 1; expected noise " +
                                   std::to_string(off_mass) + " < target " +
                                   std::to_string(target_rate));
            alpha = 1.0;
        }
    }

    result.transition =
        (1.0 - alpha) * Eigen::MatrixXd::Identity(classes, classes) + alpha * confusion;
    for (int c = 0; c < classes; ++c) {
        result.transition.row(c) /= result.transition.row(c).sum();
    }
    return result;
}

}  // namespace alne
