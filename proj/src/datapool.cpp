#include "alne/datapool.hpp"

#include "alne/rng.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace alne {

namespace {

void normalize_rows(FeatureMatrix& features, const char* origin) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        double norm_sq = 0.0;
        for (Eigen::Index d = 0; d < features.cols(); ++d) {
            norm_sq += static_cast<double>(features(i, d)) * static_cast<double>(features(i, d));
        }
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0) {
            throw std::runtime_error(std::string(origin) + ": zero-norm feature row " +
                                     std::to_string(i));
        }
        // already-unit rows pass through untouched so save/load round-trips bitwise
        if (std::abs(norm - 1.0) > 1e-6) {
            const float inv = static_cast<float>(1.0 / norm);
            features.row(i) *= inv;
        }
    }
}

}  // namespace

LabelState::LabelState(int pool_size, int budget) : budget_(budget) {
    unlabeled_.resize(pool_size);
    for (int i = 0; i < pool_size; ++i) unlabeled_[i] = i;
    observed_.assign(pool_size, -1);
}

int LabelState::observed_label(int index) const {
    const int label = observed_.at(index);
    if (label < 0) throw std::invalid_argument("observed_label: index " + std::to_string(index) + " is unlabeled");
    return label;
}

bool LabelState::is_labeled(int index) const { return observed_.at(index) >= 0; }

void LabelState::record_round(int round, const std::vector<int>& picks,
                              const std::vector<int>& labels) {
    if (picks.size() != labels.size()) {
        throw std::invalid_argument("record_round: picks/labels size mismatch");
    }
    if (labeled_.size() + picks.size() > static_cast<size_t>(budget_)) {
        throw std::invalid_argument("record_round: budget " + std::to_string(budget_) + " exceeded");
    }
    for (size_t k = 0; k < picks.size(); ++k) {
        const int idx = picks[k];
        if (observed_.at(idx) >= 0) {
            throw std::invalid_argument("record_round: index " + std::to_string(idx) + " already labeled");
        }
        observed_[idx] = labels[k];
        query_log_.emplace_back(round, idx);
        const auto it = std::lower_bound(unlabeled_.begin(), unlabeled_.end(), idx);
        if (it == unlabeled_.end() || *it != idx) {
            throw std::invalid_argument("record_round: index " + std::to_string(idx) + " not unlabeled");
        }
        unlabeled_.erase(it);
        labeled_.insert(std::lower_bound(labeled_.begin(), labeled_.end(), idx), idx);
    }
}

std::vector<int> LabelState::observed_labels_of(const std::vector<int>& indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(observed_label(i));
    return out;
}

EmbeddingPool generate_synthetic(const SyntheticSpec& spec) {
    if (spec.class_count < 2 || spec.points_per_class <= 0 || spec.dimension <= 0 ||
        spec.cluster_spread <= 0.0 || spec.center_spread <= 0.0) {
        throw std::invalid_argument("generate_synthetic: invalid spec");
    }
    const int n = spec.class_count * spec.points_per_class;

    Rng center_rng(derive_seed(spec.seed, "synthetic-centers"));
    std::vector<std::vector<double>> centers(spec.class_count,
                                             std::vector<double>(spec.dimension));
    for (auto& center : centers) {
        for (double& v : center) v = center_rng.normal() * spec.center_spread;
    }

    EmbeddingPool pool;
    pool.features.resize(n, spec.dimension);
    pool.true_labels.resize(n);
    pool.class_count = spec.class_count;

    Rng point_rng(derive_seed(derive_seed(spec.seed, "synthetic-points"), spec.point_stream));
    int row = 0;
    for (int c = 0; c < spec.class_count; ++c) {
        for (int p = 0; p < spec.points_per_class; ++p, ++row) {
            for (int d = 0; d < spec.dimension; ++d) {
                pool.features(row, d) =
                    static_cast<float>(centers[c][d] + point_rng.normal() * spec.cluster_spread);
            }
            pool.true_labels[row] = c;
        }
    }
    normalize_rows(pool.features, "generate_synthetic");
    pool.normalized = true;
    return pool;
}

SyntheticSpec synthetic_test_spec(const SyntheticSpec& train, double fraction) {
    if (fraction <= 0.0 || fraction > 1.0) {
        throw std::invalid_argument("synthetic_test_spec: fraction must be in (0, 1]");
    }
    SyntheticSpec test = train;
    test.points_per_class = std::max<int>(
        1, static_cast<int>(round_half_up(fraction * train.points_per_class)));
    test.point_stream = train.point_stream + 1;
    return test;
}

namespace {

constexpr char kMagic[4] = {'A', 'L', 'N', 'E'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, size_t offset, const char* what) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw std::runtime_error("ALNE format error at byte " + std::to_string(offset) +
                                 ": truncated " + what);
    }
    T value = 0;
    for (size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

}  // namespace

void save_embeddings(const EmbeddingPool& pool, const std::string& features_path,
                     const std::string& labels_path) {
    std::ofstream out(features_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + features_path + " for writing");
    out.write(kMagic, 4);
    write_le<uint32_t>(out, kVersion);
    write_le<uint64_t>(out, static_cast<uint64_t>(pool.size()));
    write_le<uint64_t>(out, static_cast<uint64_t>(pool.dim()));
    static_assert(sizeof(float) == 4);
    // f32 little-endian payload; this targets little-endian hosts directly
    out.write(reinterpret_cast<const char*>(pool.features.data()),
              static_cast<std::streamsize>(sizeof(float)) * pool.size() * pool.dim());
    if (!out) throw std::runtime_error("short write to " + features_path);
    save_labels(pool.true_labels, labels_path);
}

EmbeddingPool load_embeddings(const std::string& features_path, const std::string& labels_path) {
    std::ifstream in(features_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + features_path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("ALNE format error at byte 0: bad magic in " + features_path);
    }
    const uint32_t version = read_le<uint32_t>(in, 4, "version");
    if (version != kVersion) {
        throw std::runtime_error("ALNE format error at byte 4: unsupported version " +
                                 std::to_string(version));
    }
    const uint64_t n = read_le<uint64_t>(in, 8, "row count");
    const uint64_t d = read_le<uint64_t>(in, 16, "column count");
    if (n == 0 || d == 0) {
        throw std::runtime_error("ALNE format error at byte 8: empty dimensions");
    }

    EmbeddingPool pool;
    pool.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    if (!in.read(reinterpret_cast<char*>(pool.features.data()),
                 static_cast<std::streamsize>(sizeof(float)) * static_cast<std::streamsize>(n * d))) {
        throw std::runtime_error("ALNE format error at byte 24: truncated payload in " +
                                 features_path);
    }

    pool.true_labels = load_labels(labels_path);
    if (pool.true_labels.size() != n) {
        throw std::runtime_error("alignment error: " + features_path + " has " + std::to_string(n) +
                                 " rows but " + labels_path + " has " +
                                 std::to_string(pool.true_labels.size()) + " labels");
    }
    int max_label = 0;
    for (int label : pool.true_labels) max_label = std::max(max_label, label);
    pool.class_count = max_label + 1;

    normalize_rows(pool.features, "load_embeddings");
    pool.normalized = true;
    return pool;
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (int label : labels) out << label << '\n';
    if (!out) throw std::runtime_error("short write to " + path);
}

std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<int> labels;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        size_t pos = 0;
        int value = 0;
        try {
            value = std::stoi(line, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": not a class index");
        }
        if (pos != line.size() || value < 0) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": not a class index");
        }
        labels.push_back(value);
    }
    return labels;
}

LabelState init_label_state(const EmbeddingPool& pool, int budget) {
    if (budget <= 0 || budget > pool.size()) {
        throw std::invalid_argument("init_label_state: budget " + std::to_string(budget) +
                                    " out of range (0, " + std::to_string(pool.size()) + "]");
    }
    return LabelState(pool.size(), budget);
}

int budget_for_spc(int expected_spc, int class_count, double noise_rate) {
    if (expected_spc <= 0 || class_count <= 0) {
        throw std::invalid_argument("budget_for_spc: counts must be positive");
    }
    if (noise_rate < 0.0 || noise_rate >= 1.0) {
        throw std::invalid_argument("budget_for_spc: noise rate must be in [0, 1)");
    }
    const double b = static_cast<double>(expected_spc) * class_count / (1.0 - noise_rate);
    return static_cast<int>(round_half_up(b));
}

}  // namespace alne
