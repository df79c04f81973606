#include "alne/filters.hpp"

#include "alne/rng.hpp"
#include "alne/strategies.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace alne;

namespace {

EmbeddingPool blob_pool(int classes, int ppc, uint64_t seed, double spread = 0.08, int dim = 8) {
    return generate_synthetic({.class_count = classes,
                               .points_per_class = ppc,
                               .dimension = dim,
                               .cluster_spread = spread,
                               .center_spread = 1.0,
                               .seed = seed});
}

std::vector<int> all_indices(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

std::vector<int> complement(int n, const std::vector<int>& sorted_subset) {
    std::vector<int> out;
    for (int i = 0; i < n; ++i) {
        if (!std::binary_search(sorted_subset.begin(), sorted_subset.end(), i)) out.push_back(i);
    }
    return out;
}

void check_partition(const FilterVerdict& verdict, const std::vector<int>& labeled) {
    std::vector<int> joined = verdict.clean;
    joined.insert(joined.end(), verdict.noisy.begin(), verdict.noisy.end());
    std::sort(joined.begin(), joined.end());
    std::vector<int> expected = labeled;
    std::sort(expected.begin(), expected.end());
    CHECK(joined == expected);
    if (!labeled.empty()) {
        CHECK(verdict.predicted_noise_ratio ==
              doctest::Approx(static_cast<double>(verdict.noisy.size()) / labeled.size()));
    }
}

}  // namespace

TEST_CASE("verdicts partition the labeled set") {
    const FilterVerdict verdict = make_verdict({4, 9, 2}, {0, 1, 0});
    CHECK(verdict.clean == std::vector<int>{2, 4});
    CHECK(verdict.noisy == std::vector<int>{9});
    CHECK(verdict.predicted_noise_ratio == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("crossvalidation keeps clean separable data and flags a flipped label") {
    const EmbeddingPool pool = blob_pool(3, 30, 51, 0.05);
    std::vector<int> labeled;
    for (int i = 0; i < 90; i += 3) labeled.push_back(i);  // 30 labeled, 10 per class
    std::vector<int> observed;
    for (int i : labeled) observed.push_back(pool.true_labels[i]);

    CrossValidationConfig config;
    config.seed = 5;

    SUBCASE("all clean") {
        const FilterVerdict verdict = filter_crossvalidation(pool, labeled, observed, config);
        check_partition(verdict, labeled);
        CHECK(verdict.predicted_noise_ratio == doctest::Approx(0.0));
    }
    SUBCASE("single flipped label inside a tight cluster") {
        observed[4] = (observed[4] + 1) % 3;
        const FilterVerdict verdict = filter_crossvalidation(pool, labeled, observed, config);
        CHECK(std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), labeled[4]));
        CHECK(verdict.noisy.size() == 1);
    }
}

TEST_CASE("crossvalidation survives one sample per fold") {
    const EmbeddingPool pool = blob_pool(3, 10, 53);
    const std::vector<int> labeled{0, 10, 20};
    const std::vector<int> observed{0, 1, 2};
    CrossValidationConfig config;
    config.seed = 2;
    const FilterVerdict verdict = filter_crossvalidation(pool, labeled, observed, config);
    check_partition(verdict, labeled);
    CHECK_THROWS_AS(filter_crossvalidation(pool, {0, 10}, {0, 1}, config),
                    std::invalid_argument);
}

TEST_CASE("lowbudget AUM separates clean from permuted labels") {
    const int classes = 10;
    double clean_q_sum = 0.0;
    double permuted_q_sum = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        const EmbeddingPool pool = blob_pool(classes, 60, 500 + seed, 0.08, 16);
        Rng rng(seed);
        std::vector<int> labeled = rng.sample(all_indices(pool.size()), 150);
        std::sort(labeled.begin(), labeled.end());
        const std::vector<int> unlabeled = complement(pool.size(), labeled);

        AumConfig config;
        config.seed = derive_seed(seed, "aum-test");

        std::vector<int> observed;
        for (int i : labeled) observed.push_back(pool.true_labels[i]);
        const FilterVerdict clean_verdict =
            filter_lowbudget_aum(pool, labeled, observed, unlabeled, config);
        check_partition(clean_verdict, labeled);
        clean_q_sum += clean_verdict.predicted_noise_ratio;

        // fake-class scaffolding never leaks into the verdict
        for (int index : clean_verdict.clean) {
            CHECK(std::binary_search(labeled.begin(), labeled.end(), index));
        }

        std::vector<int> permuted = observed;
        std::rotate(permuted.begin(), permuted.begin() + 1, permuted.end());
        for (size_t i = 0; i < permuted.size(); ++i) {
            permuted[i] = (observed[i] + 1 + static_cast<int>(i) % (classes - 1)) % classes;
        }
        const FilterVerdict permuted_verdict =
            filter_lowbudget_aum(pool, labeled, permuted, unlabeled, config);
        permuted_q_sum += permuted_verdict.predicted_noise_ratio;
    }
    CHECK(clean_q_sum / 5.0 <= 0.15);
    CHECK(permuted_q_sum / 5.0 >= 0.7);
}

TEST_CASE("AUM refuses thresholds built on too few fakes") {
    const EmbeddingPool pool = blob_pool(2, 30, 61);
    const std::vector<int> labeled{0, 1, 30, 31};
    const std::vector<int> observed{0, 0, 1, 1};
    AumConfig config;
    // C=2 and |L|=4 give F = max(2, round(4/3)) = 2 < 5
    CHECK(aum_fake_count(4, 2) == 2);
    CHECK_THROWS_AS(
        filter_lowbudget_aum(pool, labeled, observed, complement(pool.size(), labeled), config),
        std::invalid_argument);
}

TEST_CASE("known-rate AUM marks exactly the requested count") {
    const EmbeddingPool pool = blob_pool(5, 40, 71, 0.08, 8);
    Rng rng(3);
    std::vector<int> labeled = rng.sample(all_indices(pool.size()), 100);
    std::sort(labeled.begin(), labeled.end());
    std::vector<int> observed;
    for (int i : labeled) observed.push_back(pool.true_labels[i]);
    const std::vector<int> unlabeled = complement(pool.size(), labeled);
    AumConfig config;
    config.seed = 9;

    const FilterVerdict none =
        filter_aum_known_rate(pool, labeled, observed, unlabeled, 0.0, config);
    CHECK(none.noisy.empty());
    const FilterVerdict everything =
        filter_aum_known_rate(pool, labeled, observed, unlabeled, 1.0, config);
    CHECK(everything.clean.empty());
    const FilterVerdict clothing =
        filter_aum_known_rate(pool, labeled, observed, unlabeled, 0.38, config);
    CHECK(clothing.noisy.size() == 38);
    check_partition(clothing, labeled);
}

TEST_CASE("knn filter flags the flipped member of a cluster") {
    SUBCASE("two agreeing labels stay clean") {
        const EmbeddingPool pool = blob_pool(2, 10, 81);
        const FilterVerdict verdict = filter_knn(pool, {0, 1}, {0, 0}, 2);
        CHECK(verdict.noisy.empty());
    }
    SUBCASE("single flip in a 20-point cluster") {
        const EmbeddingPool pool = blob_pool(2, 20, 83, 0.05);
        std::vector<int> labeled;
        for (int i = 0; i < 20; ++i) labeled.push_back(i);  // one true cluster
        std::vector<int> observed(20, 0);
        observed[7] = 1;  // flipped
        const FilterVerdict verdict = filter_knn(pool, labeled, observed, 2);
        CHECK(verdict.noisy == std::vector<int>{7});
    }
    SUBCASE("k follows the |L|/C rule") {
        CHECK(knn_filter_k(250, 100) == 2);
        CHECK(knn_filter_k(3, 100) == 1);
    }
}

TEST_CASE("ransac centroids separate planted noise") {
    const EmbeddingPool pool = blob_pool(2, 30, 91, 0.05);
    CentroidsConfig config;
    config.seed = 4;

    SUBCASE("clean separable pool has no noise") {
        std::vector<int> labeled = all_indices(60);
        std::vector<int> observed;
        for (int i : labeled) observed.push_back(pool.true_labels[i]);
        const FilterVerdict verdict =
            filter_centroids_ransac(pool, labeled, observed, 2, config);
        CHECK(verdict.predicted_noise_ratio == doctest::Approx(0.0));
    }
    SUBCASE("a sample observed as A inside cluster B is noisy") {
        std::vector<int> labeled = all_indices(60);
        std::vector<int> observed;
        for (int i : labeled) observed.push_back(pool.true_labels[i]);
        observed[45] = 0;  // index 45 sits in cluster 1 but claims label 0
        const FilterVerdict verdict =
            filter_centroids_ransac(pool, labeled, observed, 2, config);
        CHECK(std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), 45));
    }
    SUBCASE("a singleton class is its own centroid") {
        // lone member of class 1 observed far from class 0's cluster
        const std::vector<int> labeled{0, 1, 2, 30};
        const std::vector<int> observed{0, 0, 0, 1};
        const FilterVerdict verdict =
            filter_centroids_ransac(pool, labeled, observed, 2, config);
        CHECK_FALSE(std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), 30));
    }
}

TEST_CASE("disagreenet consensus follows the planted separator") {
    const EmbeddingPool pool = blob_pool(3, 25, 101, 0.05, 8);
    std::vector<int> labeled = all_indices(75);
    std::vector<int> observed;
    for (int i : labeled) observed.push_back(pool.true_labels[i]);

    DisagreeNetConfig config;
    config.seed = 12;

    SUBCASE("clean data gets full agreement") {
        const FilterVerdict verdict = filter_disagreenet(pool, labeled, observed, 3, config);
        check_partition(verdict, labeled);
        CHECK(verdict.predicted_noise_ratio == doctest::Approx(0.0));
    }
    SUBCASE("a permuted label in a tight foreign cluster disagrees") {
        observed[10] = (observed[10] + 1) % 3;
        const FilterVerdict verdict = filter_disagreenet(pool, labeled, observed, 3, config);
        CHECK(std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), 10));
        CHECK(verdict.per_sample_score.at(10) <= 0.25);
    }
    SUBCASE("a one-model ensemble is rejected") {
        config.ensemble_size = 1;
        CHECK_THROWS_AS(filter_disagreenet(pool, labeled, observed, 3, config),
                        std::invalid_argument);
    }
}

TEST_CASE("fine filter tracks the per-class principal direction") {
    SUBCASE("identical one-class points all stay clean") {
        EmbeddingPool pool;
        pool.features.resize(6, 4);
        for (int i = 0; i < 6; ++i) {
            pool.features.row(i) << 0.5f, 0.5f, 0.5f, 0.5f;
        }
        pool.true_labels.assign(6, 0);
        pool.class_count = 2;
        const FilterVerdict verdict =
            filter_fine(pool, all_indices(6), std::vector<int>(6, 0), 2);
        CHECK(verdict.noisy.empty());
    }
    SUBCASE("foreign-cluster members land in the low-alignment cluster") {
        const EmbeddingPool pool = blob_pool(2, 25, 111, 0.05, 8);
        // class-0 observed set: 20 true members plus 5 members of cluster 1
        std::vector<int> labeled;
        std::vector<int> observed;
        for (int i = 0; i < 20; ++i) {
            labeled.push_back(i);
            observed.push_back(0);
        }
        for (int i = 25; i < 30; ++i) {
            labeled.push_back(i);  // true class 1
            observed.push_back(0);
        }
        const FilterVerdict verdict = filter_fine(pool, labeled, observed, 2);
        for (int planted : {25, 26, 27, 28, 29}) {
            CHECK(std::binary_search(verdict.noisy.begin(), verdict.noisy.end(), planted));
        }
        for (int i = 0; i < 20; ++i) {
            CHECK(std::binary_search(verdict.clean.begin(), verdict.clean.end(), i));
        }
    }
    SUBCASE("classes with two members pass through clean") {
        const EmbeddingPool pool = blob_pool(2, 10, 113);
        const FilterVerdict verdict = filter_fine(pool, {0, 1}, {0, 0}, 2);
        CHECK(verdict.noisy.empty());
    }
}

TEST_CASE("ideal filter reads the corruption mask exactly") {
    const EmbeddingPool pool = blob_pool(4, 25, 121);
    SUBCASE("zero noise means all clean") {
        const Annotator annotator =
            build_annotator(pool, {.kind = NoiseKind::None, .seed = 1});
        const FilterVerdict verdict = filter_ideal(all_indices(40), annotator);
        CHECK(verdict.noisy.empty());
    }
    SUBCASE("half symmetric noise is recovered index by index") {
        const Annotator annotator =
            build_annotator(pool, {.kind = NoiseKind::Symmetric, .rate = 0.5, .seed = 2});
        Rng rng(7);
        std::vector<int> labeled = rng.sample(all_indices(pool.size()), 40);
        std::sort(labeled.begin(), labeled.end());
        const FilterVerdict verdict = filter_ideal(labeled, annotator);
        check_partition(verdict, labeled);
        int expected_noisy = 0;
        for (int i : labeled) expected_noisy += annotator.corruption_mask()[i] ? 1 : 0;
        CHECK(static_cast<int>(verdict.noisy.size()) == expected_noisy);
        for (int i : verdict.noisy) CHECK(annotator.corruption_mask()[i]);
    }
}

TEST_CASE("every filter partitions an arbitrary labeled set") {
    const EmbeddingPool pool = blob_pool(5, 30, 131, 0.1, 8);
    const Annotator annotator =
        build_annotator(pool, {.kind = NoiseKind::Symmetric, .rate = 0.4, .seed = 3});
    Rng rng(17);
    std::vector<int> labeled = rng.sample(all_indices(pool.size()), 60);
    std::sort(labeled.begin(), labeled.end());
    std::vector<int> observed;
    for (int i : labeled) observed.push_back(annotator.annotate_one(i));
    const std::vector<int> unlabeled = complement(pool.size(), labeled);

    check_partition(filter_knn(pool, labeled, observed, 5), labeled);
    check_partition(filter_fine(pool, labeled, observed, 5), labeled);
    check_partition(filter_ideal(labeled, annotator), labeled);
    check_partition(filter_centroids_ransac(pool, labeled, observed, 5, {.seed = 1}), labeled);
    AumConfig aum;
    aum.seed = 8;
    check_partition(filter_lowbudget_aum(pool, labeled, observed, unlabeled, aum), labeled);
    CrossValidationConfig cv;
    cv.seed = 9;
    check_partition(filter_crossvalidation(pool, labeled, observed, cv), labeled);
    DisagreeNetConfig dn;
    dn.seed = 10;
    check_partition(filter_disagreenet(pool, labeled, observed, 5, dn), labeled);
}

TEST_CASE("verdict export format is one labeled line each") {
    const FilterVerdict verdict = make_verdict({3, 7}, {0, 1});
    const auto lines = format_verdict(verdict, {3, 7}, {1, 0});
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "3 1 clean 0");
    CHECK(lines[1] == "7 0 noisy 0");
}
