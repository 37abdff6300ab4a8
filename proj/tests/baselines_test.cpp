#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"
#include "xrv/baselines.hpp"

using namespace xrv;

namespace {

Dataset points_dataset(const std::vector<std::pair<std::vector<float>, int>>& pts, std::size_t classes) {
    Dataset ds;
    for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
    for (const auto& [vals, label] : pts) {
        LabeledImage im;
        im.pixels = Tensor<float>::from_data({vals.size()}, vals);
        im.label = label;
        ds.images.push_back(std::move(im));
    }
    return ds;
}

}  // namespace

TEST(Knn, SingleTrainingImageAlwaysWins) {
    const Dataset train = points_dataset({{{1, 2, 3}, 1}}, 2);
    KnnConfig cfg;
    cfg.k = 30;  // capped at |train| = 1
    EXPECT_EQ(knn_predict(train, Tensor<float>::from_data({3}, {9, 9, 9}), cfg), 1);
}

TEST(Knn, ExactMatchAtKOne) {
    const Dataset train = points_dataset({{{0, 0}, 0}, {{5, 5}, 1}, {{9, 0}, 2}}, 3);
    KnnConfig cfg;
    cfg.k = 1;
    EXPECT_EQ(knn_predict(train, Tensor<float>::from_data({2}, {5, 5}), cfg), 1);
}

TEST(Knn, MajorityVoteAmongThreeNeighbors) {
    // distances 1, 2, 9 with labels A, A, B: A wins at k=3
    const Dataset train = points_dataset({{{1}, 0}, {{2}, 0}, {{9}, 1}}, 2);
    KnnConfig cfg;
    cfg.k = 3;
    EXPECT_EQ(knn_predict(train, Tensor<float>::from_data({1}, {0}), cfg), 0);
}

TEST(Knn, SelfClassificationAtKOne) {
    const Dataset train = testutil::make_random_dataset({4, 4, 4}, 4, 4, 9);
    KnnConfig cfg;
    cfg.k = 1;
    for (const auto& im : train.images) {
        EXPECT_EQ(knn_predict(train, im.pixels, cfg), im.label);
    }
}

TEST(Knn, InvariantUnderTrainingSetPermutation) {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        // small integer grid so exact distance ties occur
        std::vector<std::pair<std::vector<float>, int>> pts;
        const std::size_t n = 6 + rng.next_below(10);
        for (std::size_t i = 0; i < n; ++i) {
            pts.push_back({{static_cast<float>(rng.next_below(3)), static_cast<float>(rng.next_below(3))},
                           static_cast<int>(rng.next_below(3))});
        }
        const Dataset train = points_dataset(pts, 3);
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        shuffle(perm, rng);
        Dataset train_p;
        train_p.class_names = train.class_names;
        for (std::size_t i : perm) train_p.images.push_back(train.images[i]);

        const Tensor<float> q = Tensor<float>::from_data(
            {2}, {static_cast<float>(rng.next_below(3)), static_cast<float>(rng.next_below(3))});
        KnnConfig cfg;
        cfg.k = 1 + rng.next_below(5);
        ASSERT_EQ(knn_predict(train, q, cfg), knn_predict(train_p, q, cfg));
    }
}

TEST(Knn, TieBreaksBySummedDistanceThenLowestIndex) {
    // two classes with one vote each in the k=2 set; class 1 is nearer
    const Dataset train = points_dataset({{{1}, 0}, {{0.5}, 1}, {{50}, 0}}, 2);
    KnnConfig cfg;
    cfg.k = 2;
    EXPECT_EQ(knn_predict(train, Tensor<float>::from_data({1}, {0}), cfg), 1);

    // perfectly symmetric tie: lowest class index wins
    const Dataset sym = points_dataset({{{-1}, 1}, {{1}, 0}}, 2);
    EXPECT_EQ(knn_predict(sym, Tensor<float>::from_data({1}, {0}), cfg), 0);
}

TEST(Knn, DimensionMismatchRejected) {
    const Dataset train = points_dataset({{{1, 2}, 0}}, 1);
    EXPECT_THROW(knn_predict(train, Tensor<float>::from_data({3}, {1, 2, 3})), ContractError);
    EXPECT_THROW(knn_predict(Dataset{}, Tensor<float>::from_data({1}, {0})), ContractError);
}

TEST(Majority, DominantClassAndAccuracyIdentity) {
    const Dataset train = testutil::make_random_dataset({83, 294, 71, 149}, 2, 2, 11);
    EXPECT_EQ(majority_class(train), 1);  // 294 dominates

    // accuracy on the training distribution is max-count / total
    const std::vector<int> preds = majority_predict_all(train, train.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (preds[i] == train.images[i].label) ++correct;
    }
    EXPECT_EQ(correct, 294u);
    EXPECT_NEAR(static_cast<double>(correct) / static_cast<double>(train.size()), 294.0 / 597.0, 1e-15);
}

TEST(Majority, SingleClassAndTieRules) {
    const Dataset single = testutil::make_random_dataset({5}, 2, 2, 12);
    EXPECT_EQ(majority_class(single), 0);

    const Dataset tied = testutil::make_random_dataset({4, 4, 2}, 2, 2, 13);
    EXPECT_EQ(majority_class(tied), 0);  // tie between classes 0 and 1: lower index

    EXPECT_THROW(majority_class(Dataset{}), ContractError);
}
