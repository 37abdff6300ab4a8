#include <gtest/gtest.h>

#include <cmath>

#include "xrv/metrics.hpp"
#include "xrv/rng.hpp"

using namespace xrv;

namespace {

ConfusionMatrix cm_from(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix cm;
    cm.num_classes = rows.size();
    for (std::size_t c = 0; c < rows.size(); ++c) cm.class_names.push_back("c" + std::to_string(c));
    for (const auto& row : rows)
        for (std::uint64_t v : row) cm.counts.push_back(v);
    return cm;
}

}  // namespace

TEST(Confusion, PerfectPredictionsAreDiagonal) {
    const std::vector<int> labels = {0, 1, 2, 1, 0};
    const ConfusionMatrix cm = confusion_matrix(labels, labels, 3);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t p = 0; p < 3; ++p) {
            if (t != p) EXPECT_EQ(cm.at(t, p), 0u);
        }
    EXPECT_EQ(cm.total(), 5u);
}

TEST(Confusion, HandCountedExample) {
    const ConfusionMatrix cm = confusion_matrix({1, 1}, {0, 1}, 2);
    EXPECT_EQ(cm.at(0, 0), 0u);
    EXPECT_EQ(cm.at(0, 1), 1u);
    EXPECT_EQ(cm.at(1, 0), 0u);
    EXPECT_EQ(cm.at(1, 1), 1u);
}

TEST(Confusion, RowSumsMatchIndependentHistogram) {
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t C = 2 + rng.next_below(5);
        const std::size_t n = 1 + rng.next_below(200);
        std::vector<int> preds(n), labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = static_cast<int>(rng.next_below(C));
            labels[i] = static_cast<int>(rng.next_below(C));
        }
        const ConfusionMatrix cm = confusion_matrix(preds, labels, C);
        std::vector<std::uint64_t> hist(C, 0);
        for (int l : labels) ++hist[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < C; ++c) ASSERT_EQ(cm.row_sum(c), hist[c]);
    }
}

TEST(Confusion, OutOfRangeIndicesRejected) {
    EXPECT_THROW(confusion_matrix({2}, {0}, 2), ContractError);
    EXPECT_THROW(confusion_matrix({0}, {5}, 2), ContractError);
    EXPECT_THROW(confusion_matrix({0, 1}, {0}, 2), ContractError);
}

TEST(Accuracy, KnownValues) {
    EXPECT_DOUBLE_EQ(accuracy(cm_from({{50, 0}, {0, 50}})), 1.0);
    EXPECT_DOUBLE_EQ(accuracy(cm_from({{40, 10}, {20, 30}})), 0.70);
    EXPECT_THROW(accuracy(cm_from({{0, 0}, {0, 0}})), ContractError);
}

TEST(Accuracy, MajorityBaselineOnImbalancedCounts) {
    // constant predictor of the dominant class over counts (83,294,71,149)
    const ConfusionMatrix cm = cm_from({{0, 83, 0, 0}, {0, 294, 0, 0}, {0, 71, 0, 0}, {0, 149, 0, 0}});
    EXPECT_NEAR(accuracy(cm), 294.0 / 597.0, 1e-12);
    EXPECT_NEAR(accuracy(cm), 0.4925, 5e-5);
}

TEST(Precision, PerfectAndHandArithmetic) {
    const PrecisionResult perfect = per_class_precision(cm_from({{7, 0}, {0, 3}}));
    EXPECT_DOUBLE_EQ(*perfect.per_class[0], 1.0);
    EXPECT_DOUBLE_EQ(*perfect.per_class[1], 1.0);
    EXPECT_DOUBLE_EQ(perfect.macro, 1.0);

    const PrecisionResult r = per_class_precision(cm_from({{40, 10}, {20, 30}}));
    EXPECT_DOUBLE_EQ(*r.per_class[0], 0.8);
    EXPECT_DOUBLE_EQ(*r.per_class[1], 0.6);
    EXPECT_DOUBLE_EQ(r.macro, 0.7);
}

TEST(Precision, AbsentClassIsUndefinedAndExcluded) {
    // class 2 never appears as a true label
    const PrecisionResult r = per_class_precision(cm_from({{4, 0, 0}, {1, 3, 0}, {0, 0, 0}}));
    EXPECT_TRUE(r.per_class[0].has_value());
    EXPECT_TRUE(r.per_class[1].has_value());
    EXPECT_FALSE(r.per_class[2].has_value());
    EXPECT_DOUBLE_EQ(r.macro, (1.0 + 0.75) / 2.0);
}

TEST(Precision, RowWeightedMeanEqualsAccuracy) {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t C = 2 + rng.next_below(5);
        ConfusionMatrix cm;
        cm.num_classes = C;
        for (std::size_t c = 0; c < C; ++c) cm.class_names.push_back("c" + std::to_string(c));
        cm.counts.assign(C * C, 0);
        for (auto& v : cm.counts) v = rng.next_below(20);
        if (cm.total() == 0) cm.counts[0] = 1;

        const double acc = accuracy(cm);
        const PrecisionResult r = per_class_precision(cm);
        double weighted = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            if (r.per_class[c]) {
                weighted += *r.per_class[c] * static_cast<double>(cm.row_sum(c)) / static_cast<double>(cm.total());
            }
        }
        ASSERT_NEAR(weighted, acc, 1e-12);
    }
}

TEST(Metrics, InvariantUnderSamplePermutation) {
    Rng rng(3);
    const std::size_t n = 60, C = 4;
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        preds[i] = static_cast<int>(rng.next_below(C));
        labels[i] = static_cast<int>(rng.next_below(C));
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle(perm, rng);
    std::vector<int> preds_p(n), labels_p(n);
    for (std::size_t i = 0; i < n; ++i) {
        preds_p[i] = preds[perm[i]];
        labels_p[i] = labels[perm[i]];
    }
    const ConfusionMatrix a = confusion_matrix(preds, labels, C);
    const ConfusionMatrix b = confusion_matrix(preds_p, labels_p, C);
    EXPECT_EQ(a.counts, b.counts);
}

TEST(Report, PerfectRunAndInternalConsistency) {
    const std::vector<int> labels = {0, 1, 2, 3, 1};
    const EvalReport r = report(labels, labels, {"a", "b", "c", "d"});
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(r.macro_precision, 1.0);
    EXPECT_DOUBLE_EQ(r.accuracy, accuracy(r.cm));
    EXPECT_NEAR(r.weighted_precision, r.accuracy, 1e-12);
    EXPECT_EQ(r.sample_count, 5u);
}

TEST(Report, JsonRoundTripPreservesEveryField) {
    Rng rng(4);
    const std::size_t n = 40, C = 3;
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        preds[i] = static_cast<int>(rng.next_below(C));
        labels[i] = static_cast<int>(rng.next_below(C - 1));  // class 2 absent from labels
    }
    const EvalReport r = report(preds, labels, {"x", "y", "z"});
    const EvalReport back = report_from_json(report_to_json(r));

    EXPECT_EQ(back.sample_count, r.sample_count);
    EXPECT_DOUBLE_EQ(back.accuracy, r.accuracy);
    EXPECT_EQ(back.cm.counts, r.cm.counts);
    EXPECT_EQ(back.cm.class_names, r.cm.class_names);
    ASSERT_EQ(back.per_class_precision_rowwise.size(), r.per_class_precision_rowwise.size());
    for (std::size_t c = 0; c < C; ++c) {
        EXPECT_EQ(back.per_class_precision_rowwise[c].has_value(), r.per_class_precision_rowwise[c].has_value());
        if (r.per_class_precision_rowwise[c]) {
            EXPECT_DOUBLE_EQ(*back.per_class_precision_rowwise[c], *r.per_class_precision_rowwise[c]);
        }
        EXPECT_EQ(back.per_class_precision_standard[c].has_value(), r.per_class_precision_standard[c].has_value());
    }
    EXPECT_DOUBLE_EQ(back.macro_precision, r.macro_precision);
    EXPECT_DOUBLE_EQ(back.weighted_precision, r.weighted_precision);
    EXPECT_DOUBLE_EQ(back.macro_precision_standard, r.macro_precision_standard);
}

TEST(Report, TextAndCsvRenderings) {
    const EvalReport r = report({0, 1, 0}, {0, 1, 1}, {"left", "right"});
    const std::string text = report_to_text(r);
    EXPECT_NE(text.find("accuracy"), std::string::npos);
    EXPECT_NE(text.find("left"), std::string::npos);

    const std::string csv = confusion_to_csv(r.cm);
    EXPECT_EQ(csv, "true\\pred,left,right\nleft,1,0\nright,1,1\n");
}
