#pragma once

// Non-neural comparators: brute-force k-nearest-neighbor voting and the
// constant majority-class predictor. Images are flattened row-major into
// one-dimensional feature vectors; KNN uses Euclidean distance.
//
// Tie rules are fully deterministic and order-free: neighbor selection sorts
// by (distance, label); votes break ties by smallest summed distance among
// the tied classes, then by lowest class index. Training-set permutation
// therefore cannot change a prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xrv/dataset.hpp"

namespace xrv {

struct KnnConfig {
    std::size_t k = 30;

    void validate() const {
        if (k < 1) throw ConfigError("knn requires k >= 1");
    }
};

inline int knn_predict(const Dataset& train, const Tensor<float>& query, const KnnConfig& cfg = {}) {
    cfg.validate();
    if (train.empty()) throw ContractError("knn_predict requires a non-empty training set");
    const std::size_t dim = query.size();

    std::vector<std::pair<double, int>> dist_label;
    dist_label.reserve(train.size());
    for (const LabeledImage& im : train.images) {
        if (im.pixels.size() != dim) {
            throw ContractError("knn_predict: query has " + std::to_string(dim) + " features, training image has " +
                                std::to_string(im.pixels.size()));
        }
        double d2 = 0.0;
        const float* a = im.pixels.data().data();
        const float* b = query.data().data();
        for (std::size_t i = 0; i < dim; ++i) {
            const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            d2 += diff * diff;
        }
        dist_label.emplace_back(d2, im.label);
    }

    const std::size_t kk = std::min(cfg.k, dist_label.size());
    std::partial_sort(dist_label.begin(), dist_label.begin() + static_cast<std::ptrdiff_t>(kk), dist_label.end());

    const std::size_t C = train.class_names.size();
    std::vector<std::size_t> votes(C, 0);
    std::vector<double> summed(C, 0.0);
    for (std::size_t i = 0; i < kk; ++i) {
        const std::size_t c = static_cast<std::size_t>(dist_label[i].second);
        ++votes[c];
        summed[c] += std::sqrt(dist_label[i].first);
    }

    int best = -1;
    for (std::size_t c = 0; c < C; ++c) {
        if (votes[c] == 0) continue;
        if (best < 0) {
            best = static_cast<int>(c);
            continue;
        }
        const std::size_t bc = static_cast<std::size_t>(best);
        if (votes[c] > votes[bc] ||
            (votes[c] == votes[bc] && summed[c] < summed[bc])) {
            best = static_cast<int>(c);
        }
        // equal votes and equal summed distance: the lower index (already
        // held in best) wins
    }
    return best;
}

inline std::vector<int> knn_predict_all(const Dataset& train, const Dataset& queries, const KnnConfig& cfg = {}) {
    std::vector<int> preds;
    preds.reserve(queries.size());
    for (const LabeledImage& im : queries.images) preds.push_back(knn_predict(train, im.pixels, cfg));
    return preds;
}

// argmax of training class counts; ties go to the lowest class index.
inline int majority_class(const Dataset& train) {
    if (train.empty()) throw ContractError("majority classifier requires a non-empty training set");
    const std::vector<std::size_t> counts = class_distribution(train);
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c;
    }
    return static_cast<int>(best);
}

inline std::vector<int> majority_predict_all(const Dataset& train, std::size_t n) {
    return std::vector<int>(n, majority_class(train));
}

}  // namespace xrv
