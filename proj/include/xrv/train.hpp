#pragma once

// The training loop and stratified cross-validation.
//
// Each epoch: seeded shuffle, mini-batches (the last partial batch is kept),
// forward, cross-entropy, backward, optimizer step. A non-finite loss aborts
// with a DivergedError naming the epoch and step. Runs are bit-reproducible
// for a fixed (seed, config, data).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xrv/dataset.hpp"
#include "xrv/model.hpp"
#include "xrv/optim.hpp"

namespace xrv {

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 0.001;
    std::size_t batch_size = 8;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    bool shuffle = true;

    void validate() const {
        // lr = 0 is allowed: a zero-rate step is the identity, which the
        // tests rely on as a sanity case.
        if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
            throw ConfigError("learning rate must be finite and non-negative");
        }
        if (batch_size < 1) throw ConfigError("batch size must be at least 1");
        if (epochs < 1) throw ConfigError("epochs must be at least 1");
    }
};

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> valid_acc;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

// CSV layout: epoch,train_loss,train_acc,valid_acc (last field empty when no
// validation set was given).
inline std::string history_to_csv(const TrainHistory& h) {
    std::ostringstream os;
    os << "epoch,train_loss,train_acc,valid_acc\n";
    os.precision(10);
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        os << (e + 1) << "," << h.epochs[e].train_loss << "," << h.epochs[e].train_acc << ",";
        if (h.epochs[e].valid_acc) os << *h.epochs[e].valid_acc;
        os << "\n";
    }
    return os.str();
}

inline void write_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write history: " + path);
    out << history_to_csv(h);
}

// Builds a [B x H x W x C] batch in the model's element type.
template <typename T>
Tensor<T> to_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ContractError("empty batch");
    const Shape& s = ds.images[indices[0]].pixels.shape();
    Tensor<T> batch = Tensor<T>::zeros({indices.size(), s[0], s[1], s[2]});
    const std::size_t stride = s[0] * s[1] * s[2];
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& pix = ds.images[indices[b]].pixels;
        if (pix.shape() != s) throw ShapeError("dataset images have inconsistent shapes");
        for (std::size_t i = 0; i < stride; ++i) batch.data()[b * stride + i] = static_cast<T>(pix.data()[i]);
    }
    return batch;
}

template <typename T>
std::vector<int> batch_labels(const Dataset& ds, const std::vector<std::size_t>& indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(ds.images[i].label);
    return labels;
}

inline std::vector<int> argmax_rows(const std::vector<double>& logits, std::size_t rows, std::size_t cols) {
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c) {
            if (logits[r * cols + c] > logits[r * cols + best]) best = c;
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

// Tape-free batched inference; returns the predicted class per image.
template <typename T>
std::vector<int> predict_dataset(const ModelState<T>& model, const Dataset& ds, std::size_t batch_size = 16) {
    std::vector<int> preds;
    preds.reserve(ds.size());
    typename Tape<T>::Pause pause;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(start + batch_size, ds.size()); ++i) idx.push_back(i);
        Tensor<T> logits = forward(model, to_batch<T>(ds, idx));
        const std::size_t C = logits.shape()[1];
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < C; ++c) {
                if (logits.data()[r * C + c] > logits.data()[r * C + best]) best = c;
            }
            preds.push_back(static_cast<int>(best));
        }
    }
    return preds;
}

template <typename T>
double dataset_accuracy(const ModelState<T>& model, const Dataset& ds, std::size_t batch_size = 16) {
    if (ds.empty()) throw ContractError("accuracy over an empty dataset");
    const std::vector<int> preds = predict_dataset(model, ds, batch_size);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == ds.images[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// Trains the model in place and returns the per-epoch history.
template <typename T>
TrainHistory train_loop(ModelState<T>& model, const Dataset& train, const Dataset* valid, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ContractError("training dataset is empty");

    AdamState<T> adam;
    TrainHistory history;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng rng(mix_seed(cfg.seed, epoch));
            shuffle(order, rng);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(start + cfg.batch_size, order.size())));
            const std::vector<int> labels = batch_labels<T>(train, idx);

            Tape<T> tape;
            Tensor<T> logits = forward(model, to_batch<T>(train, idx));
            Tensor<T> loss = cross_entropy(logits, labels);
            const double loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) {
                throw DivergedError("training diverged: loss is not finite at epoch " + std::to_string(epoch) +
                                        ", step " + std::to_string(step),
                                    static_cast<int>(epoch), static_cast<int>(step));
            }
            loss_sum += loss_value * static_cast<double>(idx.size());
            const std::size_t C = logits.shape()[1];
            for (std::size_t r = 0; r < idx.size(); ++r) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < C; ++c) {
                    if (logits.data()[r * C + c] > logits.data()[r * C + best]) best = c;
                }
                if (static_cast<int>(best) == labels[r]) ++correct;
            }

            backward(loss);
            if (cfg.optimizer == OptimizerKind::sgd) {
                sgd_step(model.params, static_cast<T>(cfg.learning_rate));
            } else {
                adam_step(model.params, adam, static_cast<T>(cfg.learning_rate), static_cast<T>(cfg.beta1),
                          static_cast<T>(cfg.beta2), static_cast<T>(cfg.adam_eps));
            }
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(train.size());
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
        if (valid != nullptr && !valid->empty()) stats.valid_acc = dataset_accuracy(model, *valid);
        history.epochs.push_back(stats);
        model.epoch += 1;
    }
    return history;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct CvResult {
    std::vector<TrainHistory> fold_histories;
    std::vector<double> fold_accuracy;  // held-out accuracy per fold
    double mean_accuracy = 0.0;
};

// Stratified k-fold protocol: per fold, a fresh model (fold-derived seed) is
// trained on the other k-1 folds and evaluated on the held-out one.
template <typename T>
CvResult cross_validate(const ModelSpec& spec, const Dataset& ds, std::size_t k, const TrainConfig& cfg) {
    cfg.validate();
    const FoldPlan plan = stratified_kfold(ds, k, cfg.seed);

    CvResult result;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train_idx;
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            train_idx.insert(train_idx.end(), plan.folds[g].begin(), plan.folds[g].end());
        }
        std::sort(train_idx.begin(), train_idx.end());
        const Dataset fold_train = subset(ds, train_idx);
        const Dataset fold_valid = subset(ds, plan.folds[f]);

        ModelSpec fold_spec = spec;
        fold_spec.seed = mix_seed(spec.seed, f);
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = mix_seed(cfg.seed, f);

        ModelState<T> model = build<T>(fold_spec);
        try {
            result.fold_histories.push_back(train_loop(model, fold_train, &fold_valid, fold_cfg));
        } catch (const DivergedError& e) {
            throw DivergedError("fold " + std::to_string(f) + ": " + e.what(), e.epoch, e.step);
        }
        result.fold_accuracy.push_back(fold_valid.empty() ? 0.0 : dataset_accuracy(model, fold_valid));
    }
    double sum = 0.0;
    for (double a : result.fold_accuracy) sum += a;
    result.mean_accuracy = sum / static_cast<double>(result.fold_accuracy.size());
    return result;
}

}  // namespace xrv
