// xrv - X-ray implant classification pipeline.
//
// Subcommands: split, augment, train, cv, eval, predict, verify.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xrv/augment.hpp"
#include "xrv/baselines.hpp"
#include "xrv/checkpoint.hpp"
#include "xrv/metrics.hpp"
#include "xrv/train.hpp"
#include "xrv/verify.hpp"

namespace fs = std::filesystem;

namespace {

// Everything the train/cv commands can configure, with the defaults used
// when neither the config file nor a flag overrides them.
struct TrainSettings {
    std::string model = "cnn";
    std::size_t size = 256;
    std::vector<std::size_t> channels = {8, 16};
    std::vector<std::size_t> blocks = {1, 1};
    std::size_t hidden = 64;
    std::size_t patch = 32;
    std::size_t dim = 64;
    std::size_t depth = 2;
    std::size_t heads = 4;
    std::size_t mlp = 128;
    std::string optimizer = "adam";
    double lr = 0.001;
    std::size_t batch = 8;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    std::string dtype = "float32";
    std::vector<std::string> freeze;
    std::string train_only;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& key) {
    std::vector<std::size_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(tok)));
        } catch (const std::exception&) {
            throw xrv::ConfigError("config key \"" + key + "\" has a malformed number: " + tok);
        }
    }
    if (out.empty()) throw xrv::ConfigError("config key \"" + key + "\" lists no values");
    return out;
}

// key = value lines; '#' starts a comment. Unknown keys and malformed lines
// report their line number.
void apply_config_file(const std::string& path, TrainSettings& s) {
    std::ifstream in(path);
    if (!in) throw xrv::IoError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw xrv::ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "model") s.model = val;
            else if (key == "size") s.size = std::stoull(val);
            else if (key == "channels") s.channels = parse_size_list(val, key);
            else if (key == "blocks") s.blocks = parse_size_list(val, key);
            else if (key == "hidden") s.hidden = std::stoull(val);
            else if (key == "patch") s.patch = std::stoull(val);
            else if (key == "dim") s.dim = std::stoull(val);
            else if (key == "depth") s.depth = std::stoull(val);
            else if (key == "heads") s.heads = std::stoull(val);
            else if (key == "mlp") s.mlp = std::stoull(val);
            else if (key == "optimizer") s.optimizer = val;
            else if (key == "lr") s.lr = std::stod(val);
            else if (key == "batch") s.batch = std::stoull(val);
            else if (key == "epochs") s.epochs = std::stoull(val);
            else if (key == "seed") s.seed = std::stoull(val);
            else if (key == "dtype") s.dtype = val;
            else if (key == "freeze") {
                s.freeze.clear();
                std::istringstream is(val);
                std::string tok;
                while (std::getline(is, tok, ',')) {
                    tok = trim(tok);
                    if (!tok.empty()) s.freeze.push_back(tok);
                }
            } else if (key == "train_only") s.train_only = val;
            else throw xrv::ConfigError(path + ":" + std::to_string(lineno) + ": unknown key \"" + key + "\"");
        } catch (const std::invalid_argument&) {
            throw xrv::ConfigError(path + ":" + std::to_string(lineno) + ": malformed value for \"" + key + "\"");
        } catch (const std::out_of_range&) {
            throw xrv::ConfigError(path + ":" + std::to_string(lineno) + ": value out of range for \"" + key + "\"");
        }
    }
}

xrv::ModelSpec spec_from_settings(const TrainSettings& s, std::size_t num_classes) {
    xrv::ModelSpec spec;
    spec.kind = xrv::model_kind_from_string(s.model);
    spec.height = spec.width = s.size;
    spec.channels = 3;
    spec.num_classes = num_classes;
    spec.patch = s.patch;
    spec.embed_dim = s.dim;
    spec.depth = s.depth;
    spec.heads = s.heads;
    spec.mlp_dim = s.mlp;
    spec.stage_channels = s.channels;
    spec.stage_blocks = s.blocks;
    if (spec.kind == xrv::ModelKind::resnet && spec.stage_blocks.size() != spec.stage_channels.size()) {
        spec.stage_blocks.assign(spec.stage_channels.size(), 1);
    }
    spec.head_hidden = s.hidden;
    spec.seed = s.seed;
    spec.validate();
    return spec;
}

xrv::TrainConfig train_config_from_settings(const TrainSettings& s) {
    xrv::TrainConfig cfg;
    cfg.optimizer = xrv::optimizer_from_string(s.optimizer);
    cfg.learning_rate = s.lr;
    cfg.batch_size = s.batch;
    cfg.epochs = s.epochs;
    cfg.seed = s.seed;
    cfg.validate();
    return cfg;
}

template <typename F>
auto with_dtype(const std::string& dtype, F&& f) {
    if (dtype == "float32" || dtype == "f32") return f(float{});
    if (dtype == "float64" || dtype == "f64") return f(double{});
    throw xrv::ConfigError("unknown dtype: " + dtype + " (expected float32|float64)");
}

void print_class_counts(const xrv::Dataset& ds, const char* title) {
    const auto counts = xrv::class_distribution(ds);
    std::printf("%s: %zu images\n", title, ds.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        std::printf("  %-16s %zu\n", ds.class_names[c].c_str(), counts[c]);
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw xrv::IoError("cannot write " + path);
    out << content;
}

void emit_report(const xrv::EvalReport& rep, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", xrv::report_to_json(rep).dump(2) + "\n");
    write_text_file(out_dir + "/report.txt", xrv::report_to_text(rep));
    write_text_file(out_dir + "/confusion.csv", xrv::confusion_to_csv(rep.cm));
    std::printf("%s", xrv::report_to_text(rep).c_str());
    std::printf("report written to %s\n", out_dir.c_str());
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_split(const std::string& data, double test_frac, std::uint64_t seed, const std::string& out,
              std::size_t size) {
    const xrv::Dataset ds = xrv::ingest(data, size, size);
    print_class_counts(ds, "dataset");
    auto [train, test] = xrv::stratified_split(ds, test_frac, seed);

    const fs::path dir = fs::path(out) / "splits" / std::to_string(seed);
    fs::create_directories(dir);
    xrv::write_manifest(train, (dir / "train.txt").string());
    xrv::write_manifest(test, (dir / "test.txt").string());

    print_class_counts(train, "train");
    print_class_counts(test, "test");
    std::printf("manifests written to %s\n", dir.string().c_str());
    return 0;
}

int cmd_augment(const std::string& manifest, std::string data, const std::string& mode_str,
                std::uint64_t seed, const std::string& out, std::size_t size) {
    if (data.empty()) data = fs::path(manifest).parent_path().string();
    const std::vector<std::string> lines = xrv::read_manifest_lines(manifest);

    xrv::AugmentPlan plan;
    plan.mode = xrv::augment_mode_from_string(mode_str);
    plan.seed = seed;

    const fs::path tree = fs::path(out) / "augmented";
    fs::create_directories(tree);

    std::vector<std::string> out_lines;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& rel = lines[i];
        xrv::Tensor<float> img;
        try {
            img = xrv::resize_bilinear(xrv::decode_image((fs::path(data) / rel).string()), size, size);
        } catch (const std::exception& e) {
            ++skipped;
            std::cerr << "warning: skipping " << rel << ": " << e.what() << "\n";
            continue;
        }
        const std::size_t dot = rel.rfind('.');
        const std::string stem = dot == std::string::npos ? rel : rel.substr(0, dot);

        fs::create_directories(tree / fs::path(rel).parent_path());
        const std::string orig_rel = stem + ".png";
        xrv::encode_png(img, (tree / orig_rel).string());
        out_lines.push_back(orig_rel);

        const std::vector<xrv::Tensor<float>> variants = xrv::augment_variants(img, plan, i);
        for (std::size_t t = 0; t < variants.size(); ++t) {
            const std::string var_rel = stem + "_aug" + std::to_string(t + 1) + ".png";
            xrv::encode_png(variants[t], (tree / var_rel).string());
            out_lines.push_back(var_rel);
        }
    }

    if (!lines.empty() && out_lines.empty()) {
        throw xrv::IoError("none of the " + std::to_string(lines.size()) +
                           " manifest entries could be loaded; check --data (" + data + ")");
    }

    std::ofstream mf(tree / "manifest.txt", std::ios::trunc);
    if (!mf) throw xrv::IoError("cannot write augmented manifest");
    for (const std::string& l : out_lines) mf << l << "\n";

    if (skipped > 0) std::printf("skipped %zu unreadable source images\n", skipped);
    std::printf("augmented set: %zu images (%zu originals x %zu)\n", out_lines.size(), lines.size() - skipped,
                1 + plan.multiplicity());
    std::printf("tree and manifest written to %s\n", tree.string().c_str());
    return 0;
}

template <typename T>
int run_train(const TrainSettings& s, const xrv::Dataset& train_ds, const xrv::Dataset* valid_ds,
              const std::string& out) {
    const xrv::ModelSpec spec = spec_from_settings(s, train_ds.class_names.size());
    const xrv::TrainConfig cfg = train_config_from_settings(s);

    xrv::ModelState<T> model = xrv::build<T>(spec);
    model.class_names = train_ds.class_names;
    if (!s.train_only.empty()) {
        xrv::freeze(model, "");
        xrv::unfreeze(model, s.train_only);
    }
    for (const std::string& prefix : s.freeze) xrv::freeze(model, prefix);

    const xrv::TrainHistory history = xrv::train_loop(model, train_ds, valid_ds, cfg);

    fs::create_directories(out);
    xrv::save_model(model, out + "/checkpoint.xrvt");
    xrv::write_history_csv(history, out + "/history.csv");

    const xrv::EpochStats& last = history.epochs.back();
    std::printf("epochs: %zu  final train loss %.6f  train acc %.4f", history.epochs.size(), last.train_loss,
                last.train_acc);
    if (last.valid_acc) std::printf("  valid acc %.4f", *last.valid_acc);
    std::printf("\ncheckpoint and history written to %s\n", out.c_str());
    return 0;
}

template <typename T>
int run_cv(const TrainSettings& s, const xrv::Dataset& ds, std::size_t folds, const std::string& out) {
    const xrv::ModelSpec spec = spec_from_settings(s, ds.class_names.size());
    const xrv::TrainConfig cfg = train_config_from_settings(s);

    const xrv::CvResult cv = xrv::cross_validate<T>(spec, ds, folds, cfg);

    fs::create_directories(out);
    nlohmann::json j;
    j["folds"] = folds;
    j["fold_accuracy"] = cv.fold_accuracy;
    j["mean_accuracy"] = cv.mean_accuracy;
    write_text_file(out + "/cv_summary.json", j.dump(2) + "\n");
    for (std::size_t f = 0; f < cv.fold_histories.size(); ++f) {
        xrv::write_history_csv(cv.fold_histories[f], out + "/fold" + std::to_string(f) + "_history.csv");
        std::printf("fold %zu: validation accuracy %.4f\n", f, cv.fold_accuracy[f]);
    }
    std::printf("mean validation accuracy: %.4f\n", cv.mean_accuracy);
    std::printf("per-fold histories and summary written to %s\n", out.c_str());
    return 0;
}

template <typename T>
int run_eval_checkpoint(const std::string& checkpoint, const std::string& manifest, std::string data,
                        const std::string& out) {
    const xrv::ModelState<T> model = xrv::load_model<T>(checkpoint);
    if (data.empty()) data = fs::path(manifest).parent_path().string();
    xrv::Dataset ds = xrv::load_manifest(manifest, data, model.spec.height, model.spec.width);
    if (ds.empty()) throw xrv::ContractError("no evaluable images in manifest " + manifest);
    if (!model.class_names.empty()) {
        ds = xrv::relabel_to(ds, model.class_names);
    } else if (ds.class_names.size() != model.spec.num_classes) {
        throw xrv::ConfigError("manifest lists " + std::to_string(ds.class_names.size()) +
                               " classes but checkpoint expects " + std::to_string(model.spec.num_classes));
    }
    const std::vector<int> preds = xrv::predict_dataset(model, ds);
    std::vector<int> labels;
    for (const auto& im : ds.images) labels.push_back(im.label);
    emit_report(xrv::report(preds, labels, ds.class_names), out);
    return 0;
}

int cmd_eval_baseline(const std::string& kind, const std::string& train_manifest, std::string train_data,
                      const std::string& manifest, std::string data, std::size_t size, std::size_t k,
                      const std::string& out) {
    if (train_data.empty()) train_data = fs::path(train_manifest).parent_path().string();
    if (data.empty()) data = fs::path(manifest).parent_path().string();
    const xrv::Dataset train_ds = xrv::load_manifest(train_manifest, train_data, size, size);
    xrv::Dataset test_ds = xrv::load_manifest(manifest, data, size, size);
    if (train_ds.empty() || test_ds.empty()) throw xrv::ContractError("baseline evaluation needs non-empty manifests");
    test_ds = xrv::relabel_to(test_ds, train_ds.class_names);

    std::vector<int> preds;
    if (kind == "knn") {
        xrv::KnnConfig cfg;
        cfg.k = k;
        preds = xrv::knn_predict_all(train_ds, test_ds, cfg);
    } else if (kind == "majority") {
        preds = xrv::majority_predict_all(train_ds, test_ds.size());
    } else {
        throw xrv::ConfigError("unknown baseline model: " + kind + " (expected knn|majority)");
    }
    std::vector<int> labels;
    for (const auto& im : test_ds.images) labels.push_back(im.label);
    emit_report(xrv::report(preds, labels, train_ds.class_names), out);
    return 0;
}

template <typename T>
int run_predict(const std::string& checkpoint, const std::string& image_path) {
    const xrv::ModelState<T> model = xrv::load_model<T>(checkpoint);
    const xrv::Tensor<float> img =
        xrv::resize_bilinear(xrv::decode_image(image_path), model.spec.height, model.spec.width);

    xrv::Tensor<T> batch = xrv::Tensor<T>::zeros({1, model.spec.height, model.spec.width, 3});
    for (std::size_t i = 0; i < img.size(); ++i) batch.data()[i] = static_cast<T>(img.data()[i]);
    const xrv::Tensor<T> probs = xrv::softmax(xrv::forward(model, batch), -1);

    std::size_t best = 0;
    for (std::size_t c = 1; c < model.spec.num_classes; ++c) {
        if (probs.data()[c] > probs.data()[best]) best = c;
    }
    auto class_name = [&](std::size_t c) {
        return c < model.class_names.size() ? model.class_names[c] : "class" + std::to_string(c);
    };
    std::printf("prediction: %s\n", class_name(best).c_str());
    for (std::size_t c = 0; c < model.spec.num_classes; ++c) {
        std::printf("  %-16s %.6f\n", class_name(c).c_str(), static_cast<double>(probs.data()[c]));
    }
    return 0;
}

int cmd_verify(const std::string& inject_fault) {
    xrv::VerifyOptions opts;
    opts.inject_fault = inject_fault;
    const std::vector<xrv::CheckResult> results = xrv::run_verify_suite(opts);
    int fails = 0;
    for (const auto& r : results) {
        std::printf("%-26s %s  err %.3e (tolerance %.1e, %.2fs)%s%s\n", r.name.c_str(),
                    r.pass ? "[ OK ]" : "[FAIL]", r.value, r.threshold, r.seconds,
                    r.detail.empty() ? "" : " ", r.detail.c_str());
        if (!r.pass) ++fails;
    }
    std::printf("%zu checks, %d failed\n", results.size(), fails);
    return fails == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xrv - shoulder-implant X-ray classification pipeline"};
    app.require_subcommand(1);

    // split
    std::string sp_data, sp_out = "out";
    double sp_frac = 0.25;
    std::uint64_t sp_seed = 0;
    std::size_t sp_size = 256;
    auto* sp = app.add_subcommand("split", "stratified train/test split of a class-per-directory image tree");
    sp->add_option("--data", sp_data, "dataset root (one subdirectory per class)")->required();
    sp->add_option("--test-frac", sp_frac, "test fraction (default 0.25)");
    sp->add_option("--seed", sp_seed, "split seed")->required();
    sp->add_option("--out", sp_out, "output directory");
    sp->add_option("--size", sp_size, "standardized image size (default 256)");

    // augment
    std::string ag_manifest, ag_data, ag_mode = "full", ag_out = "out";
    std::uint64_t ag_seed = 0;
    std::size_t ag_size = 256;
    auto* ag = app.add_subcommand("augment", "expand a training manifest with seeded augmentations");
    ag->add_option("--manifest", ag_manifest, "training manifest")->required();
    ag->add_option("--data", ag_data, "image root (default: manifest directory)");
    ag->add_option("--mode", ag_mode, "full (8 variants) or reduced (4 variants)");
    ag->add_option("--seed", ag_seed, "augmentation seed")->required();
    ag->add_option("--out", ag_out, "output directory");
    ag->add_option("--size", ag_size, "standardized image size (default 256)");

    // shared train/cv settings
    TrainSettings ts;
    std::string tr_manifest, tr_data, tr_valid_manifest, tr_config, tr_out = "out";
    std::size_t cv_folds = 10;
    auto add_train_options = [&](CLI::App* cmd) {
        cmd->add_option("--manifest", tr_manifest, "training manifest")->required();
        cmd->add_option("--data", tr_data, "image root (default: manifest directory)");
        cmd->add_option("--config", tr_config, "key = value config file");
        cmd->add_option("--out", tr_out, "output directory");
        cmd->add_option("--model", ts.model, "cnn|resnet|vit");
        cmd->add_option("--size", ts.size, "input image size");
        cmd->add_option("--channels", ts.channels, "conv stage widths")->delimiter(',');
        cmd->add_option("--blocks", ts.blocks, "residual blocks per stage")->delimiter(',');
        cmd->add_option("--hidden", ts.hidden, "dense head hidden width");
        cmd->add_option("--patch", ts.patch, "vit patch size");
        cmd->add_option("--dim", ts.dim, "vit embedding dim");
        cmd->add_option("--depth", ts.depth, "vit encoder depth");
        cmd->add_option("--heads", ts.heads, "vit attention heads");
        cmd->add_option("--mlp", ts.mlp, "vit mlp dim");
        cmd->add_option("--optimizer", ts.optimizer, "sgd|adam");
        cmd->add_option("--lr", ts.lr, "learning rate");
        cmd->add_option("--batch", ts.batch, "batch size");
        cmd->add_option("--epochs", ts.epochs, "training epochs");
        cmd->add_option("--seed", ts.seed, "training seed");
        cmd->add_option("--dtype", ts.dtype, "float32|float64");
        cmd->add_option("--freeze", ts.freeze, "parameter prefixes to freeze");
        cmd->add_option("--train-only", ts.train_only, "freeze everything except this prefix");
    };

    auto* tr = app.add_subcommand("train", "train a model on a manifest");
    add_train_options(tr);
    tr->add_option("--valid-manifest", tr_valid_manifest, "optional validation manifest");

    auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validated training");
    add_train_options(cv);
    cv->add_option("--folds", cv_folds, "number of folds (default 10)");

    // eval
    std::string ev_manifest, ev_data, ev_checkpoint, ev_model, ev_train_manifest, ev_train_data, ev_out = "out";
    std::size_t ev_size = 256, ev_k = 30;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or baseline on a manifest");
    ev->add_option("--manifest", ev_manifest, "evaluation manifest")->required();
    ev->add_option("--data", ev_data, "image root (default: manifest directory)");
    ev->add_option("--checkpoint", ev_checkpoint, "trained model checkpoint");
    ev->add_option("--model", ev_model, "baseline: knn|majority");
    ev->add_option("--train-manifest", ev_train_manifest, "baseline training manifest");
    ev->add_option("--train-data", ev_train_data, "baseline training image root");
    ev->add_option("--size", ev_size, "image size for baselines (default 256)");
    ev->add_option("--k", ev_k, "knn neighbor count (default 30)");
    ev->add_option("--out", ev_out, "output directory");

    // predict
    std::string pr_image, pr_checkpoint;
    auto* pr = app.add_subcommand("predict", "classify one image with a checkpoint");
    pr->add_option("--image", pr_image, "image file")->required();
    pr->add_option("--checkpoint", pr_checkpoint, "trained model checkpoint")->required();

    // verify
    std::string vf_fault;
    auto* vf = app.add_subcommand("verify", "run the gradient-check and oracle-equivalence suite");
    vf->add_option("--inject-fault", vf_fault, "corrupt the named check's analytic gradient (test hook)")
        ->group("");  // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sp->parsed()) return cmd_split(sp_data, sp_frac, sp_seed, sp_out, sp_size);
        if (ag->parsed()) return cmd_augment(ag_manifest, ag_data, ag_mode, ag_seed, ag_out, ag_size);

        if (tr->parsed() || cv->parsed()) {
            // config file first, explicit flags override
            if (!tr_config.empty()) {
                TrainSettings from_file = ts;
                apply_config_file(tr_config, from_file);
                CLI::App* cmd = tr->parsed() ? tr : cv;
                auto keep_flag = [&](const std::string& flag) { return cmd->count(flag) > 0; };
                TrainSettings merged = from_file;
                if (keep_flag("--model")) merged.model = ts.model;
                if (keep_flag("--size")) merged.size = ts.size;
                if (keep_flag("--channels")) merged.channels = ts.channels;
                if (keep_flag("--blocks")) merged.blocks = ts.blocks;
                if (keep_flag("--hidden")) merged.hidden = ts.hidden;
                if (keep_flag("--patch")) merged.patch = ts.patch;
                if (keep_flag("--dim")) merged.dim = ts.dim;
                if (keep_flag("--depth")) merged.depth = ts.depth;
                if (keep_flag("--heads")) merged.heads = ts.heads;
                if (keep_flag("--mlp")) merged.mlp = ts.mlp;
                if (keep_flag("--optimizer")) merged.optimizer = ts.optimizer;
                if (keep_flag("--lr")) merged.lr = ts.lr;
                if (keep_flag("--batch")) merged.batch = ts.batch;
                if (keep_flag("--epochs")) merged.epochs = ts.epochs;
                if (keep_flag("--seed")) merged.seed = ts.seed;
                if (keep_flag("--dtype")) merged.dtype = ts.dtype;
                if (keep_flag("--freeze")) merged.freeze = ts.freeze;
                if (keep_flag("--train-only")) merged.train_only = ts.train_only;
                ts = merged;
            }

            std::string data = tr_data.empty() ? fs::path(tr_manifest).parent_path().string() : tr_data;
            const xrv::Dataset train_ds = xrv::load_manifest(tr_manifest, data, ts.size, ts.size);
            if (train_ds.empty()) throw xrv::ContractError("training manifest " + tr_manifest + " yields no images");

            if (cv->parsed()) {
                return with_dtype(ts.dtype, [&](auto tag) { return run_cv<decltype(tag)>(ts, train_ds, cv_folds, tr_out); });
            }
            xrv::Dataset valid_ds;
            const xrv::Dataset* valid_ptr = nullptr;
            if (!tr_valid_manifest.empty()) {
                valid_ds = xrv::load_manifest(tr_valid_manifest, data, ts.size, ts.size);
                valid_ds = xrv::relabel_to(valid_ds, train_ds.class_names);
                valid_ptr = &valid_ds;
            }
            return with_dtype(ts.dtype, [&](auto tag) { return run_train<decltype(tag)>(ts, train_ds, valid_ptr, tr_out); });
        }

        if (ev->parsed()) {
            if (!ev_checkpoint.empty()) {
                const xrv::DtypeTag tag = xrv::checkpoint_dtype(ev_checkpoint);
                if (tag == xrv::DtypeTag::f32) return run_eval_checkpoint<float>(ev_checkpoint, ev_manifest, ev_data, ev_out);
                return run_eval_checkpoint<double>(ev_checkpoint, ev_manifest, ev_data, ev_out);
            }
            if (ev_model.empty()) throw xrv::ConfigError("eval needs --checkpoint or --model knn|majority");
            if (ev_train_manifest.empty()) throw xrv::ConfigError("baseline eval needs --train-manifest");
            return cmd_eval_baseline(ev_model, ev_train_manifest, ev_train_data, ev_manifest, ev_data, ev_size,
                                     ev_k, ev_out);
        }

        if (pr->parsed()) {
            const xrv::DtypeTag tag = xrv::checkpoint_dtype(pr_checkpoint);
            if (tag == xrv::DtypeTag::f32) return run_predict<float>(pr_checkpoint, pr_image);
            return run_predict<double>(pr_checkpoint, pr_image);
        }

        if (vf->parsed()) return cmd_verify(vf_fault);
    } catch (const xrv::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
