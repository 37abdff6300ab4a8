#pragma once

// Dataset ingestion and stratified partitioning.
//
// Input layout is one subdirectory per class: <root>/<class_name>/*.{png,
// jpg,jpeg,bmp}. Class indices are the rank of the class directory in
// sorted order and images are visited in sorted path order, so ingestion is
// deterministic across filesystems. Split manifests are newline-delimited
// relative paths whose first component names the class.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "xrv/image_io.hpp"
#include "xrv/rng.hpp"
#include "xrv/tensor.hpp"

namespace xrv {

struct LabeledImage {
    Tensor<float> pixels;  // H x W x 3 in [0, 1]
    int label = 0;
    std::string source;    // relative path "class/file.png"
};

struct Dataset {
    std::vector<LabeledImage> images;
    std::vector<std::string> class_names;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
};

struct FoldPlan {
    std::vector<std::vector<std::size_t>> folds;
    std::uint64_t seed = 0;
};

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// "class/img.png" + 2 -> "class/img_aug2.png"
inline std::string augmented_name(const std::string& source, std::size_t k) {
    const std::size_t dot = source.rfind('.');
    const std::size_t slash = source.rfind('/');
    const std::string suffix = "_aug" + std::to_string(k);
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return source + suffix;
    return source.substr(0, dot) + suffix + source.substr(dot);
}

}  // namespace detail

// Exact per-class histogram.
inline std::vector<std::size_t> class_distribution(const Dataset& ds) {
    std::vector<std::size_t> counts(ds.class_names.size(), 0);
    for (const LabeledImage& im : ds.images) {
        if (im.label < 0 || static_cast<std::size_t>(im.label) >= counts.size()) {
            throw ContractError("dataset label " + std::to_string(im.label) + " out of range");
        }
        ++counts[static_cast<std::size_t>(im.label)];
    }
    return counts;
}

// Loads a class-per-directory tree. Undecodable files are skipped with a
// warning; a class left empty is fatal, as is a root without classes.
inline Dataset ingest(const std::string& root, std::size_t target_h = 256, std::size_t target_w = 256) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);

    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    }
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) throw IoError("dataset root has no class subdirectories: " + root);

    Dataset ds;
    ds.class_names = classes;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / classes[c])) {
            if (entry.is_regular_file() && detail::has_image_extension(entry.path())) {
                files.push_back(entry.path().filename().string());
            }
        }
        std::sort(files.begin(), files.end());

        std::size_t loaded = 0;
        for (const std::string& f : files) {
            const fs::path full = fs::path(root) / classes[c] / f;
            try {
                LabeledImage im;
                im.pixels = resize_bilinear(decode_image(full.string()), target_h, target_w);
                im.label = static_cast<int>(c);
                im.source = classes[c] + "/" + f;
                ds.images.push_back(std::move(im));
                ++loaded;
            } catch (const std::exception& e) {
                std::cerr << "warning: skipping undecodable image " << full.string() << ": " << e.what() << "\n";
            }
        }
        if (loaded == 0) {
            throw IoError("class \"" + classes[c] + "\" has no decodable images under " + root);
        }
    }
    return ds;
}

// Per class: round-half-up(count * test_fraction) images drawn by seeded
// shuffle into the test set, remainder to train. Train and test are disjoint
// and together exhaust the input.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ContractError("test fraction must lie strictly between 0 and 1");
    }
    const std::size_t C = ds.class_names.size();
    std::vector<std::vector<std::size_t>> by_class(C);
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.images[i].label)].push_back(i);
    }

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t c = 0; c < C; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) throw ConfigError("class \"" + ds.class_names[c] + "\" has no images; cannot split");
        Rng rng(mix_seed(seed, c));
        shuffle(idx, rng);
        std::size_t take = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * test_fraction + 0.5));
        if (take > idx.size()) take = idx.size();
        if (take == 0) {
            std::cerr << "warning: class \"" << ds.class_names[c] << "\" contributes no test images at fraction "
                      << test_fraction << "\n";
        }
        test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
        train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto pick = [&](const std::vector<std::size_t>& which) {
        Dataset out;
        out.class_names = ds.class_names;
        out.images.reserve(which.size());
        for (std::size_t i : which) out.images.push_back(ds.images[i]);
        return out;
    };
    return {pick(train_idx), pick(test_idx)};
}

// Per class: seeded shuffle, then round-robin dealing into k folds. Folds
// partition the index set and per-class fold sizes differ by at most one.
inline FoldPlan stratified_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("stratified k-fold requires k >= 2");
    const std::size_t C = ds.class_names.size();
    std::vector<std::vector<std::size_t>> by_class(C);
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.images[i].label)].push_back(i);
    }

    FoldPlan plan;
    plan.seed = seed;
    plan.folds.assign(k, {});
    for (std::size_t c = 0; c < C; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) throw ConfigError("class \"" + ds.class_names[c] + "\" has no images; cannot fold");
        if (idx.size() < k) {
            std::cerr << "warning: class \"" << ds.class_names[c] << "\" has " << idx.size() << " images for k="
                      << k << "; some folds will miss it\n";
        }
        Rng rng(mix_seed(seed, c));
        shuffle(idx, rng);
        for (std::size_t j = 0; j < idx.size(); ++j) plan.folds[j % k].push_back(idx[j]);
    }
    for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
    return plan;
}

// Dataset restricted to the given indices (fold assembly).
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.class_names = ds.class_names;
    out.images.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= ds.images.size()) throw ContractError("subset index out of range");
        out.images.push_back(ds.images[i]);
    }
    return out;
}

// Relabels images onto a target class-name list (e.g. the one stored in a
// checkpoint) so label indices agree across independently loaded manifests.
inline Dataset relabel_to(const Dataset& ds, const std::vector<std::string>& target_names) {
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < target_names.size(); ++i) index[target_names[i]] = static_cast<int>(i);
    Dataset out;
    out.class_names = target_names;
    out.images.reserve(ds.images.size());
    for (const LabeledImage& im : ds.images) {
        const std::string& name = ds.class_names[static_cast<std::size_t>(im.label)];
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError("class \"" + name + "\" is not known to the target label set");
        LabeledImage copy = im;
        copy.label = it->second;
        out.images.push_back(std::move(copy));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

inline void write_manifest(const Dataset& ds, const std::string& path) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const LabeledImage& im : ds.images) out << im.source << "\n";
}

inline std::vector<std::string> read_manifest_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

// Loads the images a manifest lists, resolving relative paths against root.
// Class names are the sorted distinct first path components. Line order is
// preserved. Undecodable entries warn and are skipped.
inline Dataset load_manifest(const std::string& manifest_path, const std::string& root,
                             std::size_t target_h = 256, std::size_t target_w = 256) {
    const std::vector<std::string> lines = read_manifest_lines(manifest_path);

    std::vector<std::string> classes;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t slash = lines[i].find('/');
        if (slash == std::string::npos || slash == 0) {
            throw FormatError("manifest line " + std::to_string(i + 1) + " is not <class>/<file>: " + lines[i]);
        }
        classes.push_back(lines[i].substr(0, slash));
    }
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    std::map<std::string, int> class_index;
    for (std::size_t c = 0; c < classes.size(); ++c) class_index[classes[c]] = static_cast<int>(c);

    Dataset ds;
    ds.class_names = classes;
    std::size_t skipped = 0;
    for (const std::string& line : lines) {
        const std::filesystem::path full = std::filesystem::path(root) / line;
        try {
            LabeledImage im;
            im.pixels = resize_bilinear(decode_image(full.string()), target_h, target_w);
            im.label = class_index.at(line.substr(0, line.find('/')));
            im.source = line;
            ds.images.push_back(std::move(im));
        } catch (const std::exception& e) {
            ++skipped;
            std::cerr << "warning: skipping " << full.string() << ": " << e.what() << "\n";
        }
    }
    if (skipped > 0) std::cerr << "warning: skipped " << skipped << " of " << lines.size() << " manifest entries\n";
    return ds;
}

}  // namespace xrv
