#pragma once

// Shared test fixtures: temp directories, synthetic datasets and image
// trees, and a helper for driving the CLI binary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xrv/dataset.hpp"
#include "xrv/image_io.hpp"
#include "xrv/rng.hpp"

namespace testutil {

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path() / "xrv_test_XXXXXX";
        std::string tmpl = base.string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

// Snaps a value in [0, 1] onto the 8-bit grid, so PNG persistence is exact.
inline float quant8(double v) {
    return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f;
}

// In-memory dataset with the given per-class counts; images are seeded
// random noise (8-bit grid values) so they are pairwise distinct.
inline xrv::Dataset make_random_dataset(const std::vector<std::size_t>& counts, std::size_t h, std::size_t w,
                                        std::uint64_t seed) {
    xrv::Dataset ds;
    for (std::size_t c = 0; c < counts.size(); ++c) ds.class_names.push_back("class" + std::to_string(c));
    std::size_t serial = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i, ++serial) {
            xrv::LabeledImage im;
            xrv::Rng rng(xrv::mix_seed(seed, serial));
            std::vector<float> pix(h * w * 3);
            for (float& v : pix) v = quant8(rng.next_double());
            im.pixels = xrv::Tensor<float>::from_data({h, w, 3}, std::move(pix));
            im.label = static_cast<int>(c);
            im.source = ds.class_names[c] + "/img" + std::to_string(i) + ".png";
            ds.images.push_back(std::move(im));
        }
    }
    return ds;
}

// Separable-by-construction set: each class is a distinct solid color with
// a little per-image noise.
inline xrv::Dataset make_solid_dataset(std::size_t per_class, std::size_t classes, std::size_t h, std::size_t w,
                                       std::uint64_t seed) {
    static const std::array<std::array<float, 3>, 4> palette = {{
        {0.9f, 0.1f, 0.1f},
        {0.1f, 0.9f, 0.1f},
        {0.1f, 0.1f, 0.9f},
        {0.8f, 0.8f, 0.1f},
    }};
    xrv::Dataset ds;
    for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
    std::size_t serial = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const auto& base = palette[c % palette.size()];
        for (std::size_t i = 0; i < per_class; ++i, ++serial) {
            xrv::Rng rng(xrv::mix_seed(seed, serial));
            std::vector<float> pix(h * w * 3);
            for (std::size_t p = 0; p < h * w; ++p) {
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    pix[p * 3 + ch] = quant8(base[ch] + rng.uniform(-0.05, 0.05));
                }
            }
            xrv::LabeledImage im;
            im.pixels = xrv::Tensor<float>::from_data({h, w, 3}, std::move(pix));
            im.label = static_cast<int>(c);
            im.source = ds.class_names[c] + "/img" + std::to_string(i) + ".png";
            ds.images.push_back(std::move(im));
        }
    }
    return ds;
}

// Writes a dataset out as a class-per-directory PNG tree.
inline void write_png_tree(const xrv::Dataset& ds, const std::filesystem::path& root) {
    for (const xrv::LabeledImage& im : ds.images) {
        const std::filesystem::path dest = root / im.source;
        std::filesystem::create_directories(dest.parent_path());
        xrv::encode_png(im.pixels, dest.string());
    }
}

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr combined
};

inline std::string cli_path() {
    const char* p = std::getenv("XRV_CLI");
    if (!p) throw std::runtime_error("XRV_CLI environment variable not set (points at the xrv binary)");
    return p;
}

inline CliResult run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed for: " + cmd);
    CliResult r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace testutil
