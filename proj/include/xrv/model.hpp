#pragma once

// The three toy architectures: a VGG-style stack of 3x3 convolutions with
// 2x2 max pooling (MiniCNN), the same with identity-skip residual blocks
// (MiniResNet), and a pre-norm Vision Transformer classifying from the class
// token (MiniViT). Parameter name sets are a pure function of the spec.

#include <cstdint>
#include <string>
#include <vector>

#include "xrv/layers.hpp"
#include "xrv/tensor.hpp"

namespace xrv {

enum class ModelKind { cnn, resnet, vit };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::cnn: return "cnn";
        case ModelKind::resnet: return "resnet";
        case ModelKind::vit: return "vit";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "cnn") return ModelKind::cnn;
    if (s == "resnet") return ModelKind::resnet;
    if (s == "vit") return ModelKind::vit;
    throw ConfigError("unknown model kind: " + s + " (expected cnn|resnet|vit)");
}

struct ModelSpec {
    ModelKind kind = ModelKind::cnn;
    std::size_t height = 32, width = 32, channels = 3;
    std::size_t num_classes = 4;

    // vit
    std::size_t patch = 8;
    std::size_t embed_dim = 64;
    std::size_t depth = 2;
    std::size_t heads = 4;
    std::size_t mlp_dim = 128;

    // cnn / resnet
    std::vector<std::size_t> stage_channels = {8, 16};
    std::vector<std::size_t> stage_blocks = {1, 1};  // resnet residual blocks per stage
    std::size_t head_hidden = 64;

    std::uint64_t seed = 0;

    void validate() const {
        if (height == 0 || width == 0 || channels == 0) throw ConfigError("model input dims must be positive");
        if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
        if (kind == ModelKind::vit) {
            if (patch == 0 || height % patch != 0 || width % patch != 0) {
                throw ConfigError("patch size " + std::to_string(patch) + " must divide input " +
                                  std::to_string(height) + "x" + std::to_string(width));
            }
            if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
                throw ConfigError("embed dim " + std::to_string(embed_dim) + " must be divisible by heads " +
                                  std::to_string(heads));
            }
            if (depth == 0) throw ConfigError("vit depth must be at least 1");
            if (mlp_dim == 0) throw ConfigError("vit mlp dim must be positive");
        } else {
            if (stage_channels.empty()) throw ConfigError("at least one conv stage is required");
            if (kind == ModelKind::resnet && stage_blocks.size() != stage_channels.size()) {
                throw ConfigError("stage_blocks must list one block count per stage");
            }
            std::size_t h = height, w = width;
            for (std::size_t i = 0; i < stage_channels.size(); ++i) {
                if (stage_channels[i] == 0) throw ConfigError("stage channel widths must be positive");
                if (h < 2 || w < 2) throw ConfigError("input too small for " + std::to_string(stage_channels.size()) + " pooling stages");
                h = (h - 2) / 2 + 1;
                w = (w - 2) / 2 + 1;
            }
            if (head_hidden == 0) throw ConfigError("head hidden width must be positive");
        }
    }

    std::size_t token_count() const { return (height / patch) * (width / patch) + 1; }

    // Spatial dims of the feature map entering the dense head (cnn/resnet).
    std::pair<std::size_t, std::size_t> feature_dims() const {
        std::size_t h = height, w = width;
        for (std::size_t i = 0; i < stage_channels.size(); ++i) {
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
        return {h, w};
    }
};

template <typename T>
struct ModelState {
    ModelSpec spec;
    LayerParams<T> params;
    std::uint64_t creation_seed = 0;
    std::uint32_t epoch = 0;
    std::vector<std::string> class_names;  // optional; carried into checkpoints
};

// ---------------------------------------------------------------------------
// Parameter enumeration
// ---------------------------------------------------------------------------

struct ParamDesc {
    enum class Init { scaled_uniform, zero, one, small_normal };
    std::string name;
    Shape shape;
    Init init = Init::scaled_uniform;
    std::size_t fan_in = 0, fan_out = 0;  // scaled_uniform only
};

namespace detail {

inline ParamDesc conv_weight(const std::string& name, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
    return {name, {kh, kw, cin, cout}, ParamDesc::Init::scaled_uniform, kh * kw * cin, kh * kw * cout};
}

inline ParamDesc dense_weight(const std::string& name, std::size_t din, std::size_t dout) {
    return {name, {din, dout}, ParamDesc::Init::scaled_uniform, din, dout};
}

inline ParamDesc zeros_param(const std::string& name, const Shape& shape) {
    return {name, shape, ParamDesc::Init::zero, 0, 0};
}

inline ParamDesc ones_param(const std::string& name, const Shape& shape) {
    return {name, shape, ParamDesc::Init::one, 0, 0};
}

inline ParamDesc normal_param(const std::string& name, const Shape& shape) {
    return {name, shape, ParamDesc::Init::small_normal, 0, 0};
}

}  // namespace detail

// The full parameter list implied by a spec, in declaration order.
inline std::vector<ParamDesc> enumerate_params(const ModelSpec& spec) {
    using namespace detail;
    spec.validate();
    std::vector<ParamDesc> out;

    if (spec.kind == ModelKind::vit) {
        const std::size_t d = spec.embed_dim;
        const std::size_t flat = spec.patch * spec.patch * spec.channels;
        const std::size_t tokens = spec.token_count();
        out.push_back(dense_weight("patch.proj.w", flat, d));
        out.push_back(normal_param("patch.cls", {d}));
        out.push_back(normal_param("patch.pos", {tokens, d}));
        for (std::size_t l = 0; l < spec.depth; ++l) {
            const std::string p = "encoder." + std::to_string(l) + ".";
            out.push_back(ones_param(p + "ln1.gamma", {d}));
            out.push_back(zeros_param(p + "ln1.beta", {d}));
            for (const char* w : {"wq", "wk", "wv", "wo"}) out.push_back(dense_weight(p + "attn." + w, d, d));
            out.push_back(ones_param(p + "ln2.gamma", {d}));
            out.push_back(zeros_param(p + "ln2.beta", {d}));
            out.push_back(dense_weight(p + "mlp.fc1.w", d, spec.mlp_dim));
            out.push_back(zeros_param(p + "mlp.fc1.b", {spec.mlp_dim}));
            out.push_back(dense_weight(p + "mlp.fc2.w", spec.mlp_dim, d));
            out.push_back(zeros_param(p + "mlp.fc2.b", {d}));
        }
        out.push_back(ones_param("norm.gamma", {d}));
        out.push_back(zeros_param("norm.beta", {d}));
        out.push_back(dense_weight("head.w", d, spec.num_classes));
        out.push_back(zeros_param("head.b", {spec.num_classes}));
        return out;
    }

    std::size_t cin = spec.channels;
    if (spec.kind == ModelKind::cnn) {
        for (std::size_t i = 0; i < spec.stage_channels.size(); ++i) {
            const std::string p = "stage" + std::to_string(i) + ".conv.";
            out.push_back(conv_weight(p + "w", 3, 3, cin, spec.stage_channels[i]));
            out.push_back(zeros_param(p + "b", {spec.stage_channels[i]}));
            cin = spec.stage_channels[i];
        }
    } else {
        out.push_back(conv_weight("stem.conv.w", 3, 3, cin, spec.stage_channels[0]));
        out.push_back(zeros_param("stem.conv.b", {spec.stage_channels[0]}));
        cin = spec.stage_channels[0];
        for (std::size_t i = 0; i < spec.stage_channels.size(); ++i) {
            const std::size_t ch = spec.stage_channels[i];
            for (std::size_t j = 0; j < spec.stage_blocks[i]; ++j) {
                const std::string p = "stage" + std::to_string(i) + ".block" + std::to_string(j) + ".";
                out.push_back(conv_weight(p + "conv1.w", 3, 3, ch, ch));
                out.push_back(zeros_param(p + "conv1.b", {ch}));
                out.push_back(conv_weight(p + "conv2.w", 3, 3, ch, ch));
                out.push_back(zeros_param(p + "conv2.b", {ch}));
            }
            if (i + 1 < spec.stage_channels.size()) {
                const std::string p = "down" + std::to_string(i) + ".conv.";
                out.push_back(conv_weight(p + "w", 3, 3, ch, spec.stage_channels[i + 1]));
                out.push_back(zeros_param(p + "b", {spec.stage_channels[i + 1]}));
            }
        }
        cin = spec.stage_channels.back();
    }

    auto [fh, fw] = spec.feature_dims();
    const std::size_t flat = fh * fw * cin;
    out.push_back(dense_weight("head.fc1.w", flat, spec.head_hidden));
    out.push_back(zeros_param("head.fc1.b", {spec.head_hidden}));
    out.push_back(dense_weight("head.fc2.w", spec.head_hidden, spec.num_classes));
    out.push_back(zeros_param("head.fc2.b", {spec.num_classes}));
    return out;
}

inline std::vector<std::string> expected_param_names(const ModelSpec& spec) {
    std::vector<std::string> names;
    for (const auto& d : enumerate_params(spec)) names.push_back(d.name);
    std::sort(names.begin(), names.end());
    return names;
}

// ---------------------------------------------------------------------------
// Build
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

// Seeded initialization: weights scaled-uniform in +-sqrt(6/(fan_in+fan_out)),
// biases zero, layernorm affine (1, 0), class token and positional embedding
// normal with std 0.02. Each parameter draws from a stream derived from
// (spec seed, parameter name), so initialization is order-independent and
// bit-identical per seed.
template <typename T>
ModelState<T> build(const ModelSpec& spec) {
    ModelState<T> state;
    state.spec = spec;
    state.creation_seed = spec.seed;
    for (const ParamDesc& d : enumerate_params(spec)) {
        const std::uint64_t s = mix_seed(spec.seed, detail::fnv1a64(d.name));
        Tensor<T> t;
        switch (d.init) {
            case ParamDesc::Init::zero: t = Tensor<T>::zeros(d.shape); break;
            case ParamDesc::Init::one: t = Tensor<T>::ones(d.shape); break;
            case ParamDesc::Init::small_normal: t = Tensor<T>::randn(d.shape, T(0), T(0.02), s); break;
            case ParamDesc::Init::scaled_uniform: {
                const T bound = std::sqrt(T(6) / static_cast<T>(d.fan_in + d.fan_out));
                t = Tensor<T>::rand_uniform(d.shape, -bound, bound, s);
                break;
            }
        }
        state.params.insert(d.name, std::move(t), true);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> conv_stage(const Tensor<T>& x, const LayerParams<T>& p, const std::string& prefix) {
    Tensor<T> h = conv2d(x, p.tensor(prefix + ".w"), 1, 1, 1, 1);
    return relu(add(h, p.tensor(prefix + ".b")));
}

template <typename T>
Tensor<T> residual_block(const Tensor<T>& x, const LayerParams<T>& p, const std::string& prefix) {
    // x + conv2(relu(conv1(x))); no post-add activation, so an all-zero
    // branch leaves the block an exact identity.
    return residual(x, [&](const Tensor<T>& in) {
        Tensor<T> h = conv_stage(in, p, prefix + ".conv1");
        h = conv2d(h, p.tensor(prefix + ".conv2.w"), 1, 1, 1, 1);
        return add(h, p.tensor(prefix + ".conv2.b"));
    });
}

template <typename T>
Tensor<T> dense_head(const Tensor<T>& features, const LayerParams<T>& p) {
    Tensor<T> h = relu(dense(features, p.tensor("head.fc1.w"), p.tensor("head.fc1.b")));
    return dense(h, p.tensor("head.fc2.w"), p.tensor("head.fc2.b"));
}

template <typename T>
Tensor<T> vit_encode_sample(const Tensor<T>& image, const ModelState<T>& m) {
    const auto& p = m.params;
    Tensor<T> tokens = patch_embed(image, m.spec.patch, p.tensor("patch.proj.w"), p.tensor("patch.pos"),
                                   p.tensor("patch.cls"));
    for (std::size_t l = 0; l < m.spec.depth; ++l) {
        const std::string pre = "encoder." + std::to_string(l) + ".";
        tokens = residual(tokens, [&](const Tensor<T>& in) {
            Tensor<T> h = layernorm(in, p.tensor(pre + "ln1.gamma"), p.tensor(pre + "ln1.beta"));
            return attention_single(h, p.tensor(pre + "attn.wq"), p.tensor(pre + "attn.wk"),
                                    p.tensor(pre + "attn.wv"), p.tensor(pre + "attn.wo"), m.spec.heads);
        });
        tokens = residual(tokens, [&](const Tensor<T>& in) {
            Tensor<T> h = layernorm(in, p.tensor(pre + "ln2.gamma"), p.tensor(pre + "ln2.beta"));
            h = gelu(dense(h, p.tensor(pre + "mlp.fc1.w"), p.tensor(pre + "mlp.fc1.b")));
            return dense(h, p.tensor(pre + "mlp.fc2.w"), p.tensor(pre + "mlp.fc2.b"));
        });
    }
    tokens = layernorm(tokens, p.tensor("norm.gamma"), p.tensor("norm.beta"));
    Tensor<T> cls_row = slice_rows(tokens, 0, 1);  // classification reads the class token only
    return dense(cls_row, p.tensor("head.w"), p.tensor("head.b"));
}

}  // namespace detail

// batch [B x H x W x C] -> logits [B x num_classes].
template <typename T>
Tensor<T> forward(const ModelState<T>& m, const Tensor<T>& batch) {
    const ModelSpec& spec = m.spec;
    if (batch.ndim() != 4 || batch.shape()[1] != spec.height || batch.shape()[2] != spec.width ||
        batch.shape()[3] != spec.channels) {
        throw ShapeError("batch " + shape_str(batch.shape()) + " does not match model input " +
                         std::to_string(spec.height) + "x" + std::to_string(spec.width) + "x" +
                         std::to_string(spec.channels));
    }
    const std::size_t B = batch.shape()[0];
    const auto& p = m.params;

    if (spec.kind == ModelKind::vit) {
        std::vector<Tensor<T>> logits;
        logits.reserve(B);
        for (std::size_t b = 0; b < B; ++b) logits.push_back(detail::vit_encode_sample(select0(batch, b), m));
        return concat_rows(logits);
    }

    Tensor<T> h = batch;
    if (spec.kind == ModelKind::cnn) {
        for (std::size_t i = 0; i < spec.stage_channels.size(); ++i) {
            h = detail::conv_stage(h, p, "stage" + std::to_string(i) + ".conv");
            h = maxpool2d(h, 2, 2);
        }
    } else {
        h = detail::conv_stage(h, p, "stem.conv");
        for (std::size_t i = 0; i < spec.stage_channels.size(); ++i) {
            for (std::size_t j = 0; j < spec.stage_blocks[i]; ++j) {
                h = detail::residual_block(h, p, "stage" + std::to_string(i) + ".block" + std::to_string(j));
            }
            h = maxpool2d(h, 2, 2);
            if (i + 1 < spec.stage_channels.size()) {
                h = detail::conv_stage(h, p, "down" + std::to_string(i) + ".conv");
            }
        }
    }
    Tensor<T> flat = reshape(h, {B, h.size() / B});
    return detail::dense_head(flat, p);
}

// ---------------------------------------------------------------------------
// Freezing
// ---------------------------------------------------------------------------

// Marks every parameter whose name starts with prefix non-trainable. The
// empty prefix matches everything. A prefix matching nothing is rejected to
// guard against typos.
template <typename T>
void freeze(ModelState<T>& m, const std::string& prefix) {
    if (m.params.set_trainable_by_prefix(prefix, false) == 0) {
        throw ConfigError("freeze pattern \"" + prefix + "\" matches no parameter");
    }
}

template <typename T>
void unfreeze(ModelState<T>& m, const std::string& prefix) {
    if (m.params.set_trainable_by_prefix(prefix, true) == 0) {
        throw ConfigError("unfreeze pattern \"" + prefix + "\" matches no parameter");
    }
}

}  // namespace xrv
