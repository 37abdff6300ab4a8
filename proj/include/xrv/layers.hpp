#pragma once

// Neural-network building blocks: dense, 2-D convolution and pooling, layer
// normalization, multi-head self-attention, patch embedding, residual
// wrapper, factorized convolution, and the cross-entropy loss.
//
// Convolutions use the cross-correlation convention (no kernel flip).
// Image layout is channel-last: B x H x W x C.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xrv/tensor.hpp"

namespace xrv {

// ---------------------------------------------------------------------------
// Named parameter store
// ---------------------------------------------------------------------------

template <typename T>
struct Param {
    Tensor<T> value;
    bool trainable = true;
};

// Dot-separated parameter names ("encoder.0.attn.wq") mapped to tensors with
// per-name trainable flags. Iteration order is the sorted name order, so any
// walk over the store is deterministic.
template <typename T>
class LayerParams {
public:
    void insert(const std::string& name, Tensor<T> value, bool trainable = true) {
        if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
        value.set_requires_grad(trainable);
        params_.emplace(name, Param<T>{std::move(value), trainable});
    }

    Param<T>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    const Param<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }

    const Tensor<T>& tensor(const std::string& name) const { return at(name).value; }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [name, p] : params_) out.push_back(name);
        return out;
    }

    // Returns the number of parameters whose name starts with prefix.
    // The empty prefix matches everything.
    std::size_t set_trainable_by_prefix(const std::string& prefix, bool trainable) {
        std::size_t matched = 0;
        for (auto& [name, p] : params_) {
            if (name.rfind(prefix, 0) == 0) {
                p.trainable = trainable;
                p.value.set_requires_grad(trainable);
                ++matched;
            }
        }
        return matched;
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& [name, p] : params_) n += p.value.size();
        return n;
    }

private:
    std::map<std::string, Param<T>> params_;
};

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

// x [B x d_in] * W [d_in x d_out] + b [d_out], bias broadcast per row.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1) {
        throw ShapeError("dense expects x[BxD], W[DxK], b[K]");
    }
    if (x.shape()[1] != w.shape()[0] || w.shape()[1] != b.shape()[0]) {
        throw ShapeError("dense shapes disagree: x" + shape_str(x.shape()) + " W" + shape_str(w.shape()) +
                         " b" + shape_str(b.shape()));
    }
    return add(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

struct ConvGeometry {
    std::size_t batch, in_h, in_w, in_c;
    std::size_t kh, kw, out_c;
    std::size_t sh, sw, ph, pw;
    std::size_t out_h, out_w;
};

inline ConvGeometry conv_geometry(const Shape& x, const Shape& k,
                                  std::size_t sh, std::size_t sw,
                                  std::size_t ph, std::size_t pw) {
    if (x.size() != 4) throw ShapeError("conv2d expects input [BxHxWxC], got " + shape_str(x));
    if (k.size() != 4) throw ShapeError("conv2d expects kernel [khxkwxCinxCout], got " + shape_str(k));
    if (sh == 0 || sw == 0) throw ShapeError("conv2d stride must be positive");
    ConvGeometry g{};
    g.batch = x[0];
    g.in_h = x[1];
    g.in_w = x[2];
    g.in_c = x[3];
    g.kh = k[0];
    g.kw = k[1];
    g.out_c = k[3];
    g.sh = sh;
    g.sw = sw;
    g.ph = ph;
    g.pw = pw;
    if (k[2] != g.in_c) {
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(g.in_c) +
                         ", kernel expects " + std::to_string(k[2]));
    }
    if (g.kh > g.in_h + 2 * ph || g.kw > g.in_w + 2 * pw) {
        throw ShapeError("conv2d kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                         " larger than padded input");
    }
    g.out_h = (g.in_h + 2 * ph - g.kh) / sh + 1;
    g.out_w = (g.in_w + 2 * pw - g.kw) / sw + 1;
    return g;
}

// Cross-correlation over [B x H x W x Cin] with kernel [kh x kw x Cin x Cout].
// Accumulation order is kh, kw, cin; zero padding is implicit via bounds
// checks on the source index.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 std::size_t stride_h, std::size_t stride_w,
                 std::size_t pad_h, std::size_t pad_w) {
    const ConvGeometry g = conv_geometry(x.shape(), kernel.shape(), stride_h, stride_w, pad_h, pad_w);

    Tensor<T> out = Tensor<T>::zeros({g.batch, g.out_h, g.out_w, g.out_c});
    const T* px = x.data().data();
    const T* pk = kernel.data().data();
    T* po = out.data().data();

    auto xi = [&](std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
        return ((b * g.in_h + h) * g.in_w + w) * g.in_c + c;
    };
    auto ki = [&](std::size_t kh, std::size_t kw, std::size_t ci, std::size_t co) {
        return ((kh * g.kw + kw) * g.in_c + ci) * g.out_c + co;
    };
    auto oi = [&](std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
        return ((b * g.out_h + h) * g.out_w + w) * g.out_c + c;
    };

    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t oh = 0; oh < g.out_h; ++oh)
            for (std::size_t ow = 0; ow < g.out_w; ++ow)
                for (std::size_t oc = 0; oc < g.out_c; ++oc) {
                    T acc = 0;
                    for (std::size_t kh = 0; kh < g.kh; ++kh) {
                        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.sh + kh) - static_cast<std::ptrdiff_t>(g.ph);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                        for (std::size_t kw = 0; kw < g.kw; ++kw) {
                            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.sw + kw) - static_cast<std::ptrdiff_t>(g.pw);
                            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                            for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                                acc += px[xi(b, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw), ic)] *
                                       pk[ki(kh, kw, ic, oc)];
                            }
                        }
                    }
                    po[oi(b, oh, ow, oc)] = acc;
                }

    if (detail::recording<T>({&x, &kernel})) {
        out.set_requires_grad(true);
        auto xn = x.node(), kn = kernel.node(), on = out.node();
        Tape<T>::active()->record([xn, kn, on, g] {
            if (on->grad.empty()) return;
            const T* dy = on->grad.data();
            const bool dx_needed = xn->requires_grad;
            const bool dk_needed = kn->requires_grad;
            if (dx_needed && xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            if (dk_needed && kn->grad.empty()) kn->grad.assign(kn->data.size(), T(0));
            if (!dx_needed && !dk_needed) return;

            auto xi = [&](std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
                return ((b * g.in_h + h) * g.in_w + w) * g.in_c + c;
            };
            auto ki = [&](std::size_t kh, std::size_t kw, std::size_t ci, std::size_t co) {
                return ((kh * g.kw + kw) * g.in_c + ci) * g.out_c + co;
            };
            auto oi = [&](std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
                return ((b * g.out_h + h) * g.out_w + w) * g.out_c + c;
            };

            for (std::size_t b = 0; b < g.batch; ++b)
                for (std::size_t oh = 0; oh < g.out_h; ++oh)
                    for (std::size_t ow = 0; ow < g.out_w; ++ow)
                        for (std::size_t oc = 0; oc < g.out_c; ++oc) {
                            const T dv = dy[oi(b, oh, ow, oc)];
                            if (dv == T(0)) continue;
                            for (std::size_t kh = 0; kh < g.kh; ++kh) {
                                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.sh + kh) - static_cast<std::ptrdiff_t>(g.ph);
                                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                                for (std::size_t kw = 0; kw < g.kw; ++kw) {
                                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.sw + kw) - static_cast<std::ptrdiff_t>(g.pw);
                                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                                    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                                        const std::size_t src = xi(b, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw), ic);
                                        const std::size_t ker = ki(kh, kw, ic, oc);
                                        if (dx_needed) xn->grad[src] += dv * kn->data[ker];
                                        if (dk_needed) kn->grad[ker] += dv * xn->data[src];
                                    }
                                }
                            }
                        }
        });
    }
    return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride = 1, std::size_t padding = 0) {
    return conv2d(x, kernel, stride, stride, padding, padding);
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

// Per-window maximum over [B x H x W x C]. The backward pass routes the
// gradient to the argmax element; ties go to the first element in row-major
// window order.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window, std::size_t stride) {
    if (x.ndim() != 4) throw ShapeError("maxpool2d expects input [BxHxWxC], got " + shape_str(x.shape()));
    if (window == 0 || stride == 0) throw ShapeError("maxpool2d window and stride must be positive");
    const std::size_t B = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
    if (window > H || window > W) throw ShapeError("maxpool2d window exceeds input dimensions");
    const std::size_t OH = (H - window) / stride + 1;
    const std::size_t OW = (W - window) / stride + 1;

    Tensor<T> out = Tensor<T>::zeros({B, OH, OW, C});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const T* px = x.data().data();
    T* po = out.data().data();

    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t oh = 0; oh < OH; ++oh)
            for (std::size_t ow = 0; ow < OW; ++ow)
                for (std::size_t c = 0; c < C; ++c, ++o) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t wh = 0; wh < window; ++wh)
                        for (std::size_t ww = 0; ww < window; ++ww) {
                            const std::size_t idx = ((b * H + oh * stride + wh) * W + ow * stride + ww) * C + c;
                            if (px[idx] > best) {
                                best = px[idx];
                                best_idx = idx;
                            }
                        }
                    po[o] = best;
                    (*argmax)[o] = best_idx;
                }

    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, argmax] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[(*argmax)[i]] += on->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layer normalization
// ---------------------------------------------------------------------------

// Standardizes over the last axis with the population (divide-by-d) variance,
// then applies the affine gamma * x + beta.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
    if (eps <= T(0)) throw ContractError("layernorm eps must be positive");
    const std::size_t d = x.shape().back();
    if (gamma.ndim() != 1 || beta.ndim() != 1 || gamma.shape()[0] != d || beta.shape()[0] != d) {
        throw ShapeError("layernorm gamma/beta must be 1-D of the last-axis size " + std::to_string(d));
    }
    const std::size_t lanes = x.size() / d;

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto inv_std = std::make_shared<std::vector<T>>(lanes);
    auto x_hat = std::make_shared<std::vector<T>>(x.size());

    const T* px = x.data().data();
    const T* pg = gamma.data().data();
    const T* pb = beta.data().data();
    T* py = out.data().data();
    for (std::size_t l = 0; l < lanes; ++l) {
        const T* row = px + l * d;
        T mu = 0;
        for (std::size_t i = 0; i < d; ++i) mu += row[i];
        mu /= static_cast<T>(d);
        T var = 0;
        for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        (*inv_std)[l] = inv;
        for (std::size_t i = 0; i < d; ++i) {
            const T xh = (row[i] - mu) * inv;
            (*x_hat)[l * d + i] = xh;
            py[l * d + i] = pg[i] * xh + pb[i];
        }
    }

    if (detail::recording<T>({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
        Tape<T>::active()->record([xn, gn, bn, on, inv_std, x_hat, d, lanes] {
            if (on->grad.empty()) return;
            const T* dy = on->grad.data();
            if (gn->requires_grad && gn->grad.empty()) gn->grad.assign(gn->data.size(), T(0));
            if (bn->requires_grad && bn->grad.empty()) bn->grad.assign(bn->data.size(), T(0));
            if (xn->requires_grad && xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t l = 0; l < lanes; ++l) {
                const T* dyl = dy + l * d;
                const T* xh = x_hat->data() + l * d;
                if (gn->requires_grad)
                    for (std::size_t i = 0; i < d; ++i) gn->grad[i] += dyl[i] * xh[i];
                if (bn->requires_grad)
                    for (std::size_t i = 0; i < d; ++i) bn->grad[i] += dyl[i];
                if (xn->requires_grad) {
                    T mean_dxh = 0, mean_dxh_xh = 0;
                    for (std::size_t i = 0; i < d; ++i) {
                        const T dxh = dyl[i] * gn->data[i];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[i];
                    }
                    mean_dxh /= static_cast<T>(d);
                    mean_dxh_xh /= static_cast<T>(d);
                    const T inv = (*inv_std)[l];
                    for (std::size_t i = 0; i < d; ++i) {
                        const T dxh = dyl[i] * gn->data[i];
                        xn->grad[l * d + i] += inv * (dxh - mean_dxh - xh[i] * mean_dxh_xh);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention
// ---------------------------------------------------------------------------

// Scaled dot-product self-attention over one token sequence [T x d].
// Per head: softmax(Q K^T / sqrt(d/h)) V on column-sliced projections; head
// outputs are concatenated and projected by Wo.
template <typename T>
Tensor<T> attention_single(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                           const Tensor<T>& wv, const Tensor<T>& wo, std::size_t heads) {
    if (x.ndim() != 2) throw ShapeError("attention_single expects [Txd], got " + shape_str(x.shape()));
    const std::size_t d = x.shape()[1];
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("attention: model dim " + std::to_string(d) + " not divisible by heads " + std::to_string(heads));
    }
    for (const Tensor<T>* w : {&wq, &wk, &wv, &wo}) {
        if (w->ndim() != 2 || w->shape()[0] != d || w->shape()[1] != d) {
            throw ShapeError("attention projection matrices must be [dxd]");
        }
    }
    const std::size_t dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Tensor<T> q = matmul(x, wq);
    Tensor<T> k = matmul(x, wk);
    Tensor<T> v = matmul(x, wv);

    std::vector<Tensor<T>> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor<T> scores = mul_scalar(matmul(qh, transpose2d(kh)), scale);
        Tensor<T> weights = softmax(scores, -1);
        head_outputs.push_back(matmul(weights, vh));
    }
    return matmul(concat_cols(head_outputs), wo);
}

// Batched wrapper: [B x T x d] -> [B x T x d].
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                               const Tensor<T>& wv, const Tensor<T>& wo, std::size_t heads) {
    if (x.ndim() == 2) return attention_single(x, wq, wk, wv, wo, heads);
    if (x.ndim() != 3) throw ShapeError("multi_head_attention expects [BxTxd] or [Txd]");
    std::vector<Tensor<T>> outs;
    outs.reserve(x.shape()[0]);
    for (std::size_t b = 0; b < x.shape()[0]; ++b) {
        outs.push_back(attention_single(select0(x, b), wq, wk, wv, wo, heads));
    }
    return stack0(outs);
}

// Attention weights of a single-head pass, for inspection/tests.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk, std::size_t heads,
                            std::size_t head_index) {
    const std::size_t d = x.shape()[1];
    const std::size_t dh = d / heads;
    Tensor<T> q = matmul(x, wq);
    Tensor<T> k = matmul(x, wk);
    Tensor<T> qh = slice_cols(q, head_index * dh, (head_index + 1) * dh);
    Tensor<T> kh = slice_cols(k, head_index * dh, (head_index + 1) * dh);
    return softmax(mul_scalar(matmul(qh, transpose2d(kh)), T(1) / std::sqrt(static_cast<T>(dh))), -1);
}

// ---------------------------------------------------------------------------
// Patch embedding
// ---------------------------------------------------------------------------

// Splits [H x W x C] into non-overlapping P x P patches, each flattened
// row-major within the patch with channel fastest: [N x (P*P*C)] where
// N = (H/P)*(W/P). Patches are ordered row-major over the grid. Pure index
// permutation, so the backward pass is the inverse scatter.
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch) {
    if (image.ndim() != 3) throw ShapeError("patchify expects [HxWxC], got " + shape_str(image.shape()));
    const std::size_t H = image.shape()[0], W = image.shape()[1], C = image.shape()[2];
    if (patch == 0 || H % patch != 0 || W % patch != 0) {
        throw ShapeError("patch size " + std::to_string(patch) + " must divide image dims " +
                         std::to_string(H) + "x" + std::to_string(W));
    }
    const std::size_t gh = H / patch, gw = W / patch;
    const std::size_t n = gh * gw;
    const std::size_t flat = patch * patch * C;

    Tensor<T> out = Tensor<T>::zeros({n, flat});
    const T* px = image.data().data();
    T* po = out.data().data();
    for (std::size_t gy = 0; gy < gh; ++gy)
        for (std::size_t gx = 0; gx < gw; ++gx) {
            const std::size_t p = gy * gw + gx;
            for (std::size_t py = 0; py < patch; ++py)
                for (std::size_t pxi = 0; pxi < patch; ++pxi)
                    for (std::size_t c = 0; c < C; ++c) {
                        po[p * flat + (py * patch + pxi) * C + c] =
                            px[((gy * patch + py) * W + gx * patch + pxi) * C + c];
                    }
        }

    if (detail::recording<T>({&image})) {
        out.set_requires_grad(true);
        auto xn = image.node(), on = out.node();
        Tape<T>::active()->record([xn, on, H, W, C, patch, gh, gw, flat] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t gy = 0; gy < gh; ++gy)
                for (std::size_t gx = 0; gx < gw; ++gx) {
                    const std::size_t p = gy * gw + gx;
                    for (std::size_t py = 0; py < patch; ++py)
                        for (std::size_t pxi = 0; pxi < patch; ++pxi)
                            for (std::size_t c = 0; c < C; ++c) {
                                xn->grad[((gy * patch + py) * W + gx * patch + pxi) * C + c] +=
                                    on->grad[p * flat + (py * patch + pxi) * C + c];
                            }
                }
        });
    }
    return out;
}

// Projects patches by Wp [(P*P*C) x d], prepends the class token at row 0,
// and adds the positional embedding to all N+1 rows.
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& image, std::size_t patch, const Tensor<T>& wp,
                      const Tensor<T>& pos, const Tensor<T>& cls) {
    Tensor<T> patches = patchify(image, patch);
    const std::size_t n = patches.shape()[0];
    if (wp.ndim() != 2 || wp.shape()[0] != patches.shape()[1]) {
        throw ShapeError("patch projection expects [" + std::to_string(patches.shape()[1]) + " x d], got " +
                         shape_str(wp.shape()));
    }
    const std::size_t d = wp.shape()[1];
    if (cls.ndim() != 1 || cls.shape()[0] != d) throw ShapeError("class token must be [d]");
    if (pos.ndim() != 2 || pos.shape()[0] != n + 1 || pos.shape()[1] != d) {
        throw ShapeError("positional embedding must be [(N+1) x d] = [" + std::to_string(n + 1) + " x " +
                         std::to_string(d) + "], got " + shape_str(pos.shape()));
    }
    Tensor<T> tokens = matmul(patches, wp);
    Tensor<T> cls_row = reshape(cls, {1, d});
    Tensor<T> seq = concat_rows<T>({cls_row, tokens});
    return add(seq, pos);
}

// ---------------------------------------------------------------------------
// Residual wrapper
// ---------------------------------------------------------------------------

// f(x) + x. The sub-layer must preserve the shape.
template <typename T, typename F>
Tensor<T> residual(const Tensor<T>& x, F&& f) {
    Tensor<T> fx = f(x);
    if (fx.shape() != x.shape()) {
        throw ShapeError("residual sub-layer changed shape from " + shape_str(x.shape()) + " to " +
                         shape_str(fx.shape()));
    }
    return add(fx, x);
}

// ---------------------------------------------------------------------------
// Factorized convolution
// ---------------------------------------------------------------------------

// n x n convolution replaced by n x 1 followed by 1 x n. Padding is split as
// (pad, 0) for the column stage and (0, pad) for the row stage; with
// pad = n/2 the composition covers the same receptive field as a "same"
// n x n convolution. Stride is applied vertically in the first stage and
// horizontally in the second, matching an n x n convolution of that stride.
template <typename T>
Tensor<T> factorized_conv(const Tensor<T>& x, const Tensor<T>& u, const Tensor<T>& v,
                          std::size_t stride = 1, std::size_t padding = 0) {
    if (u.ndim() != 4 || u.shape()[1] != 1) throw ShapeError("factorized_conv u must be [n x 1 x Cin x Cmid]");
    if (v.ndim() != 4 || v.shape()[0] != 1) throw ShapeError("factorized_conv v must be [1 x n x Cmid x Cout]");
    if (u.shape()[3] != v.shape()[2]) {
        throw ShapeError("factorized_conv mid-channel mismatch: u gives " + std::to_string(u.shape()[3]) +
                         ", v expects " + std::to_string(v.shape()[2]));
    }
    Tensor<T> mid = conv2d(x, u, stride, 1, padding, 0);
    return conv2d(mid, v, 1, stride, 0, padding);
}

// ---------------------------------------------------------------------------
// Cross-entropy loss
// ---------------------------------------------------------------------------

// Mean over the batch of -log softmax(logits)[label], computed via
// log-sum-exp. Gradient: (softmax(logits) - onehot(label)) / B.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy expects logits [BxC], got " + shape_str(logits.shape()));
    const std::size_t B = logits.shape()[0], C = logits.shape()[1];
    if (labels.size() != B) {
        throw ContractError("cross_entropy got " + std::to_string(labels.size()) + " labels for batch " + std::to_string(B));
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= C) {
            throw ContractError("cross_entropy label " + std::to_string(l) + " out of range [0, " + std::to_string(C) + ")");
        }
    }

    const T* pl = logits.data().data();
    T total = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const T* row = pl + b * C;
        T m = row[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
        T se = 0;
        for (std::size_t c = 0; c < C; ++c) se += std::exp(row[c] - m);
        total += m + std::log(se) - row[static_cast<std::size_t>(labels[b])];
    }
    Tensor<T> loss = Tensor<T>::scalar(total / static_cast<T>(B));

    if (detail::recording<T>({&logits})) {
        loss.set_requires_grad(true);
        auto ln = logits.node(), on = loss.node();
        Tape<T>::active()->record([ln, on, labels, B, C] {
            if (on->grad.empty() || !ln->requires_grad) return;
            if (ln->grad.empty()) ln->grad.assign(ln->data.size(), T(0));
            const T g = on->grad[0] / static_cast<T>(B);
            for (std::size_t b = 0; b < B; ++b) {
                const T* row = ln->data.data() + b * C;
                T m = row[0];
                for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
                T se = 0;
                for (std::size_t c = 0; c < C; ++c) se += std::exp(row[c] - m);
                for (std::size_t c = 0; c < C; ++c) {
                    T p = std::exp(row[c] - m) / se;
                    if (c == static_cast<std::size_t>(labels[b])) p -= T(1);
                    ln->grad[b * C + c] += g * p;
                }
            }
        });
    }
    return loss;
}

}  // namespace xrv
