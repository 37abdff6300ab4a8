#pragma once

// Deterministic image augmentation. Each augmented variant applies exactly
// one transform with parameters drawn from a seeded stream; the full plan
// yields 8 variants per image, the reduced plan 4. Sub-seeds are derived
// from (master seed, image index, transform index), so the output set is
// independent of evaluation order.
//
// Geometric transforms sample the source through the inverse map with
// bilinear interpolation and zero fill, and always preserve the image
// dimensions. All outputs stay within [0, 1].

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xrv/dataset.hpp"
#include "xrv/rng.hpp"
#include "xrv/tensor.hpp"

namespace xrv {

namespace detail {

// Bilinear fetch at real-valued coordinates; out-of-bounds reads as fill.
inline double sample_bilinear(const Tensor<float>& img, double y, double x, std::size_t c, double fill) {
    const std::size_t H = img.shape()[0], W = img.shape()[1], C = img.shape()[2];
    const double y0f = std::floor(y), x0f = std::floor(x);
    const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(y0f);
    const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(x0f);
    const double wy = y - y0f, wx = x - x0f;

    auto fetch = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
        if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(H) || xx >= static_cast<std::ptrdiff_t>(W)) return fill;
        return img.data()[(static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)) * C + c];
    };
    const double top = fetch(y0, x0) * (1.0 - wx) + fetch(y0, x0 + 1) * wx;
    const double bot = fetch(y0 + 1, x0) * (1.0 - wx) + fetch(y0 + 1, x0 + 1) * wx;
    return top * (1.0 - wy) + bot * wy;
}

// Applies dst -> src coordinate mapping (an inverse warp) over the whole image.
template <typename MapFn>
Tensor<float> inverse_warp(const Tensor<float>& img, MapFn&& map, double fill) {
    const std::size_t H = img.shape()[0], W = img.shape()[1], C = img.shape()[2];
    Tensor<float> out = Tensor<float>::zeros({H, W, C});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const auto [sy, sx] = map(static_cast<double>(y), static_cast<double>(x));
            for (std::size_t c = 0; c < C; ++c) {
                out.data()[(y * W + x) * C + c] = static_cast<float>(sample_bilinear(img, sy, sx, c, fill));
            }
        }
    return out;
}

inline void require_image(const Tensor<float>& img, const char* op) {
    if (img.ndim() != 3) throw ShapeError(std::string(op) + " expects [HxWxC], got " + shape_str(img.shape()));
}

}  // namespace detail

// Rotation about the image center.
inline Tensor<float> rotate(const Tensor<float>& img, double degrees, double fill = 0.0) {
    detail::require_image(img, "rotate");
    if (!std::isfinite(degrees)) throw ContractError("rotate angle must be finite");
    const double cy = (static_cast<double>(img.shape()[0]) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.shape()[1]) - 1.0) / 2.0;
    const double rad = degrees * 3.141592653589793 / 180.0;
    const double cr = std::cos(rad), sr = std::sin(rad);
    return detail::inverse_warp(img, [&](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        return std::pair{cy + cr * dy - sr * dx, cx + sr * dy + cr * dx};
    }, fill);
}

// Scales image content about the center; the canvas keeps its size, so
// factor < 1 shrinks into a zero border and factor > 1 crops the overflow.
inline Tensor<float> scale(const Tensor<float>& img, double factor) {
    detail::require_image(img, "scale");
    if (!(factor > 0.0)) throw ContractError("scale factor must be positive");
    const double cy = (static_cast<double>(img.shape()[0]) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.shape()[1]) - 1.0) / 2.0;
    return detail::inverse_warp(img, [&](double y, double x) {
        return std::pair{cy + (y - cy) / factor, cx + (x - cx) / factor};
    }, 0.0);
}

// Crops the given region and resizes it back to the original dimensions.
inline Tensor<float> crop(const Tensor<float>& img, std::size_t y0, std::size_t x0, std::size_t ch, std::size_t cw) {
    detail::require_image(img, "crop");
    const std::size_t H = img.shape()[0], W = img.shape()[1], C = img.shape()[2];
    if (ch == 0 || cw == 0) throw ContractError("crop region must be non-empty");
    if (y0 + ch > H || x0 + cw > W) throw ContractError("crop region exceeds image bounds");
    if (y0 == 0 && x0 == 0 && ch == H && cw == W) return img.clone();

    Tensor<float> region = Tensor<float>::zeros({ch, cw, C});
    for (std::size_t y = 0; y < ch; ++y)
        for (std::size_t x = 0; x < cw; ++x)
            for (std::size_t c = 0; c < C; ++c) {
                region.data()[(y * cw + x) * C + c] = img.data()[((y0 + y) * W + x0 + x) * C + c];
            }
    return resize_bilinear(region, H, W);
}

// Integer pixel shift; vacated pixels are zero-filled. dx moves content
// right, dy moves it down.
inline Tensor<float> translate(const Tensor<float>& img, int dx, int dy) {
    detail::require_image(img, "translate");
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(img.shape()[0]);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(img.shape()[1]);
    const std::size_t C = img.shape()[2];
    if (std::abs(dx) >= W || std::abs(dy) >= H) throw ContractError("translation exceeds image dimensions");

    Tensor<float> out = Tensor<float>::zeros(img.shape());
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        const std::ptrdiff_t sy = y - dy;
        if (sy < 0 || sy >= H) continue;
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            const std::ptrdiff_t sx = x - dx;
            if (sx < 0 || sx >= W) continue;
            for (std::size_t c = 0; c < C; ++c) {
                out.data()[(static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x)) * C + c] =
                    img.data()[(static_cast<std::size_t>(sy) * static_cast<std::size_t>(W) + static_cast<std::size_t>(sx)) * C + c];
            }
        }
    }
    return out;
}

enum class FlipAxis { horizontal, vertical };

// Exact index reversal; applying the same flip twice is the identity.
inline Tensor<float> flip(const Tensor<float>& img, FlipAxis axis) {
    detail::require_image(img, "flip");
    const std::size_t H = img.shape()[0], W = img.shape()[1], C = img.shape()[2];
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t sy = axis == FlipAxis::vertical ? H - 1 - y : y;
            const std::size_t sx = axis == FlipAxis::horizontal ? W - 1 - x : x;
            for (std::size_t c = 0; c < C; ++c) {
                out.data()[(y * W + x) * C + c] = img.data()[(sy * W + sx) * C + c];
            }
        }
    return out;
}

// Adds i.i.d. gaussian noise per pixel, then clamps to [0, 1].
inline Tensor<float> gaussian_noise(const Tensor<float>& img, double sigma, std::uint64_t seed) {
    detail::require_image(img, "gaussian_noise");
    if (sigma < 0.0) throw ContractError("noise sigma must be non-negative");
    if (sigma == 0.0) return img.clone();
    Tensor<float> out = img.clone();
    Rng rng(seed);
    for (float& v : out.data()) {
        v = static_cast<float>(std::clamp(static_cast<double>(v) + rng.normal(0.0, sigma), 0.0, 1.0));
    }
    return out;
}

// Random affine shear with both coefficients uniform in +-magnitude.
inline Tensor<float> distort(const Tensor<float>& img, double magnitude, std::uint64_t seed) {
    detail::require_image(img, "distort");
    if (magnitude < 0.0) throw ContractError("distortion magnitude must be non-negative");
    Rng rng(seed);
    const double kx = rng.uniform(-magnitude, magnitude);
    const double ky = rng.uniform(-magnitude, magnitude);
    const double cy = (static_cast<double>(img.shape()[0]) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.shape()[1]) - 1.0) / 2.0;
    return detail::inverse_warp(img, [&](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        return std::pair{cy + dy + ky * dx, cx + dx + kx * dy};
    }, 0.0);
}

// ---------------------------------------------------------------------------
// Augmentation plans
// ---------------------------------------------------------------------------

enum class TransformKind { scale, crop, translate, rotate, distort, hflip, vflip, noise };

inline std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::scale: return "scale";
        case TransformKind::crop: return "crop";
        case TransformKind::translate: return "translate";
        case TransformKind::rotate: return "rotate";
        case TransformKind::distort: return "distort";
        case TransformKind::hflip: return "hflip";
        case TransformKind::vflip: return "vflip";
        case TransformKind::noise: return "noise";
    }
    return "?";
}

struct AugmentRanges {
    double rotate_degrees = 25.0;    // +- range
    double scale_lo = 0.8, scale_hi = 1.2;
    double crop_area_lo = 0.8, crop_area_hi = 1.0;
    double translate_frac = 0.10;    // +- fraction of each dimension
    double noise_sigma = 0.03;
    double distort_magnitude = 0.15;  // +- shear coefficient

    void validate() const {
        for (double v : {rotate_degrees, scale_lo, scale_hi, crop_area_lo, crop_area_hi, translate_frac,
                         noise_sigma, distort_magnitude}) {
            if (!std::isfinite(v)) throw ConfigError("augment parameter ranges must be finite");
        }
        if (scale_lo <= 0 || scale_hi < scale_lo) throw ConfigError("invalid scale range");
        if (crop_area_lo <= 0 || crop_area_lo > 1.0 || crop_area_hi < crop_area_lo || crop_area_hi > 1.0) {
            throw ConfigError("crop area range must lie in (0, 1]");
        }
        if (translate_frac < 0 || translate_frac >= 1.0) throw ConfigError("translate fraction must lie in [0, 1)");
        if (noise_sigma < 0) throw ConfigError("noise sigma must be non-negative");
        if (distort_magnitude < 0) throw ConfigError("distortion magnitude must be non-negative");
    }
};

enum class AugmentMode { full, reduced };

inline AugmentMode augment_mode_from_string(const std::string& s) {
    if (s == "full") return AugmentMode::full;
    if (s == "reduced") return AugmentMode::reduced;
    throw ConfigError("unknown augment mode: " + s + " (expected full|reduced)");
}

struct AugmentPlan {
    AugmentMode mode = AugmentMode::full;
    AugmentRanges ranges;
    std::uint64_t seed = 0;

    // The ordered transform list: 8 for the full plan, 4 for the reduced one.
    std::vector<TransformKind> transforms() const {
        if (mode == AugmentMode::full) {
            return {TransformKind::scale,   TransformKind::crop,  TransformKind::translate,
                    TransformKind::rotate,  TransformKind::distort, TransformKind::hflip,
                    TransformKind::vflip,   TransformKind::noise};
        }
        return {TransformKind::rotate, TransformKind::scale, TransformKind::crop, TransformKind::hflip};
    }

    std::size_t multiplicity() const { return mode == AugmentMode::full ? 8 : 4; }
};

// One transform with seeded-random parameters.
inline Tensor<float> apply_transform(const Tensor<float>& img, TransformKind kind, const AugmentRanges& r,
                                     std::uint64_t seed) {
    Rng rng(seed);
    switch (kind) {
        case TransformKind::scale:
            return scale(img, rng.uniform(r.scale_lo, r.scale_hi));
        case TransformKind::crop: {
            const std::size_t H = img.shape()[0], W = img.shape()[1];
            const double side = std::sqrt(rng.uniform(r.crop_area_lo, r.crop_area_hi));
            const std::size_t ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(side * static_cast<double>(H))));
            const std::size_t cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(side * static_cast<double>(W))));
            const std::size_t y0 = ch < H ? static_cast<std::size_t>(rng.next_below(H - ch + 1)) : 0;
            const std::size_t x0 = cw < W ? static_cast<std::size_t>(rng.next_below(W - cw + 1)) : 0;
            return crop(img, y0, x0, std::min(ch, H), std::min(cw, W));
        }
        case TransformKind::translate: {
            const double H = static_cast<double>(img.shape()[0]);
            const double W = static_cast<double>(img.shape()[1]);
            const int dx = static_cast<int>(std::lround(rng.uniform(-r.translate_frac, r.translate_frac) * W));
            const int dy = static_cast<int>(std::lround(rng.uniform(-r.translate_frac, r.translate_frac) * H));
            return translate(img, dx, dy);
        }
        case TransformKind::rotate:
            return rotate(img, rng.uniform(-r.rotate_degrees, r.rotate_degrees));
        case TransformKind::distort:
            return distort(img, r.distort_magnitude, seed);
        case TransformKind::hflip:
            return flip(img, FlipAxis::horizontal);
        case TransformKind::vflip:
            return flip(img, FlipAxis::vertical);
        case TransformKind::noise:
            return gaussian_noise(img, r.noise_sigma, seed);
    }
    throw ContractError("unreachable transform kind");
}

// The multiplicity variants of one image. The sub-seed for variant t of
// image i is mix(mix(master, i), t), so results do not depend on evaluation
// order and a streaming caller produces exactly what augment_dataset would.
inline std::vector<Tensor<float>> augment_variants(const Tensor<float>& img, const AugmentPlan& plan,
                                                   std::size_t image_index) {
    plan.ranges.validate();
    const auto kinds = plan.transforms();
    std::vector<Tensor<float>> out;
    out.reserve(kinds.size());
    for (std::size_t t = 0; t < kinds.size(); ++t) {
        out.push_back(apply_transform(img, kinds[t], plan.ranges, mix_seed(mix_seed(plan.seed, image_index), t)));
    }
    return out;
}

// Expands a dataset to original + multiplicity variants per image, labels
// copied. Output order is (original 0, its variants, original 1, ...), a
// pure function of (dataset, plan).
inline Dataset augment_dataset(const Dataset& ds, const AugmentPlan& plan) {
    plan.ranges.validate();
    Dataset out;
    out.class_names = ds.class_names;
    out.images.reserve(ds.images.size() * (1 + plan.multiplicity()));
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const LabeledImage& src = ds.images[i];
        out.images.push_back(src);
        std::vector<Tensor<float>> variants = augment_variants(src.pixels, plan, i);
        for (std::size_t t = 0; t < variants.size(); ++t) {
            LabeledImage aug;
            aug.pixels = std::move(variants[t]);
            aug.label = src.label;
            aug.source = detail::augmented_name(src.source, t + 1);
            out.images.push_back(std::move(aug));
        }
    }
    return out;
}

}  // namespace xrv
