#pragma once

// Image decode/encode and resampling. Decoders always produce H x W x 3
// float tensors with values in [0, 1]; grayscale and paletted sources come
// out replicated to three channels. PNG and JPEG go through libpng/libjpeg;
// BMP (uncompressed 8/24/32-bit) is decoded directly. Augmented images are
// persisted as PNG, which is lossless for the 8-bit quantization used here.

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "xrv/tensor.hpp"

namespace xrv {

namespace detail {

inline Tensor<float> rgb8_to_tensor(const std::vector<unsigned char>& rgb, std::size_t h, std::size_t w) {
    std::vector<float> pix(h * w * 3);
    for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = static_cast<float>(rgb[i]) / 255.0f;
    return Tensor<float>::from_data({h, w, 3}, std::move(pix));
}

inline Tensor<float> decode_png_bytes(const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw IoError("png decode failed for " + path + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw IoError("png decode failed for " + path + ": " + msg);
    }
    return rgb8_to_tensor(buffer, image.height, image.width);
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf env;
};

inline void jpeg_error_exit_hook(j_common_ptr cinfo) {
    std::longjmp(reinterpret_cast<JpegErrorMgr*>(cinfo->err)->env, 1);
}

inline Tensor<float> decode_jpeg_file(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open " + path);

    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit_hook;
    if (setjmp(jerr.env)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(fp);
        throw IoError("jpeg decode failed for " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const std::size_t w = cinfo.output_width, h = cinfo.output_height;
    std::vector<unsigned char> rgb(h * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    return rgb8_to_tensor(rgb, h, w);
}

inline std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

inline Tensor<float> decode_bmp_bytes(const std::vector<unsigned char>& b, const std::string& path) {
    if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') throw IoError("not a BMP file: " + path);
    const std::uint32_t data_offset = le32(&b[10]);
    const std::uint32_t dib_size = le32(&b[14]);
    if (dib_size < 40) throw IoError("unsupported BMP header in " + path);
    const std::int32_t width = static_cast<std::int32_t>(le32(&b[18]));
    const std::int32_t height_raw = static_cast<std::int32_t>(le32(&b[22]));
    const std::uint16_t bpp = le16(&b[28]);
    const std::uint32_t compression = le32(&b[30]);
    if (width <= 0 || height_raw == 0) throw IoError("bad BMP dimensions in " + path);
    if (compression != 0 || (bpp != 8 && bpp != 24 && bpp != 32)) {
        throw IoError("unsupported BMP encoding in " + path + " (need uncompressed 8/24/32-bit)");
    }
    const bool bottom_up = height_raw > 0;
    const std::size_t w = static_cast<std::size_t>(width);
    const std::size_t h = static_cast<std::size_t>(bottom_up ? height_raw : -height_raw);
    const std::size_t row_stride = ((w * bpp / 8) + 3) & ~std::size_t{3};

    // 8-bit BMPs carry a palette right after the DIB header.
    const unsigned char* palette = bpp == 8 ? &b[14 + dib_size] : nullptr;
    if (bpp == 8 && 14 + dib_size + 256 * 4 > b.size()) throw IoError("BMP palette truncated in " + path);
    if (data_offset + row_stride * h > b.size()) throw IoError("BMP pixel data truncated in " + path);

    std::vector<unsigned char> rgb(h * w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t src_y = bottom_up ? h - 1 - y : y;
        const unsigned char* row = &b[data_offset + src_y * row_stride];
        for (std::size_t x = 0; x < w; ++x) {
            unsigned char r, g, bl;
            if (bpp == 8) {
                const unsigned char* entry = palette + static_cast<std::size_t>(row[x]) * 4;
                bl = entry[0]; g = entry[1]; r = entry[2];
            } else {
                const unsigned char* px = row + x * (bpp / 8);
                bl = px[0]; g = px[1]; r = px[2];
            }
            rgb[(y * w + x) * 3 + 0] = r;
            rgb[(y * w + x) * 3 + 1] = g;
            rgb[(y * w + x) * 3 + 2] = bl;
        }
    }
    return rgb8_to_tensor(rgb, h, w);
}

}  // namespace detail

// Decodes PNG/JPEG/BMP by sniffing the file magic, so misnamed extensions
// still load.
inline Tensor<float> decode_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4) throw IoError("file too short to be an image: " + path);

    if (bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
        return detail::decode_png_bytes(path);
    }
    if (bytes[0] == 0xff && bytes[1] == 0xd8) {
        return detail::decode_jpeg_file(path);
    }
    if (bytes[0] == 'B' && bytes[1] == 'M') {
        return detail::decode_bmp_bytes(bytes, path);
    }
    throw IoError("unrecognized image format: " + path);
}

// Writes an H x W x 3 tensor in [0, 1] as an 8-bit RGB PNG. Quantization is
// round(v * 255), so values produced by decode round-trip exactly.
inline void encode_png(const Tensor<float>& image, const std::string& path) {
    if (image.ndim() != 3 || image.shape()[2] != 3) {
        throw ShapeError("encode_png expects [HxWx3], got " + shape_str(image.shape()));
    }
    const std::size_t h = image.shape()[0], w = image.shape()[1];
    std::vector<unsigned char> rgb(h * w * 3);
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        const float v = std::clamp(image.data()[i], 0.0f, 1.0f);
        rgb[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    png_image out;
    std::memset(&out, 0, sizeof(out));
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(w);
    out.height = static_cast<png_uint_32>(h);
    out.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&out, path.c_str(), 0, rgb.data(), 0, nullptr)) {
        throw IoError("png encode failed for " + path + ": " + out.message);
    }
}

// Bilinear resize with pixel-center alignment. Equal dimensions return the
// input unchanged, so identity resizes are bit-exact.
inline Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t out_h, std::size_t out_w) {
    if (image.ndim() != 3) throw ShapeError("resize_bilinear expects [HxWxC], got " + shape_str(image.shape()));
    if (out_h == 0 || out_w == 0) throw ShapeError("resize target must be positive");
    const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
    if (out_h == h && out_w == w) return image.clone();

    Tensor<float> out = Tensor<float>::zeros({out_h, out_w, c});
    const float* src = image.data().data();
    float* dst = out.data().data();
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v00 = src[(y0 * w + x0) * c + ch];
                const double v01 = src[(y0 * w + x1) * c + ch];
                const double v10 = src[(y1 * w + x0) * c + ch];
                const double v11 = src[(y1 * w + x1) * c + ch];
                const double top = v00 + (v01 - v00) * wx;
                const double bot = v10 + (v11 - v10) * wx;
                dst[(y * out_w + x) * c + ch] = static_cast<float>(top + (bot - top) * wy);
            }
        }
    }
    return out;
}

}  // namespace xrv
