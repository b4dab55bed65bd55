#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "nutricast/core/error.hpp"
#include "nutricast/core/tensor.hpp"

namespace nutricast {

/// 8-bit interleaved RGB image.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  Image() = default;
  Image(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * 3; }

  friend bool operator==(const Image&, const Image&) = default;
};

inline void write_png(const Image& img, const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path + "': " + png.message);
  }
}

inline Image read_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read PNG '" + path + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img(png.width, png.height);
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("cannot decode PNG '" + path + "': " + png.message);
  }
  return img;
}

namespace detail {
struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}
}  // namespace detail

inline Image read_jpeg(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw IoError("cannot open JPEG '" + path + "'");
  jpeg_decompress_struct cinfo{};
  detail::JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = &detail::jpeg_error_exit;
  Image img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("cannot decode JPEG '" + path + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = Image(cinfo.output_width, cinfo.output_height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

/// Dispatches on the file signature (PNG or JPEG).
inline Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  unsigned char sig[4] = {};
  in.read(reinterpret_cast<char*>(sig), 4);
  if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') return read_png(path);
  if (sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path);
  throw IoError("'" + path + "' is neither PNG nor JPEG");
}

/// Per-channel standardization constants stored alongside the model.
struct PreprocessConfig {
  std::array<double, 3> mean{0.48145466, 0.4578275, 0.40821073};
  std::array<double, 3> stddev{0.26862954, 0.26130258, 0.27577711};

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

/// Bilinear resize (half-pixel centers) of an RGB image into [0, 1] floats,
/// returned as an H x W x 3 tensor.
template <typename T>
Tensor<T> resize_unit(const Image& img, std::size_t out_w, std::size_t out_h) {
  if (img.width == 0 || img.height == 0) throw ContractError("empty image");
  Tensor<T> out({out_h, out_w, 3});
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0)[c] * (1 - wx) + img.at(x1, y0)[c] * wx;
        const double bottom = img.at(x0, y1)[c] * (1 - wx) + img.at(x1, y1)[c] * wx;
        out[(y * out_w + x) * 3 + c] = static_cast<T>((top * (1 - wy) + bottom * wy) / 255.0);
      }
    }
  }
  return out;
}

/// Resize to `resolution` x `resolution`, scale to [0, 1], standardize.
template <typename T>
Tensor<T> preprocess(const Image& img, std::size_t resolution, const PreprocessConfig& cfg) {
  Tensor<T> t = resize_unit<T>(img, resolution, resolution);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::size_t c = i % 3;
    t[i] = static_cast<T>((t[i] - cfg.mean[c]) / cfg.stddev[c]);
  }
  return t;
}

/// Split an H x W x 3 grid into non-overlapping P x P patches in row-major
/// grid order. Each row of the result is one patch flattened as (y, x, c).
template <typename T>
Tensor<T> patchify(const Tensor<T>& grid, std::size_t patch) {
  if (grid.rank() != 3 || grid.shape()[2] != 3) throw ContractError("patchify expects an H x W x 3 grid");
  const std::size_t h = grid.shape()[0], w = grid.shape()[1];
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw ContractError("image " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by patch size " +
                        std::to_string(patch) + "; resize first");
  }
  const std::size_t gh = h / patch, gw = w / patch, len = patch * patch * 3;
  Tensor<T> out = Tensor<T>::matrix(gh * gw, len);
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      T* dst = out.data() + (py * gw + px) * len;
      for (std::size_t y = 0; y < patch; ++y) {
        const T* src = grid.data() + ((py * patch + y) * w + px * patch) * 3;
        std::copy_n(src, patch * 3, dst + y * patch * 3);
      }
    }
  return out;
}

}  // namespace nutricast
