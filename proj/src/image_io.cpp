// Copyright 2026 The Realness Loop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rloop/image_io.hpp"

#include <jpeglib.h>
#include <png.h>
#include <zlib.h>

#include <cmath>
#include <csetjmp>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <vector>

#include "rloop/errors.hpp"
#include "rloop/kernels.hpp"

namespace rloop {
namespace {

std::vector<uint8_t> to_interleaved(const Tensor& image) {
  if (image.shape().size() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("expected [1|3, h, w] image, got " + shape_str(image.shape()));
  }
  const int64_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
  std::vector<uint8_t> bytes(static_cast<size_t>(c * hw));
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t i = 0; i < hw; ++i) {
      bytes[i * c + ch] = static_cast<uint8_t>(quantize8(image[ch * hw + i]) * 255.0f + 0.5f);
    }
  }
  return bytes;
}

Tensor from_interleaved(const uint8_t* bytes, int64_t c, int64_t h, int64_t w) {
  Tensor out({c, h, w});
  const int64_t hw = h * w;
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t i = 0; i < hw; ++i) out[ch * hw + i] = bytes[i * c + ch] / 255.0f;
  }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

}  // namespace

void write_png(const std::string& path, const Tensor& image) {
  std::vector<uint8_t> bytes = to_interleaved(image);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.dim(2));
  img.height = static_cast<png_uint_32>(image.dim(1));
  img.format = image.dim(0) == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IngestionError(path, "png write failed: " + msg);
  }
}

Tensor read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IngestionError(path, std::string("png read failed: ") + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int64_t c = gray ? 1 : 3;
  std::vector<uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IngestionError(path, "png decode failed: " + msg);
  }
  return from_interleaved(bytes.data(), c, img.height, img.width);
}

Tensor jpeg_round_trip(const Tensor& image, int quality) {
  if (quality < 1 || quality > 100) {
    throw ConfigError("jpeg quality must be in [1, 100], got " + std::to_string(quality));
  }
  std::vector<uint8_t> pixels = to_interleaved(image);
  const int c = static_cast<int>(image.dim(0));
  const int h = static_cast<int>(image.dim(1)), w = static_cast<int>(image.dim(2));

  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  {
    jpeg_compress_struct cinfo{};
    JpegError err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
      jpeg_destroy_compress(&cinfo);
      std::free(buffer);
      throw IngestionError("<memory>", "jpeg encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = w;
    cinfo.image_height = h;
    cinfo.input_components = c;
    cinfo.in_color_space = c == 3 ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    for (int i = 0; i < cinfo.num_components; ++i) {
      cinfo.comp_info[i].h_samp_factor = 1;
      cinfo.comp_info[i].v_samp_factor = 1;
    }
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
      JSAMPROW row = pixels.data() + static_cast<size_t>(cinfo.next_scanline) * w * c;
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
  }

  std::vector<uint8_t> decoded(pixels.size());
  {
    jpeg_decompress_struct dinfo{};
    JpegError err;
    dinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
      jpeg_destroy_decompress(&dinfo);
      std::free(buffer);
      throw IngestionError("<memory>", "jpeg decode failed");
    }
    jpeg_create_decompress(&dinfo);
    jpeg_mem_src(&dinfo, buffer, size);
    jpeg_read_header(&dinfo, TRUE);
    dinfo.out_color_space = c == 3 ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_start_decompress(&dinfo);
    while (dinfo.output_scanline < dinfo.output_height) {
      JSAMPROW row = decoded.data() + static_cast<size_t>(dinfo.output_scanline) * w * c;
      jpeg_read_scanlines(&dinfo, &row, 1);
    }
    jpeg_finish_decompress(&dinfo);
    jpeg_destroy_decompress(&dinfo);
  }
  std::free(buffer);
  return from_interleaved(decoded.data(), c, h, w);
}

uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path, "cannot open file");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                                     static_cast<uInt>(bytes.size())));
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("blur sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return {1.0};
  const int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps[i + radius] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

Tensor gaussian_blur_image(const Tensor& image, double sigma) {
  if (image.shape().size() != 3) throw ShapeError("blur expects [c, h, w]");
  const std::vector<double> taps = gaussian_kernel(sigma);
  if (taps.size() == 1) return image;
  Tensor out(image.shape());
  kernels::gaussian_blur(image.dim(0), image.dim(1), image.dim(2), image.data(), taps,
                         out.data());
  return out;
}

}  // namespace rloop
