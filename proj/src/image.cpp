#include "aquanet/image.hpp"

#include <png.h>

#include <cstdio>
#include <csetjmp>
#include <memory>
#include <string>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "aquanet/errors.hpp"

namespace aquanet {
namespace {

struct FileCloser {
  void operator()(std::FILE *f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path &path, const char *mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoFailure("cannot open " + path.string());
  return f;
}

bool has_png_signature(std::FILE *f) {
  unsigned char sig[8] = {};
  const std::size_t n = std::fread(sig, 1, 8, f);
  std::rewind(f);
  return n == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw IoFailure("libpng allocation failed");
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw IoFailure("libpng allocation failed");
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

// Rows of `bytes_per_row` each, decoded after any transforms set by `setup`.
template <typename Setup>
std::vector<std::uint8_t> decode_png(const std::filesystem::path &path, Setup setup, Index &h, Index &w,
                                     int &channels) {
  FilePtr f = open_file(path, "rb");
  if (!has_png_signature(f.get())) throw IoFailure(path.string() + " is not a PNG file");
  PngReader r;
  std::vector<std::uint8_t> buf;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) throw IoFailure("corrupt PNG " + path.string());
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  setup(r.png, r.info);
  png_read_update_info(r.png, r.info);
  h = png_get_image_height(r.png, r.info);
  w = png_get_image_width(r.png, r.info);
  channels = png_get_channels(r.png, r.info);
  const std::size_t stride = png_get_rowbytes(r.png, r.info);
  buf.resize(stride * static_cast<std::size_t>(h));
  rows.resize(static_cast<std::size_t>(h));
  for (Index y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + stride * static_cast<std::size_t>(y);
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return buf;
}

void encode_png(const std::filesystem::path &path, Index h, Index w, int color_type, const std::uint8_t *data,
                std::size_t stride, const Palette *palette) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr f = open_file(path, "wb");
  PngWriter wr;
  std::vector<png_color> pal;
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(h));
  if (setjmp(png_jmpbuf(wr.png))) throw IoFailure("failed writing PNG " + path.string());
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette) {
    for (const auto &c : *palette) pal.push_back({c[0], c[1], c[2]});
    png_set_PLTE(wr.png, wr.info, pal.data(), static_cast<int>(pal.size()));
  }
  png_write_info(wr.png, wr.info);
  for (Index y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = data + stride * static_cast<std::size_t>(y);
  png_write_image(wr.png, const_cast<png_bytepp>(rows.data()));
  png_write_end(wr.png, nullptr);
}

struct JpegErrorJump {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto *err = reinterpret_cast<JpegErrorJump *>(cinfo->err);
  std::longjmp(err->jump, 1);
}

RgbImage read_jpeg(std::FILE *f, const std::filesystem::path &path) {
  jpeg_decompress_struct cinfo{};
  JpegErrorJump err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  RgbImage img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoFailure("corrupt JPEG " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = RgbImage(cinfo.output_height, cinfo.output_width);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

} // namespace

IndexMask read_index_mask(const std::filesystem::path &path) {
  Index h = 0, w = 0;
  int channels = 0;
  int color = 0, depth = 0;
  auto buf = decode_png(
      path,
      [&](png_structp png, png_infop info) {
        color = png_get_color_type(png, info);
        depth = png_get_bit_depth(png, info);
        if (depth < 8) png_set_packing(png);
      },
      h, w, channels);
  if (channels != 1 || depth > 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE)) {
    throw IoFailure(path.string() + ": masks must be 8-bit grayscale or palette PNGs");
  }
  IndexMask m(h, w);
  std::copy(buf.begin(), buf.end(), m.data());
  return m;
}

void write_index_mask(const IndexMask &mask, const std::filesystem::path &path) {
  encode_png(path, mask.rows(), mask.cols(), PNG_COLOR_TYPE_GRAY, mask.data(), static_cast<std::size_t>(mask.cols()),
             nullptr);
}

void write_indexed_png(const IndexMask &mask, const Palette &palette, const std::filesystem::path &path) {
  Palette full = palette;
  full.resize(256, {0, 0, 0});
  encode_png(path, mask.rows(), mask.cols(), PNG_COLOR_TYPE_PALETTE, mask.data(),
             static_cast<std::size_t>(mask.cols()), &full);
}

RgbImage read_rgb(const std::filesystem::path &path) {
  {
    FilePtr f = open_file(path, "rb");
    if (!has_png_signature(f.get())) return read_jpeg(f.get(), path);
  }
  Index h = 0, w = 0;
  int channels = 0;
  auto buf = decode_png(
      path,
      [](png_structp png, png_infop info) {
        const int color = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
      },
      h, w, channels);
  if (channels != 3) throw IoFailure(path.string() + ": could not decode as RGB");
  RgbImage img(h, w);
  img.pixels = std::move(buf);
  return img;
}

void write_rgb_png(const RgbImage &image, const std::filesystem::path &path) {
  encode_png(path, image.height, image.width, PNG_COLOR_TYPE_RGB, image.pixels.data(),
             static_cast<std::size_t>(image.width) * 3, nullptr);
}

Palette class_palette(int num_classes, int ignore_id) {
  Palette p(256, {0, 0, 0});
  // Bit-interleaved colour map, as used by common segmentation toolkits.
  for (int id = 0; id < num_classes && id < 256; ++id) {
    int r = 0, g = 0, b = 0, c = id + 1;
    for (int shift = 7; c; --shift, c >>= 3) {
      r |= ((c >> 0) & 1) << shift;
      g |= ((c >> 1) & 1) << shift;
      b |= ((c >> 2) & 1) << shift;
    }
    p[static_cast<std::size_t>(id)] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                       static_cast<std::uint8_t>(b)};
  }
  if (ignore_id >= 0 && ignore_id < 256) p[static_cast<std::size_t>(ignore_id)] = {255, 255, 255};
  return p;
}

IndexMask resize_nearest(const IndexMask &mask, Index height, Index width) {
  if (height <= 0 || width <= 0 || mask.size() == 0) throw ShapeMismatch("resize_nearest: empty size");
  IndexMask out(height, width);
  for (Index y = 0; y < height; ++y) {
    const Index sy = y * mask.rows() / height;
    for (Index x = 0; x < width; ++x) out(y, x) = mask(sy, x * mask.cols() / width);
  }
  return out;
}

} // namespace aquanet
