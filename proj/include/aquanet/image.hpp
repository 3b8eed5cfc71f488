#ifndef AQUANET_IMAGE_HPP_
#define AQUANET_IMAGE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "aquanet/tensor.hpp"

namespace aquanet {

/// Single-channel 8-bit class-index mask, H x W.
using IndexMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit RGB image, interleaved HWC.
struct RgbImage {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(Index h, Index w) : height(h), width(w), pixels(static_cast<std::size_t>(h * w * 3), 0) {}

  std::uint8_t &at(Index y, Index x, int c) { return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  std::uint8_t at(Index y, Index x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  bool operator==(const RgbImage &) const = default;
};

using Palette = std::vector<std::array<std::uint8_t, 3>>;

// PNG: masks must be 8-bit grayscale or palette (indices are kept verbatim).
IndexMask read_index_mask(const std::filesystem::path &path);
void write_index_mask(const IndexMask &mask, const std::filesystem::path &path);
/// Palette-indexed PNG; ids beyond the palette render black.
void write_indexed_png(const IndexMask &mask, const Palette &palette, const std::filesystem::path &path);

/// PNG (any colour type, converted) or JPEG.
RgbImage read_rgb(const std::filesystem::path &path);
void write_rgb_png(const RgbImage &image, const std::filesystem::path &path);

/// Deterministic distinct colours for class ids; ignore ids render white.
Palette class_palette(int num_classes, int ignore_id);

/// Nearest-neighbour resize, source index floor(i * in / out).
IndexMask resize_nearest(const IndexMask &mask, Index height, Index width);

inline constexpr std::array<double, 3> kImageMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageStd = {0.229, 0.224, 0.225};

/// 3 x H x W, channel-normalised with kImageMean / kImageStd.
template <typename Scalar>
FeatureMap<Scalar> to_network_input(const RgbImage &img) {
  FeatureMap<Scalar> f(3, img.height, img.width);
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        f(c, y, x) = static_cast<Scalar>((img.at(y, x, c) / 255.0 - kImageMean[static_cast<std::size_t>(c)]) /
                                         kImageStd[static_cast<std::size_t>(c)]);
      }
  return f;
}

/// Per-pixel argmax over channels; ties resolve to the lowest channel.
template <typename Scalar>
IndexMask argmax_mask(const FeatureMap<Scalar> &scores) {
  IndexMask m(scores.height(), scores.width());
  for (Index p = 0; p < scores.area(); ++p) {
    Index best = 0;
    scores.matrix().col(p).maxCoeff(&best);
    m.data()[p] = static_cast<std::uint8_t>(best);
  }
  return m;
}

} // namespace aquanet

#endif // AQUANET_IMAGE_HPP_
