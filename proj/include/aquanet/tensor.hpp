#ifndef AQUANET_TENSOR_HPP_
#define AQUANET_TENSOR_HPP_

#include <Eigen/Dense>

#include <ostream>
#include <string>

#include "aquanet/errors.hpp"

namespace aquanet {

using Index = Eigen::Index;

struct Shape {
  Index channels = 0;
  Index height = 0;
  Index width = 0;

  Index area() const { return height * width; }
  Index size() const { return channels * height * width; }
  bool operator==(const Shape &) const = default;
};

inline std::string to_string(const Shape &s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

inline std::ostream &operator<<(std::ostream &os, const Shape &s) {
  return os << to_string(s);
}

template <typename Scalar>
using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/*
 * A C x H x W activation tensor. Storage is a C x (H*W) row-major matrix so
 * each channel plane is contiguous and pointwise convolutions are a single
 * matrix product.
 */
template <typename Scalar>
class FeatureMap {
 public:
  using Storage = RowMajorMatrix<Scalar>;
  using Plane = Eigen::Map<RowMajorMatrix<Scalar>>;
  using ConstPlane = Eigen::Map<const RowMajorMatrix<Scalar>>;

  FeatureMap() = default;

  FeatureMap(Index channels, Index height, Index width)
      : height_(height), width_(width),
        data_(Storage::Zero(channels, height * width)) {
    if (channels <= 0 || height <= 0 || width <= 0) {
      throw ShapeMismatch("feature map dimensions must be positive, got " +
                          to_string(Shape{channels, height, width}));
    }
  }

  explicit FeatureMap(const Shape &s) : FeatureMap(s.channels, s.height, s.width) {}

  FeatureMap(Index height, Index width, Storage data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.cols() != height * width) {
      throw ShapeMismatch("storage has " + std::to_string(data_.cols()) +
                          " columns, expected " + std::to_string(height * width));
    }
  }

  static FeatureMap constant(const Shape &s, Scalar value) {
    FeatureMap out(s);
    out.data_.setConstant(value);
    return out;
  }

  Index channels() const { return data_.rows(); }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index area() const { return height_ * width_; }
  Index size() const { return data_.size(); }
  Shape shape() const { return {channels(), height_, width_}; }
  bool empty() const { return data_.size() == 0; }

  Storage &matrix() { return data_; }
  const Storage &matrix() const { return data_; }

  Scalar *data() { return data_.data(); }
  const Scalar *data() const { return data_.data(); }

  Scalar &operator()(Index c, Index y, Index x) { return data_(c, y * width_ + x); }
  Scalar operator()(Index c, Index y, Index x) const { return data_(c, y * width_ + x); }

  Plane plane(Index c) { return Plane(data_.row(c).data(), height_, width_); }
  ConstPlane plane(Index c) const {
    return ConstPlane(data_.row(c).data(), height_, width_);
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  FeatureMap<Other> cast() const {
    return FeatureMap<Other>(height_, width_, data_.template cast<Other>());
  }

  bool operator==(const FeatureMap &o) const {
    return shape() == o.shape() && data_ == o.data_;
  }

 private:
  Index height_ = 0;
  Index width_ = 0;
  Storage data_;
};

/// Class-score map with logit semantics; same layout as a feature map.
template <typename Scalar>
using ProbabilityMap = FeatureMap<Scalar>;

inline void require_same_shape(const Shape &a, const Shape &b, const char *what) {
  if (!(a == b)) {
    throw ShapeMismatch(std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
  }
}

} // namespace aquanet

#endif // AQUANET_TENSOR_HPP_
