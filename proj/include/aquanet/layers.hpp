#ifndef AQUANET_LAYERS_HPP_
#define AQUANET_LAYERS_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aquanet/ops.hpp"
#include "aquanet/seed.hpp"

namespace aquanet {

/// A learnable tensor together with its gradient and optimizer state.
template <typename Scalar>
struct Param {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  Matrix<Scalar> velocity;

  Param() = default;
  Param(std::string n, Index rows, Index cols)
      : name(std::move(n)), value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)), velocity(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar> *>;

template <typename Scalar>
std::size_t parameter_count(const ParamList<Scalar> &params) {
  std::size_t n = 0;
  for (const auto *p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

/*
 * Square-kernel 2-D convolution with bias. The weight is stored as
 * out x (in * k * k), matching the row order produced by im2col.
 */
template <typename Scalar>
class Conv2d {
 public:
  struct Cache {
    Shape input_shape;
    RowMajorMatrix<Scalar> columns;
  };

  Conv2d() = default;
  Conv2d(const std::string &name, Index in_channels, Index out_channels, ConvGeometry geometry = {})
      : in_channels_(in_channels), out_channels_(out_channels), geometry_(geometry),
        weight_(name + ".weight", out_channels, in_channels * geometry.kernel * geometry.kernel),
        bias_(name + ".bias", out_channels, 1) {}

  Index in_channels() const { return in_channels_; }
  Index out_channels() const { return out_channels_; }
  const ConvGeometry &geometry() const { return geometry_; }
  Index fan_in() const { return weight_.value.cols(); }

  Param<Scalar> &weight() { return weight_; }
  Param<Scalar> &bias() { return bias_; }
  const Param<Scalar> &weight() const { return weight_; }
  const Param<Scalar> &bias() const { return bias_; }

  /// He-normal weights, zero bias.
  void init_fan_in(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in())));
    weight_.value = weight_.value.unaryExpr([&](Scalar) { return static_cast<Scalar>(normal(rng)); });
    bias_.value.setZero();
  }

  /// He-normal weights where each output row draws from its own seed.
  void init_rows_fan_in(std::span<const std::uint64_t> row_seeds) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in()));
    for (Index r = 0; r < out_channels_; ++r) {
      std::mt19937_64 rng(row_seeds[static_cast<std::size_t>(r)]);
      std::normal_distribution<double> normal(0.0, stddev);
      for (Index c = 0; c < weight_.value.cols(); ++c) {
        weight_.value(r, c) = static_cast<Scalar>(normal(rng));
      }
    }
    bias_.value.setZero();
  }

  void init_zero() {
    weight_.value.setZero();
    bias_.value.setZero();
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar> &x, Cache *cache = nullptr) const {
    if (x.channels() != in_channels_) {
      throw ShapeMismatch(weight_.name + " expects " + std::to_string(in_channels_) +
                          " input channels, got " + std::to_string(x.channels()));
    }
    const Index ho = geometry_.output_extent(x.height());
    const Index wo = geometry_.output_extent(x.width());
    FeatureMap<Scalar> y(out_channels_, ho, wo);
    if (geometry_.is_pointwise()) {
      y.matrix().noalias() = weight_.value * x.matrix();
      if (cache) cache->columns = x.matrix();
    } else {
      RowMajorMatrix<Scalar> cols = im2col(x, geometry_);
      y.matrix().noalias() = weight_.value * cols;
      if (cache) cache->columns = std::move(cols);
    }
    y.matrix().colwise() += bias_.value.col(0);
    if (cache) cache->input_shape = x.shape();
    return y;
  }

  /// Accumulates parameter gradients and returns the input gradient.
  FeatureMap<Scalar> backward(const Cache &cache, const FeatureMap<Scalar> &grad_out) {
    weight_.grad.noalias() += grad_out.matrix() * cache.columns.transpose();
    bias_.grad.col(0) += grad_out.matrix().rowwise().sum();
    RowMajorMatrix<Scalar> grad_cols = weight_.value.transpose() * grad_out.matrix();
    if (geometry_.is_pointwise()) {
      return FeatureMap<Scalar>(cache.input_shape.height, cache.input_shape.width,
                                std::move(grad_cols));
    }
    return col2im(grad_cols, cache.input_shape, geometry_);
  }

  void collect_parameters(ParamList<Scalar> &out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Index in_channels_ = 0;
  Index out_channels_ = 0;
  ConvGeometry geometry_;
  Param<Scalar> weight_;
  Param<Scalar> bias_;
};

/// Conv followed by a (leaky) rectifier; slope 0 gives a plain ReLU.
template <typename Scalar>
class ConvAct {
 public:
  struct Cache {
    typename Conv2d<Scalar>::Cache conv;
    FeatureMap<Scalar> pre_activation;
  };

  ConvAct() = default;
  ConvAct(const std::string &name, Index in, Index out, ConvGeometry g, Scalar slope = Scalar(0))
      : conv_(name, in, out, g), slope_(slope) {}

  Conv2d<Scalar> &conv() { return conv_; }
  const Conv2d<Scalar> &conv() const { return conv_; }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar> &x, Cache *cache = nullptr) const {
    FeatureMap<Scalar> a = conv_.forward(x, cache ? &cache->conv : nullptr);
    FeatureMap<Scalar> y = leaky_relu(a, slope_);
    if (cache) cache->pre_activation = std::move(a);
    return y;
  }

  FeatureMap<Scalar> backward(const Cache &cache, const FeatureMap<Scalar> &grad_out) {
    return conv_.backward(cache.conv, leaky_relu_backward(grad_out, cache.pre_activation, slope_));
  }

  void collect_parameters(ParamList<Scalar> &out) { conv_.collect_parameters(out); }

 private:
  Conv2d<Scalar> conv_;
  Scalar slope_ = Scalar(0);
};

} // namespace aquanet

#endif // AQUANET_LAYERS_HPP_
