#ifndef AQUANET_OPS_HPP_
#define AQUANET_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "aquanet/tensor.hpp"

namespace aquanet {

/// Geometry of a square-kernel convolution with "same"-style padding.
struct ConvGeometry {
  Index kernel = 1;
  Index stride = 1;
  Index dilation = 1;

  Index padding() const { return dilation * (kernel - 1) / 2; }
  Index output_extent(Index in) const {
    return (in + 2 * padding() - dilation * (kernel - 1) - 1) / stride + 1;
  }
  bool is_pointwise() const { return kernel == 1 && stride == 1; }
};

/// Unfolds receptive fields into columns: (C*k*k) x (Ho*Wo).
template <typename Scalar>
RowMajorMatrix<Scalar> im2col(const FeatureMap<Scalar> &x, const ConvGeometry &g) {
  const Index k = g.kernel, pad = g.padding();
  const Index ho = g.output_extent(x.height()), wo = g.output_extent(x.width());
  RowMajorMatrix<Scalar> cols = RowMajorMatrix<Scalar>::Zero(x.channels() * k * k, ho * wo);
  for (Index c = 0; c < x.channels(); ++c) {
    auto in = x.plane(c);
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        Scalar *row = cols.row((c * k + ki) * k + kj).data();
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * g.stride - pad + ki * g.dilation;
          if (iy < 0 || iy >= x.height()) continue;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox * g.stride - pad + kj * g.dilation;
            if (ix >= 0 && ix < x.width()) row[oy * wo + ox] = in(iy, ix);
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds column gradients back onto the input grid.
template <typename Scalar>
FeatureMap<Scalar> col2im(const RowMajorMatrix<Scalar> &cols, const Shape &in_shape,
                          const ConvGeometry &g) {
  const Index k = g.kernel, pad = g.padding();
  const Index ho = g.output_extent(in_shape.height), wo = g.output_extent(in_shape.width);
  FeatureMap<Scalar> x(in_shape);
  for (Index c = 0; c < in_shape.channels; ++c) {
    auto out = x.plane(c);
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const Scalar *row = cols.row((c * k + ki) * k + kj).data();
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * g.stride - pad + ki * g.dilation;
          if (iy < 0 || iy >= in_shape.height) continue;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox * g.stride - pad + kj * g.dilation;
            if (ix >= 0 && ix < in_shape.width) out(iy, ix) += row[oy * wo + ox];
          }
        }
      }
    }
  }
  return x;
}

/// 2x average pooling, ceil mode: edge windows average only in-bounds pixels.
template <typename Scalar>
FeatureMap<Scalar> avg_pool2(const FeatureMap<Scalar> &x) {
  const Index h = x.height(), w = x.width();
  const Index ho = (h + 1) / 2, wo = (w + 1) / 2;
  FeatureMap<Scalar> y(x.channels(), ho, wo);
  for (Index c = 0; c < x.channels(); ++c) {
    auto in = x.plane(c);
    auto out = y.plane(c);
    for (Index oy = 0; oy < ho; ++oy) {
      const Index y0 = 2 * oy, y1 = std::min(y0 + 2, h);
      for (Index ox = 0; ox < wo; ++ox) {
        const Index x0 = 2 * ox, x1 = std::min(x0 + 2, w);
        out(oy, ox) = in.block(y0, x0, y1 - y0, x1 - x0).sum() /
                      static_cast<Scalar>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return y;
}

template <typename Scalar>
FeatureMap<Scalar> avg_pool2_backward(const FeatureMap<Scalar> &grad_out, const Shape &in_shape) {
  FeatureMap<Scalar> g(in_shape);
  const Index h = in_shape.height, w = in_shape.width;
  for (Index c = 0; c < in_shape.channels; ++c) {
    auto go = grad_out.plane(c);
    auto gi = g.plane(c);
    for (Index oy = 0; oy < grad_out.height(); ++oy) {
      const Index y0 = 2 * oy, y1 = std::min(y0 + 2, h);
      for (Index ox = 0; ox < grad_out.width(); ++ox) {
        const Index x0 = 2 * ox, x1 = std::min(x0 + 2, w);
        gi.block(y0, x0, y1 - y0, x1 - x0).array() +=
            go(oy, ox) / static_cast<Scalar>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return g;
}

/*
 * 1-D linear interpolation weights (half-pixel centres, edge clamped) as a
 * dense out x in matrix. Resizing a plane is then R_y * X * R_x^T, and the
 * adjoint is R_y^T * G * R_x.
 */
template <typename Scalar>
Matrix<Scalar> linear_resize_matrix(Index out, Index in) {
  Matrix<Scalar> r = Matrix<Scalar>::Zero(out, in);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::max(src, 0.0);
    Index i0 = std::min(static_cast<Index>(std::floor(src)), in - 1);
    const Index i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    r(i, i0) += static_cast<Scalar>(1.0 - frac);
    r(i, i1) += static_cast<Scalar>(frac);
  }
  return r;
}

template <typename Scalar>
FeatureMap<Scalar> resize_bilinear(const FeatureMap<Scalar> &x, Index height, Index width) {
  if (x.height() == height && x.width() == width) return x;
  const Matrix<Scalar> ry = linear_resize_matrix<Scalar>(height, x.height());
  const Matrix<Scalar> rx = linear_resize_matrix<Scalar>(width, x.width());
  FeatureMap<Scalar> y(x.channels(), height, width);
  for (Index c = 0; c < x.channels(); ++c) {
    y.plane(c).noalias() = ry * x.plane(c) * rx.transpose();
  }
  return y;
}

template <typename Scalar>
FeatureMap<Scalar> resize_bilinear_backward(const FeatureMap<Scalar> &grad_out,
                                            const Shape &in_shape) {
  if (grad_out.height() == in_shape.height && grad_out.width() == in_shape.width) {
    return grad_out;
  }
  const Matrix<Scalar> ry = linear_resize_matrix<Scalar>(grad_out.height(), in_shape.height);
  const Matrix<Scalar> rx = linear_resize_matrix<Scalar>(grad_out.width(), in_shape.width);
  FeatureMap<Scalar> g(in_shape);
  for (Index c = 0; c < in_shape.channels; ++c) {
    g.plane(c).noalias() = ry.transpose() * grad_out.plane(c) * rx;
  }
  return g;
}

template <typename Scalar>
FeatureMap<Scalar> leaky_relu(const FeatureMap<Scalar> &x, Scalar negative_slope) {
  FeatureMap<Scalar> y = x;
  y.matrix() = x.matrix().unaryExpr(
      [negative_slope](Scalar v) { return v > Scalar(0) ? v : negative_slope * v; });
  return y;
}

/// Gradient through a leaky rectifier, keyed on the rectifier's input.
template <typename Scalar>
FeatureMap<Scalar> leaky_relu_backward(const FeatureMap<Scalar> &grad_out,
                                       const FeatureMap<Scalar> &input, Scalar negative_slope) {
  FeatureMap<Scalar> g = grad_out;
  g.matrix().array() *= input.matrix().array().unaryExpr(
      [negative_slope](Scalar v) { return v > Scalar(0) ? Scalar(1) : negative_slope; });
  return g;
}

template <typename Scalar>
FeatureMap<Scalar> concat_channels(std::span<const FeatureMap<Scalar>> parts) {
  Index total = 0;
  for (const auto &p : parts) {
    require_same_shape({1, p.height(), p.width()},
                       {1, parts.front().height(), parts.front().width()}, "concat_channels");
    total += p.channels();
  }
  FeatureMap<Scalar> out(total, parts.front().height(), parts.front().width());
  Index offset = 0;
  for (const auto &p : parts) {
    out.matrix().middleRows(offset, p.channels()) = p.matrix();
    offset += p.channels();
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> slice_channels(const FeatureMap<Scalar> &x, Index first, Index count) {
  return FeatureMap<Scalar>(x.height(), x.width(), x.matrix().middleRows(first, count));
}

/// out[c] = x[order[c]]
template <typename Scalar>
FeatureMap<Scalar> gather_channels(const FeatureMap<Scalar> &x, std::span<const int> order) {
  FeatureMap<Scalar> out(static_cast<Index>(order.size()), x.height(), x.width());
  for (std::size_t c = 0; c < order.size(); ++c) {
    out.matrix().row(static_cast<Index>(c)) = x.matrix().row(order[c]);
  }
  return out;
}

/// Adjoint of gather_channels for a permutation.
template <typename Scalar>
FeatureMap<Scalar> scatter_channels(const FeatureMap<Scalar> &x, std::span<const int> order) {
  FeatureMap<Scalar> out(static_cast<Index>(order.size()), x.height(), x.width());
  for (std::size_t c = 0; c < order.size(); ++c) {
    out.matrix().row(order[c]) = x.matrix().row(static_cast<Index>(c));
  }
  return out;
}

/// Per-pixel softmax over channels.
template <typename Scalar>
FeatureMap<Scalar> softmax_channels(const FeatureMap<Scalar> &logits) {
  FeatureMap<Scalar> p = logits;
  auto &m = p.matrix();
  const auto col_max = m.colwise().maxCoeff().eval();
  m.rowwise() -= col_max;
  m = m.array().exp().matrix();
  const auto col_sum = m.colwise().sum().eval();
  m.array().rowwise() /= col_sum.array();
  return p;
}

} // namespace aquanet

#endif // AQUANET_OPS_HPP_
