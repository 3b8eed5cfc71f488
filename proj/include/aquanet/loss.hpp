#ifndef AQUANET_LOSS_HPP_
#define AQUANET_LOSS_HPP_

#include <cmath>
#include <string>

#include "aquanet/image.hpp"
#include "aquanet/ops.hpp"

namespace aquanet {

template <typename Scalar>
struct CrossEntropy {
  double loss = 0.0;
  Index counted = 0;
  /// d loss / d logits, same shape as the logits.
  FeatureMap<Scalar> grad;
};

/// Mean pixel-wise softmax cross-entropy over pixels whose label is not
/// `ignore_id`. Logits must match the mask resolution.
template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(const ProbabilityMap<Scalar> &logits, const IndexMask &target,
                                           int ignore_id) {
  if (logits.height() != target.rows() || logits.width() != target.cols()) {
    throw ShapeMismatch("logits " + to_string(logits.shape()) + " vs mask " + std::to_string(target.rows()) +
                        "x" + std::to_string(target.cols()));
  }
  const Index k = logits.channels();
  CrossEntropy<Scalar> out;
  out.grad = softmax_channels(logits);
  auto &g = out.grad.matrix();
  double total = 0.0;
  for (Index p = 0; p < logits.area(); ++p) {
    const int label = target.data()[p];
    if (label == ignore_id) {
      g.col(p).setZero();
      continue;
    }
    if (label >= k) throw IdOutOfRange("mask label " + std::to_string(label) + " with " + std::to_string(k) + " classes");
    // log-sum-exp in double for a stable loss value
    const auto col = logits.matrix().col(p).template cast<double>();
    const double m = col.maxCoeff();
    const double lse = m + std::log((col.array() - m).exp().sum());
    total += lse - col(label);
    g(label, p) -= Scalar(1);
    ++out.counted;
  }
  if (out.counted == 0) throw AllPixelsIgnored("every pixel carries the ignore label");
  out.loss = total / static_cast<double>(out.counted);
  g *= static_cast<Scalar>(1.0 / static_cast<double>(out.counted));
  return out;
}

template <typename Scalar>
struct SegmentationLoss {
  double main = 0.0;
  double aux = 0.0;
  double total = 0.0;
  FeatureMap<Scalar> grad_main;
  /// Gradient at the auxiliary head's own resolution; empty if aux_weight is 0.
  FeatureMap<Scalar> grad_aux;
};

/// CE(main) + aux_weight * CE(aux upsampled to the mask resolution).
template <typename Scalar>
SegmentationLoss<Scalar> total_loss(const ProbabilityMap<Scalar> &main_logits,
                                    const ProbabilityMap<Scalar> &aux_logits, const IndexMask &target,
                                    int ignore_id, double aux_weight) {
  SegmentationLoss<Scalar> out;
  CrossEntropy<Scalar> m = softmax_cross_entropy(main_logits, target, ignore_id);
  out.main = m.loss;
  out.grad_main = std::move(m.grad);
  if (aux_weight > 0.0 && !aux_logits.empty()) {
    const auto up = resize_bilinear(aux_logits, target.rows(), target.cols());
    CrossEntropy<Scalar> a = softmax_cross_entropy(up, target, ignore_id);
    out.aux = a.loss;
    a.grad.matrix() *= static_cast<Scalar>(aux_weight);
    out.grad_aux = resize_bilinear_backward(a.grad, aux_logits.shape());
  }
  out.total = out.main + aux_weight * out.aux;
  return out;
}

} // namespace aquanet

#endif // AQUANET_LOSS_HPP_
