#ifndef AQUANET_MODULATION_HPP_
#define AQUANET_MODULATION_HPP_

#include <string>
#include <utility>

#include "aquanet/layers.hpp"

namespace aquanet {

struct ModulationSpec {
  Index hidden = 32;
  double negative_slope = 0.01;
};

template <typename Scalar>
struct ModulationParams {
  FeatureMap<Scalar> alpha;
  FeatureMap<Scalar> beta;
};

/*
 * Predicts per-element scale (alpha) and shift (beta) for a target feature
 * from a conditioning feature.
 *
 *   trunk:  pool2 -> conv1x1 -> leaky -> pool2 -> conv1x1 -> leaky -> pool2
 *   alpha:  conv1x1 -> conv1x1
 *   beta:   conv1x1 -> conv1x1
 *
 * Both heads are computed at 1/8 of the conditioning resolution and resized
 * bilinearly to the target size. The last conv of each head starts at zero,
 * so a fresh net yields alpha = beta = 0 exactly.
 */
template <typename Scalar>
class ModulationNet {
 public:
  struct Cache {
    Shape cond_shape;
    Shape pooled1_in, pooled2_in, pooled3_in;
    typename ConvAct<Scalar>::Cache trunk1, trunk2;
    typename Conv2d<Scalar>::Cache alpha1, alpha2, beta1, beta2;
    Shape low_res;
  };

  ModulationNet() = default;
  ModulationNet(const std::string &name, Index in_channels, Index out_channels,
                const ModulationSpec &spec, std::uint64_t seed)
      : name_(name), in_channels_(in_channels), out_channels_(out_channels), spec_(spec),
        trunk1_(name + ".trunk1", in_channels, spec.hidden, {}, static_cast<Scalar>(spec.negative_slope)),
        trunk2_(name + ".trunk2", spec.hidden, spec.hidden, {}, static_cast<Scalar>(spec.negative_slope)),
        alpha1_(name + ".alpha1", spec.hidden, spec.hidden),
        alpha2_(name + ".alpha2", spec.hidden, out_channels),
        beta1_(name + ".beta1", spec.hidden, spec.hidden),
        beta2_(name + ".beta2", spec.hidden, out_channels) {
    reinitialize(seed, true);
  }

  const std::string &name() const { return name_; }
  Index in_channels() const { return in_channels_; }
  Index out_channels() const { return out_channels_; }
  const ModulationSpec &spec() const { return spec_; }

  /// Fan-in init everywhere; the two final head convs are zeroed unless told otherwise.
  void reinitialize(std::uint64_t seed, bool zero_final_heads) {
    trunk1_.conv().init_fan_in(derive_seed(seed, "trunk1"));
    trunk2_.conv().init_fan_in(derive_seed(seed, "trunk2"));
    alpha1_.init_fan_in(derive_seed(seed, "alpha1"));
    beta1_.init_fan_in(derive_seed(seed, "beta1"));
    if (zero_final_heads) {
      alpha2_.init_zero();
      beta2_.init_zero();
    } else {
      alpha2_.init_fan_in(derive_seed(seed, "alpha2"));
      beta2_.init_fan_in(derive_seed(seed, "beta2"));
    }
  }

  Conv2d<Scalar> &alpha_output() { return alpha2_; }
  Conv2d<Scalar> &beta_output() { return beta2_; }
  Conv2d<Scalar> &alpha_hidden() { return alpha1_; }
  Conv2d<Scalar> &beta_hidden() { return beta1_; }
  Conv2d<Scalar> &trunk_conv(int i) { return i == 0 ? trunk1_.conv() : trunk2_.conv(); }

  ModulationParams<Scalar> params(const FeatureMap<Scalar> &cond, Index height, Index width,
                                  Cache *cache = nullptr) const {
    if (cond.channels() != in_channels_) {
      throw ShapeMismatch(name_ + ": conditioning has " + std::to_string(cond.channels()) +
                          " channels, expected " + std::to_string(in_channels_));
    }
    FeatureMap<Scalar> t0 = avg_pool2(cond);
    FeatureMap<Scalar> h1 = trunk1_.forward(t0, cache ? &cache->trunk1 : nullptr);
    FeatureMap<Scalar> t1 = avg_pool2(h1);
    FeatureMap<Scalar> h2 = trunk2_.forward(t1, cache ? &cache->trunk2 : nullptr);
    FeatureMap<Scalar> t2 = avg_pool2(h2);
    FeatureMap<Scalar> a = alpha2_.forward(alpha1_.forward(t2, cache ? &cache->alpha1 : nullptr),
                                           cache ? &cache->alpha2 : nullptr);
    FeatureMap<Scalar> b = beta2_.forward(beta1_.forward(t2, cache ? &cache->beta1 : nullptr),
                                          cache ? &cache->beta2 : nullptr);
    if (cache) {
      cache->cond_shape = cond.shape();
      cache->pooled1_in = cond.shape();
      cache->pooled2_in = h1.shape();
      cache->pooled3_in = h2.shape();
      cache->low_res = a.shape();
    }
    return {resize_bilinear(a, height, width), resize_bilinear(b, height, width)};
  }

  /// Back-propagates gradients w.r.t. alpha and beta to the conditioning input.
  FeatureMap<Scalar> backward(const Cache &cache, const FeatureMap<Scalar> &grad_alpha,
                              const FeatureMap<Scalar> &grad_beta) {
    FeatureMap<Scalar> ga = resize_bilinear_backward(grad_alpha, cache.low_res);
    FeatureMap<Scalar> gb = resize_bilinear_backward(grad_beta, cache.low_res);
    FeatureMap<Scalar> gt2 = alpha1_.backward(cache.alpha1, alpha2_.backward(cache.alpha2, ga));
    gt2.matrix() += beta1_.backward(cache.beta1, beta2_.backward(cache.beta2, gb)).matrix();
    FeatureMap<Scalar> gh2 = avg_pool2_backward(gt2, cache.pooled3_in);
    FeatureMap<Scalar> gt1 = trunk2_.backward(cache.trunk2, gh2);
    FeatureMap<Scalar> gh1 = avg_pool2_backward(gt1, cache.pooled2_in);
    FeatureMap<Scalar> gt0 = trunk1_.backward(cache.trunk1, gh1);
    return avg_pool2_backward(gt0, cache.pooled1_in);
  }

  void collect_parameters(ParamList<Scalar> &out) {
    trunk1_.collect_parameters(out);
    trunk2_.collect_parameters(out);
    alpha1_.collect_parameters(out);
    alpha2_.collect_parameters(out);
    beta1_.collect_parameters(out);
    beta2_.collect_parameters(out);
  }

  static constexpr int kPointwiseConvs = 6;
  static constexpr int kLeakyRectifiers = 2;
  static constexpr int kDownsamples = 3;

 private:
  std::string name_;
  Index in_channels_ = 0;
  Index out_channels_ = 0;
  ModulationSpec spec_;
  ConvAct<Scalar> trunk1_, trunk2_;
  Conv2d<Scalar> alpha1_, alpha2_, beta1_, beta2_;
};

template <typename Scalar>
ModulationParams<Scalar> modulation_params(const ModulationNet<Scalar> &net,
                                           const FeatureMap<Scalar> &cond, const Shape &target) {
  if (target.channels != net.out_channels()) {
    throw ShapeMismatch(net.name() + ": target has " + std::to_string(target.channels) +
                        " channels, net produces " + std::to_string(net.out_channels()));
  }
  return net.params(cond, target.height, target.width);
}

/// alpha * F + beta + F, element-wise.
template <typename Scalar>
FeatureMap<Scalar> apply_modulation(const ModulationParams<Scalar> &p, const FeatureMap<Scalar> &target) {
  require_same_shape(p.alpha.shape(), target.shape(), "apply_modulation alpha");
  require_same_shape(p.beta.shape(), target.shape(), "apply_modulation beta");
  FeatureMap<Scalar> out = target;
  out.matrix().array() =
      p.alpha.matrix().array() * target.matrix().array() + p.beta.matrix().array() +
      target.matrix().array();
  return out;
}

template <typename Scalar>
struct ModulateCache {
  typename ModulationNet<Scalar>::Cache net;
  ModulationParams<Scalar> params;
  FeatureMap<Scalar> target;
};

/// Modulates `target` conditioned on `cond`. Output has target's shape.
template <typename Scalar>
FeatureMap<Scalar> modulate(const ModulationNet<Scalar> &net, const FeatureMap<Scalar> &target,
                            const FeatureMap<Scalar> &cond, ModulateCache<Scalar> *cache = nullptr) {
  if (target.channels() != net.out_channels()) {
    throw ShapeMismatch(net.name() + ": target has " + std::to_string(target.channels()) +
                        " channels, net produces " + std::to_string(net.out_channels()));
  }
  ModulationParams<Scalar> p =
      net.params(cond, target.height(), target.width(), cache ? &cache->net : nullptr);
  FeatureMap<Scalar> out = apply_modulation(p, target);
  if (cache) {
    cache->params = std::move(p);
    cache->target = target;
  }
  return out;
}

/// Returns (grad w.r.t. target, grad w.r.t. cond); accumulates the net's parameter grads.
template <typename Scalar>
std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>>
modulate_backward(ModulationNet<Scalar> &net, const ModulateCache<Scalar> &cache,
                  const FeatureMap<Scalar> &grad_out) {
  FeatureMap<Scalar> grad_target = grad_out;
  grad_target.matrix().array() *= cache.params.alpha.matrix().array() + Scalar(1);
  FeatureMap<Scalar> grad_alpha = grad_out;
  grad_alpha.matrix().array() *= cache.target.matrix().array();
  FeatureMap<Scalar> grad_cond = net.backward(cache.net, grad_alpha, grad_out);
  return {std::move(grad_target), std::move(grad_cond)};
}

} // namespace aquanet

#endif // AQUANET_MODULATION_HPP_
