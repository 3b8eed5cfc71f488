#ifndef AQUANET_GRAD_CHECK_HPP_
#define AQUANET_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aquanet/layers.hpp"
#include "aquanet/modulation.hpp"

namespace aquanet {

/// Anything with a cached forward pass and a matching backward pass.
template <typename Scalar>
class DifferentiableBlock {
 public:
  virtual ~DifferentiableBlock() = default;

  /// Runs the forward pass and remembers what backward() needs.
  virtual std::vector<FeatureMap<Scalar>> forward(const std::vector<FeatureMap<Scalar>> &inputs) = 0;

  /// Gradients w.r.t. the inputs of the most recent forward(); parameter
  /// gradients are accumulated into parameters().
  virtual std::vector<FeatureMap<Scalar>> backward(const std::vector<FeatureMap<Scalar>> &grad_outputs) = 0;

  virtual ParamList<Scalar> parameters() = 0;
};

struct GradCheckOptions {
  /// Coordinates sampled per input/parameter tensor; 0 checks all of them.
  std::size_t max_coords_per_tensor = 0;
  /// Denominator floor for the relative error.
  double abs_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_location;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

namespace detail {

template <typename Scalar>
double sum_outputs(DifferentiableBlock<Scalar> &block, const std::vector<FeatureMap<Scalar>> &inputs) {
  double total = 0.0;
  for (const auto &y : block.forward(inputs)) total += static_cast<double>(y.matrix().sum());
  return total;
}

inline std::vector<Index> pick_coords(Index size, std::size_t cap, std::mt19937_64 &rng) {
  std::vector<Index> idx(static_cast<std::size_t>(size));
  for (Index i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (cap != 0 && idx.size() > cap) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

} // namespace detail

/*
 * Compares analytic gradients of L = sum(outputs) against central finite
 * differences over inputs and parameters. Inputs are drawn from N(0, 1)
 * with the given seed. Relative error per coordinate is
 * |analytic - numeric| / max(|numeric|, abs_floor).
 */
template <typename Scalar>
GradCheckResult grad_check(DifferentiableBlock<Scalar> &block, const std::vector<Shape> &input_shapes,
                           double epsilon, std::uint64_t seed, const GradCheckOptions &options = {}) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw ConfigInvalid("grad_check epsilon must lie in [1e-6, 1e-3]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<FeatureMap<Scalar>> inputs;
  for (const auto &s : input_shapes) {
    FeatureMap<Scalar> x(s);
    x.matrix() = x.matrix().unaryExpr([&](Scalar) { return static_cast<Scalar>(normal(rng)); });
    inputs.push_back(std::move(x));
  }

  ParamList<Scalar> params = block.parameters();
  for (auto *p : params) p->zero_grad();
  std::vector<FeatureMap<Scalar>> outputs = block.forward(inputs);
  std::vector<FeatureMap<Scalar>> ones;
  for (const auto &y : outputs) ones.push_back(FeatureMap<Scalar>::constant(y.shape(), Scalar(1)));
  std::vector<FeatureMap<Scalar>> input_grads = block.backward(ones);
  std::vector<Matrix<Scalar>> param_grads;
  for (auto *p : params) {
    if (!p->grad.allFinite()) throw NonFiniteGradient(p->name);
    param_grads.push_back(p->grad);
  }
  for (const auto &g : input_grads) {
    if (!g.all_finite()) throw NonFiniteGradient("input gradient");
  }

  GradCheckResult result;
  auto check = [&](Scalar &slot, double analytic, const std::string &where) {
    const Scalar saved = slot;
    slot = static_cast<Scalar>(static_cast<double>(saved) + epsilon);
    const double up = detail::sum_outputs(block, inputs);
    slot = static_cast<Scalar>(static_cast<double>(saved) - epsilon);
    const double down = detail::sum_outputs(block, inputs);
    slot = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    if (!std::isfinite(numeric)) throw NonFiniteGradient("numeric gradient at " + where);
    const double err = std::abs(analytic - numeric) / std::max(std::abs(numeric), options.abs_floor);
    ++result.coordinates_checked;
    if (result.worst_location.empty() || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_location = where;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto &m = inputs[i].matrix();
    for (Index k : detail::pick_coords(m.size(), options.max_coords_per_tensor, rng)) {
      check(m.data()[k], static_cast<double>(input_grads[i].matrix().data()[k]),
            "input" + std::to_string(i) + "[" + std::to_string(k) + "]");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto &m = params[i]->value;
    for (Index k : detail::pick_coords(m.size(), options.max_coords_per_tensor, rng)) {
      check(m.data()[k], static_cast<double>(param_grads[i].data()[k]),
            params[i]->name + "[" + std::to_string(k) + "]");
    }
  }
  return result;
}

/// Adapter exposing modulate(net, F1, F2) as a two-input block.
template <typename Scalar>
class ModulationBlock : public DifferentiableBlock<Scalar> {
 public:
  explicit ModulationBlock(ModulationNet<Scalar> &net) : net_(net) {}

  std::vector<FeatureMap<Scalar>> forward(const std::vector<FeatureMap<Scalar>> &inputs) override {
    return {modulate(net_, inputs.at(0), inputs.at(1), &cache_)};
  }

  std::vector<FeatureMap<Scalar>> backward(const std::vector<FeatureMap<Scalar>> &grads) override {
    auto [g_target, g_cond] = modulate_backward(net_, cache_, grads.at(0));
    return {std::move(g_target), std::move(g_cond)};
  }

  ParamList<Scalar> parameters() override {
    ParamList<Scalar> out;
    net_.collect_parameters(out);
    return out;
  }

 private:
  ModulationNet<Scalar> &net_;
  ModulateCache<Scalar> cache_;
};

} // namespace aquanet

#endif // AQUANET_GRAD_CHECK_HPP_
