#ifndef AQUANET_TRAINING_HPP_
#define AQUANET_TRAINING_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aquanet/dataset.hpp"
#include "aquanet/image.hpp"
#include "aquanet/layers.hpp"
#include "aquanet/metrics.hpp"
#include "aquanet/network.hpp"

namespace aquanet {

struct TrainConfig {
  double base_lr = 2.5e-4;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double power = 0.9;
  long max_iters = 80000;
  int batch_size = 2;
  Index crop = 640;
  double scale_low = 0.5;
  double scale_high = 2.0;
  double hflip_prob = 0.5;
  double aux_weight = 0.4;
  std::uint64_t seed = 0;

  /// Throws ConfigInvalid.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig &cfg);
/// Missing keys keep the values in `base`.
TrainConfig train_config_from_json(const nlohmann::json &doc, TrainConfig base = {});

/// base * (1 - iter / max_iter)^power
double poly_lr(double base, long iter, long max_iter, double power = 0.9);

/// g += wd * w;  v = momentum * v + g;  w -= lr * v
template <typename Scalar>
void sgd_step(const ParamList<Scalar> &params, double lr, double momentum, double weight_decay) {
  const auto l = static_cast<Scalar>(lr), m = static_cast<Scalar>(momentum), wd = static_cast<Scalar>(weight_decay);
  for (auto *p : params) {
    if (!p->grad.allFinite()) throw NonFiniteGradient("gradient of " + p->name);
    p->velocity = m * p->velocity + p->grad + wd * p->value;
    p->value -= l * p->velocity;
  }
}

template <typename Scalar>
void zero_grads(const ParamList<Scalar> &params) {
  for (auto *p : params) p->zero_grad();
}

struct Example {
  std::string name;
  FeatureMap<float> image; // normalised network input
  IndexMask mask;
};

/// Loads and normalises one split; mask ids are checked against the taxonomy.
std::vector<Example> load_examples(const SegDataset &ds, Split split, const ClassTaxonomy &taxonomy);

/*
 * Random flip, scale (image bilinear, mask nearest) and crop. Regions outside
 * the scaled image are padded with 0 in normalised space, i.e. the per-channel
 * mean colour, and with ignore_id in the mask.
 */
std::pair<FeatureMap<float>, IndexMask> augment(const FeatureMap<float> &image, const IndexMask &mask,
                                                std::mt19937_64 &rng, const TrainConfig &cfg, int ignore_id);

struct TrainLogRow {
  long iter = 0;
  double lr = 0.0;
  double loss_main = 0.0;
  double loss_aux = 0.0;
  double loss_total = 0.0;
};

using TrainCallback = std::function<void(const TrainLogRow &)>;

/// SGD with poly decay; throws DivergedLoss on a non-finite loss.
std::vector<TrainLogRow> train(AquaNet<float> &net, const TrainConfig &cfg, const std::vector<Example> &data,
                               const TrainCallback &on_iter = {});

std::string log_to_csv(const std::vector<TrainLogRow> &log);

/// Maps a stride-valid image to class logits at the same resolution.
using SegPredictor = std::function<ProbabilityMap<float>(const FeatureMap<float> &)>;

/// Nearest multiple of `stride`, at least `stride`.
Index stride_valid_extent(Index n, Index stride = 32);

SegPredictor make_predictor(const AquaNet<float> &net);

/// Resize to a stride-valid size, predict, argmax, resize back (nearest).
IndexMask predict_mask(const SegPredictor &predict, const FeatureMap<float> &image);

ConfusionMatrix evaluate_confusion(const SegPredictor &predict, const std::vector<Example> &data, int num_classes,
                                   int ignore_id);

/// Throws EmptyDataset.
MetricsReport evaluate(const SegPredictor &predict, const std::vector<Example> &data, const ClassTaxonomy &taxonomy);

} // namespace aquanet

#endif // AQUANET_TRAINING_HPP_
