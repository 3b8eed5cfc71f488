#include "aquanet/training.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "aquanet/loss.hpp"
#include "aquanet/seed.hpp"

namespace aquanet {

void TrainConfig::validate() const {
  auto positive = [](double v, const char *name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigInvalid(std::string(name) + " must be positive");
  };
  positive(base_lr, "base_lr");
  positive(power, "power");
  positive(scale_low, "scale_low");
  positive(scale_high, "scale_high");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigInvalid("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigInvalid("weight_decay must be >= 0");
  if (scale_low > scale_high) throw ConfigInvalid("scale_low exceeds scale_high");
  if (max_iters < 0) throw ConfigInvalid("max_iters must be >= 0");
  if (batch_size <= 0) throw ConfigInvalid("batch_size must be positive");
  if (crop <= 0 || crop % 32) throw ConfigInvalid("crop must be a positive multiple of 32");
  if (hflip_prob < 0.0 || hflip_prob > 1.0) throw ConfigInvalid("hflip_prob must lie in [0, 1]");
  if (aux_weight < 0.0) throw ConfigInvalid("aux_weight must be >= 0");
}

nlohmann::json to_json(const TrainConfig &c) {
  return {{"base_lr", c.base_lr},       {"momentum", c.momentum},     {"weight_decay", c.weight_decay},
          {"power", c.power},           {"max_iters", c.max_iters},   {"batch_size", c.batch_size},
          {"crop", c.crop},             {"scale_range", {c.scale_low, c.scale_high}},
          {"hflip_prob", c.hflip_prob}, {"aux_weight", c.aux_weight}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json &doc, TrainConfig c) {
  check_keys(doc, {"base_lr", "momentum", "weight_decay", "power", "max_iters", "batch_size", "crop", "scale_range",
                   "hflip_prob", "aux_weight", "seed"},
             "train config");
  try {
    c.base_lr = doc.value("base_lr", c.base_lr);
    c.momentum = doc.value("momentum", c.momentum);
    c.weight_decay = doc.value("weight_decay", c.weight_decay);
    c.power = doc.value("power", c.power);
    c.max_iters = doc.value("max_iters", c.max_iters);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.crop = doc.value("crop", c.crop);
    if (doc.contains("scale_range")) {
      const auto &r = doc.at("scale_range");
      if (!r.is_array() || r.size() != 2) throw ConfigInvalid("scale_range must be [low, high]");
      c.scale_low = r[0].get<double>();
      c.scale_high = r[1].get<double>();
    }
    c.hflip_prob = doc.value("hflip_prob", c.hflip_prob);
    c.aux_weight = doc.value("aux_weight", c.aux_weight);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigInvalid(e.what());
  }
  c.validate();
  return c;
}

double poly_lr(double base, long iter, long max_iter, double power) {
  if (max_iter <= 0) return 0.0;
  const double frac = 1.0 - static_cast<double>(std::clamp(iter, 0L, max_iter)) / static_cast<double>(max_iter);
  return base * std::pow(frac, power);
}

std::vector<Example> load_examples(const SegDataset &ds, Split split, const ClassTaxonomy &taxonomy) {
  std::vector<Example> out;
  for (const auto &s : ds.split(split)) {
    Example e;
    e.name = s.name;
    const RgbImage img = load_image(s);
    e.mask = load_mask(s);
    if (img.height != e.mask.rows() || img.width != e.mask.cols()) {
      throw ShapeMismatch(s.name + ": image and mask sizes differ");
    }
    for (Index i = 0; i < e.mask.size(); ++i) {
      const int id = e.mask.data()[i];
      if (id != taxonomy.ignore_id() && !taxonomy.contains(id)) {
        throw IdOutOfRange(s.name + ": mask id " + std::to_string(id));
      }
    }
    e.image = to_network_input<float>(img);
    out.push_back(std::move(e));
  }
  return out;
}

std::pair<FeatureMap<float>, IndexMask> augment(const FeatureMap<float> &image, const IndexMask &mask,
                                                std::mt19937_64 &rng, const TrainConfig &cfg, int ignore_id) {
  require_same_shape({1, image.height(), image.width()}, {1, mask.rows(), mask.cols()}, "augment");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FeatureMap<float> img = image;
  IndexMask m = mask;

  if (unit(rng) < cfg.hflip_prob) {
    for (Index c = 0; c < img.channels(); ++c) img.plane(c) = img.plane(c).rowwise().reverse().eval();
    m = m.rowwise().reverse().eval();
  }

  const double s = cfg.scale_low + (cfg.scale_high - cfg.scale_low) * unit(rng);
  const Index h = std::max<Index>(1, std::lround(static_cast<double>(img.height()) * s));
  const Index w = std::max<Index>(1, std::lround(static_cast<double>(img.width()) * s));
  if (h != img.height() || w != img.width()) {
    img = resize_bilinear(img, h, w);
    m = resize_nearest(m, h, w);
  }

  const Index ch = std::max(cfg.crop, h), cw = std::max(cfg.crop, w);
  FeatureMap<float> padded(img.channels(), ch, cw);
  IndexMask mpad = IndexMask::Constant(ch, cw, static_cast<std::uint8_t>(ignore_id));
  for (Index c = 0; c < img.channels(); ++c) padded.plane(c).topLeftCorner(h, w) = img.plane(c);
  mpad.topLeftCorner(h, w) = m;

  const Index y0 = static_cast<Index>(rng() % static_cast<std::uint64_t>(ch - cfg.crop + 1));
  const Index x0 = static_cast<Index>(rng() % static_cast<std::uint64_t>(cw - cfg.crop + 1));
  FeatureMap<float> out(img.channels(), cfg.crop, cfg.crop);
  for (Index c = 0; c < img.channels(); ++c) out.plane(c) = padded.plane(c).block(y0, x0, cfg.crop, cfg.crop);
  return {std::move(out), mpad.block(y0, x0, cfg.crop, cfg.crop)};
}

std::vector<TrainLogRow> train(AquaNet<float> &net, const TrainConfig &cfg, const std::vector<Example> &data,
                               const TrainCallback &on_iter) {
  cfg.validate();
  if (data.empty()) throw EmptyDataset("no training examples");
  const int ignore_id = net.config().taxonomy.ignore_id();
  const ParamList<float> params = net.parameters();
  std::mt19937_64 sampler(derive_seed(cfg.seed, "train/sampler"));
  std::mt19937_64 aug_rng(derive_seed(cfg.seed, "train/augment"));
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();

  std::vector<TrainLogRow> log;
  for (long iter = 0; iter < cfg.max_iters; ++iter) {
    zero_grads(params);
    TrainLogRow row;
    row.iter = iter;
    row.lr = poly_lr(cfg.base_lr, iter, cfg.max_iters, cfg.power);
    int counted = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), sampler);
        cursor = 0;
      }
      const Example &ex = data[order[cursor++]];
      auto [img, mask] = augment(ex.image, ex.mask, aug_rng, cfg, ignore_id);
      typename AquaNet<float>::Cache cache;
      const AquaNetOutput<float> out = net.forward(img, &cache);
      SegmentationLoss<float> loss;
      try {
        loss = total_loss(out.logits, out.aux_logits, mask, ignore_id, cfg.aux_weight);
      } catch (const AllPixelsIgnored &) {
        continue; // crop landed entirely in padding
      }
      if (!std::isfinite(loss.total)) {
        throw DivergedLoss("iteration " + std::to_string(iter) + ": loss is " + std::to_string(loss.total) +
                           " (lr " + std::to_string(row.lr) + ")");
      }
      const float inv_b = 1.0f / static_cast<float>(cfg.batch_size);
      loss.grad_main.matrix() *= inv_b;
      if (!loss.grad_aux.empty()) loss.grad_aux.matrix() *= inv_b;
      net.backward(cache, loss.grad_main, loss.grad_aux);
      row.loss_main += loss.main;
      row.loss_aux += loss.aux;
      row.loss_total += loss.total;
      ++counted;
    }
    if (counted > 0) {
      row.loss_main /= counted;
      row.loss_aux /= counted;
      row.loss_total /= counted;
    }
    sgd_step(params, row.lr, cfg.momentum, cfg.weight_decay);
    log.push_back(row);
    if (on_iter) on_iter(row);
  }
  return log;
}

std::string log_to_csv(const std::vector<TrainLogRow> &log) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,lr,loss_main,loss_aux,loss_total\n";
  for (const auto &r : log) {
    os << r.iter << ',' << r.lr << ',' << r.loss_main << ',' << r.loss_aux << ',' << r.loss_total << '\n';
  }
  return os.str();
}

Index stride_valid_extent(Index n, Index stride) { return std::max(stride, (n + stride / 2) / stride * stride); }

SegPredictor make_predictor(const AquaNet<float> &net) {
  return [&net](const FeatureMap<float> &image) { return net.forward(image).logits; };
}

IndexMask predict_mask(const SegPredictor &predict, const FeatureMap<float> &image) {
  const Index h = stride_valid_extent(image.height()), w = stride_valid_extent(image.width());
  const ProbabilityMap<float> logits = predict(resize_bilinear(image, h, w));
  if (logits.height() != h || logits.width() != w) throw ShapeMismatch("predictor output resolution");
  IndexMask m = argmax_mask(logits);
  if (h != image.height() || w != image.width()) m = resize_nearest(m, image.height(), image.width());
  return m;
}

ConfusionMatrix evaluate_confusion(const SegPredictor &predict, const std::vector<Example> &data, int num_classes,
                                   int ignore_id) {
  ConfusionMatrix cm(num_classes);
  for (const auto &ex : data) cm.accumulate(predict_mask(predict, ex.image), ex.mask, ignore_id);
  return cm;
}

MetricsReport evaluate(const SegPredictor &predict, const std::vector<Example> &data, const ClassTaxonomy &taxonomy) {
  if (data.empty()) throw EmptyDataset("nothing to evaluate");
  return make_report(evaluate_confusion(predict, data, taxonomy.num_classes(), taxonomy.ignore_id()), taxonomy);
}

} // namespace aquanet
