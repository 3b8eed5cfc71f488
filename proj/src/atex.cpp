#include "aquanet/atex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "aquanet/dataset.hpp"
#include "aquanet/errors.hpp"
#include "aquanet/loss.hpp"
#include "aquanet/training.hpp"

namespace fs = std::filesystem;

namespace aquanet {

AtexLabelMap AtexLabelMap::standard() {
  return {{"canal", "ditch", "reservoir", "fjord"},
          {{"mangrove", "estuary", {"river", "river delta", "sea", "wetland"}},
           {"cypress tree", "swamp", {"lake", "river", "wetland"}}}};
}

AtexLabels resolve_labels(const AtexLabelMap &map, const ClassTaxonomy &taxonomy) {
  AtexLabels out;
  out.direct.assign(static_cast<std::size_t>(taxonomy.num_classes()), -1);
  for (int id : taxonomy.aquatic_ids()) {
    const std::string &name = taxonomy.at(id).name;
    if (std::find(map.omitted.begin(), map.omitted.end(), name) != map.omitted.end()) continue;
    out.direct[static_cast<std::size_t>(id)] = out.num_labels();
    out.names.push_back(name);
  }
  for (const auto &r : map.remaps) {
    const auto trigger = taxonomy.find(r.trigger);
    if (!trigger) continue;
    AtexLabels::Rule rule;
    rule.trigger = *trigger;
    const auto existing = std::find(out.names.begin(), out.names.end(), r.target);
    if (existing != out.names.end()) {
      rule.output = static_cast<int>(existing - out.names.begin());
    } else {
      rule.output = out.num_labels();
      out.names.push_back(r.target);
    }
    for (const auto &s : r.sources) {
      const auto id = taxonomy.find(s);
      if (id && out.direct[static_cast<std::size_t>(*id)] >= 0) rule.sources.push_back(*id);
    }
    out.rules.push_back(std::move(rule));
  }
  return out;
}

std::vector<TexturePatch> extract_patches(const RgbImage &image, const IndexMask &mask, const std::string &image_id,
                                          const ClassTaxonomy &taxonomy, const AtexLabels &labels) {
  if (image.height != mask.rows() || image.width != mask.cols()) {
    throw ShapeMismatch(image_id + ": image and mask sizes differ");
  }
  std::vector<bool> present(256, false);
  for (Index i = 0; i < mask.size(); ++i) present[mask.data()[i]] = true;

  std::vector<TexturePatch> out;
  for (Index r = 0; r + kPatchSize <= mask.rows(); r += kPatchSize) {
    for (Index c = 0; c + kPatchSize <= mask.cols(); c += kPatchSize) {
      const auto tile = mask.block(r, c, kPatchSize, kPatchSize);
      const int id = tile(0, 0);
      if ((tile.array() != tile(0, 0)).any()) continue;
      if (!taxonomy.contains(id) || !taxonomy.is_aquatic(id)) continue;
      int label = labels.direct[static_cast<std::size_t>(id)];
      if (label < 0) continue;
      for (const auto &rule : labels.rules) {
        if (present[static_cast<std::size_t>(rule.trigger)] &&
            std::find(rule.sources.begin(), rule.sources.end(), id) != rule.sources.end()) {
          label = rule.output;
          break;
        }
      }
      TexturePatch p;
      p.label = label;
      p.source_label = id;
      p.image_id = image_id;
      p.row = r;
      p.col = c;
      p.pixels = RgbImage(kPatchSize, kPatchSize);
      for (Index y = 0; y < kPatchSize; ++y)
        for (Index x = 0; x < kPatchSize; ++x)
          for (int ch = 0; ch < 3; ++ch) p.pixels.at(y, x, ch) = image.at(r + y, c + x, ch);
      out.push_back(std::move(p));
    }
  }
  return out;
}

PatchSplit split_patches(std::span<const TexturePatch> patches, const SplitRatios &ratios, std::uint64_t seed) {
  const double ratio[3] = {ratios.train, ratios.val, ratios.test};
  for (double r : ratio) {
    if (!(r >= 0.0)) throw ConfigInvalid("split ratios must be non-negative");
  }
  if (std::abs(ratio[0] + ratio[1] + ratio[2] - 1.0) > 1e-9) throw ConfigInvalid("split ratios must sum to 1");

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < patches.size(); ++i) by_label[patches[i].label].push_back(i);

  PatchSplit out;
  std::vector<std::size_t> *dst[3] = {&out.train, &out.val, &out.test};
  for (auto &[label, idx] : by_label) {
    std::mt19937_64 rng(derive_seed(seed, "atex/split/" + std::to_string(label)));
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    std::size_t quota[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double q = n * ratio[s];
      quota[s] = static_cast<std::size_t>(std::floor(q + 1e-9));
      rem[s] = q - static_cast<double>(quota[s]);
      assigned += quota[s];
    }
    int order[3] = {0, 1, 2};
    // Remainders equal up to rounding count as ties.
    std::stable_sort(order, order + 3, [&](int a, int b) { return rem[a] > rem[b] + 1e-9; });
    for (int k = 0; assigned < idx.size(); k = (k + 1) % 3, ++assigned) ++quota[order[k]];
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      dst[s]->insert(dst[s]->end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                     idx.begin() + static_cast<std::ptrdiff_t>(pos + quota[s]));
      pos += quota[s];
    }
  }
  for (auto *d : dst) std::sort(d->begin(), d->end());
  return out;
}

namespace {

std::string patch_file(const TexturePatch &p, const std::vector<std::string> &names, const std::string &split) {
  std::string label = names[static_cast<std::size_t>(p.label)];
  std::replace(label.begin(), label.end(), ' ', '_');
  return split + "/" + label + "/" + p.image_id + "_r" + std::to_string(p.row) + "_c" + std::to_string(p.col) +
         ".png";
}

} // namespace

void save_patch_store(const PatchStore &store, const fs::path &root) {
  std::vector<std::string> split_of(store.patches.size(), "");
  const std::pair<const char *, const std::vector<std::size_t> *> parts[] = {
      {"train", &store.split.train}, {"val", &store.split.val}, {"test", &store.split.test}};
  for (const auto &[name, idx] : parts)
    for (std::size_t i : *idx) split_of.at(i) = name;

  std::ostringstream m;
  m << "file,label,source_label,image_id,row,col,split\n";
  for (std::size_t i = 0; i < store.patches.size(); ++i) {
    const auto &p = store.patches[i];
    const std::string split = split_of[i].empty() ? "unassigned" : split_of[i];
    const std::string file = patch_file(p, store.label_names, split);
    write_rgb_png(p.pixels, root / file);
    m << file << ',' << p.label << ',' << p.source_label << ',' << p.image_id << ',' << p.row << ',' << p.col << ','
      << split << '\n';
  }
  write_text_file(root / "manifest.csv", m.str());
  write_text_file(root / "labels.json", nlohmann::json{{"labels", store.label_names}}.dump(2) + "\n");
}

PatchStore load_patch_store(const fs::path &root) {
  if (!fs::exists(root / "manifest.csv")) throw IoFailure("no patch manifest under " + root.string());
  PatchStore store;
  store.label_names = nlohmann::json::parse(read_text_file(root / "labels.json")).at("labels").get<std::vector<std::string>>();
  std::istringstream in(read_text_file(root / "manifest.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw IoFailure("bad patch manifest line: " + line);
    TexturePatch p;
    p.pixels = read_rgb(root / cells[0]);
    p.label = std::stoi(cells[1]);
    p.source_label = std::stoi(cells[2]);
    p.image_id = cells[3];
    p.row = std::stol(cells[4]);
    p.col = std::stol(cells[5]);
    if (p.label < 0 || p.label >= static_cast<int>(store.label_names.size())) {
      throw IdOutOfRange("patch label " + cells[1]);
    }
    const std::size_t i = store.patches.size();
    if (cells[6] == "train") {
      store.split.train.push_back(i);
    } else if (cells[6] == "val") {
      store.split.val.push_back(i);
    } else if (cells[6] == "test") {
      store.split.test.push_back(i);
    }
    store.patches.push_back(std::move(p));
  }
  return store;
}

void AtexTrainConfig::validate() const {
  if (!(base_lr > 0) || !(power > 0)) throw ConfigInvalid("base_lr and power must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigInvalid("momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigInvalid("weight_decay must be >= 0");
  if (max_iters < 0 || batch_size <= 0 || width <= 0) throw ConfigInvalid("iteration, batch and width settings");
  if (hflip_prob < 0 || hflip_prob > 1) throw ConfigInvalid("hflip_prob must lie in [0, 1]");
}

nlohmann::json to_json(const AtexTrainConfig &c) {
  return {{"base_lr", c.base_lr},   {"momentum", c.momentum},     {"weight_decay", c.weight_decay},
          {"power", c.power},       {"max_iters", c.max_iters},   {"batch_size", c.batch_size},
          {"width", c.width},       {"hflip_prob", c.hflip_prob}, {"seed", c.seed}};
}

AtexTrainConfig atex_config_from_json(const nlohmann::json &doc, AtexTrainConfig c) {
  check_keys(doc, {"base_lr", "momentum", "weight_decay", "power", "max_iters", "batch_size", "width", "hflip_prob",
                   "seed"},
             "atex config");
  try {
    c.base_lr = doc.value("base_lr", c.base_lr);
    c.momentum = doc.value("momentum", c.momentum);
    c.weight_decay = doc.value("weight_decay", c.weight_decay);
    c.power = doc.value("power", c.power);
    c.max_iters = doc.value("max_iters", c.max_iters);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.width = doc.value("width", c.width);
    c.hflip_prob = doc.value("hflip_prob", c.hflip_prob);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigInvalid(e.what());
  }
  c.validate();
  return c;
}

AtexTrainResult atex_train(const PatchStore &store, std::span<const std::size_t> train_idx,
                           const AtexTrainConfig &cfg) {
  cfg.validate();
  if (train_idx.empty()) throw EmptyDataset("no training patches");
  std::vector<bool> seen(store.label_names.size(), false);
  int distinct = 0;
  for (std::size_t i : train_idx) {
    const int l = store.patches.at(i).label;
    if (!seen[static_cast<std::size_t>(l)]) {
      seen[static_cast<std::size_t>(l)] = true;
      ++distinct;
    }
  }
  if (distinct < 2) throw SingleClassDataset("training patches carry a single label");

  std::vector<FeatureMap<float>> inputs;
  for (std::size_t i : train_idx) inputs.push_back(to_network_input<float>(store.patches[i].pixels));

  AtexTrainResult res{TextureClassifier<float>(static_cast<int>(store.label_names.size()), cfg.width, cfg.seed), {}};
  auto &model = res.model;
  const ParamList<float> params = model.parameters();
  std::mt19937_64 rng(derive_seed(cfg.seed, "atex/sampler"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> order(train_idx.size());
  std::size_t cursor = order.size();
  for (long iter = 0; iter < cfg.max_iters; ++iter) {
    zero_grads(params);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t k = order[cursor++];
      FeatureMap<float> x = inputs[k];
      if (unit(rng) < cfg.hflip_prob) {
        for (Index c = 0; c < x.channels(); ++c) x.plane(c) = x.plane(c).rowwise().reverse().eval();
      }
      TextureClassifier<float>::Cache cache;
      const FeatureMap<float> logits = model.forward(x, &cache);
      IndexMask target(1, 1);
      target(0, 0) = static_cast<std::uint8_t>(store.patches[train_idx[k]].label);
      CrossEntropy<float> ce = softmax_cross_entropy(logits, target, -1);
      if (!std::isfinite(ce.loss)) throw DivergedLoss("texture classifier, iteration " + std::to_string(iter));
      ce.grad.matrix() /= static_cast<float>(cfg.batch_size);
      model.backward(cache, ce.grad);
      loss += ce.loss / cfg.batch_size;
    }
    sgd_step(params, poly_lr(cfg.base_lr, iter, cfg.max_iters, cfg.power), cfg.momentum, cfg.weight_decay);
    res.losses.push_back(loss);
  }
  return res;
}

PatchPredictor make_patch_predictor(const TextureClassifier<float> &model) {
  return [&model](const TexturePatch &p) {
    const FeatureMap<float> logits = model.forward(to_network_input<float>(p.pixels));
    Index best = 0;
    logits.matrix().col(0).maxCoeff(&best);
    return static_cast<int>(best);
  };
}

PrfReport atex_eval(const PatchPredictor &predict, const PatchStore &store, std::span<const std::size_t> idx) {
  if (idx.empty()) throw EmptyDataset("no patches to evaluate");
  std::vector<int> truth, pred;
  for (std::size_t i : idx) {
    truth.push_back(store.patches.at(i).label);
    pred.push_back(predict(store.patches[i]));
  }
  return weighted_prf(truth, pred, static_cast<int>(store.label_names.size()));
}

nlohmann::json to_json(const PrfReport &r, const std::vector<std::string> &label_names) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    per.push_back({{"label", c < label_names.size() ? label_names[c] : std::to_string(c)},
                   {"precision", r.per_class[c].precision},
                   {"recall", r.per_class[c].recall},
                   {"f1", r.per_class[c].f1},
                   {"support", r.support[c]}});
  }
  return {{"precision", r.weighted.precision},
          {"recall", r.weighted.recall},
          {"f1", r.weighted.f1},
          {"accuracy", r.accuracy},
          {"per_class", per}};
}

std::string render_prf_table(const PrfReport &r, const std::string &row_label) {
  char buf[256];
  const int w = static_cast<int>(std::max<std::size_t>(row_label.size(), 5));
  std::snprintf(buf, sizeof buf, "%-*s | %6s | %6s | %6s\n%-*s | %6.2f | %6.2f | %6.2f\n", w, "", "Prec.", "Recall",
                "F1", w, row_label.c_str(), 100 * r.weighted.precision, 100 * r.weighted.recall, 100 * r.weighted.f1);
  return buf;
}

} // namespace aquanet
