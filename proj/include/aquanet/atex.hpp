#ifndef AQUANET_ATEX_HPP_
#define AQUANET_ATEX_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aquanet/image.hpp"
#include "aquanet/layers.hpp"
#include "aquanet/metrics.hpp"
#include "aquanet/taxonomy.hpp"

namespace aquanet {

inline constexpr Index kPatchSize = 32;

/// Water patches of class `sources` become `target` when `trigger` occurs anywhere in the image.
struct AtexRemapRule {
  std::string trigger;
  std::string target;
  std::vector<std::string> sources;
};

struct AtexLabelMap {
  std::vector<std::string> omitted;
  std::vector<AtexRemapRule> remaps;

  /// Omits canal, ditch, reservoir and fjord; adds estuary (mangrove) and swamp (cypress tree).
  static AtexLabelMap standard();
};

/// Label map bound to a taxonomy. Output labels are the kept aquatic classes
/// in id order followed by the remap targets.
struct AtexLabels {
  struct Rule {
    int trigger = -1;
    int output = -1;
    std::vector<int> sources;
  };

  std::vector<std::string> names;
  std::vector<int> direct; // taxonomy id -> output label or -1
  std::vector<Rule> rules;

  int num_labels() const { return static_cast<int>(names.size()); }
};

/// Omitted names and rules whose trigger is absent from the taxonomy have no effect.
AtexLabels resolve_labels(const AtexLabelMap &map, const ClassTaxonomy &taxonomy);

struct TexturePatch {
  RgbImage pixels;
  int label = 0;
  int source_label = 0;
  std::string image_id;
  Index row = 0;
  Index col = 0;
};

/// Grid-aligned 32x32 tiles (stride 32, row-major) whose mask footprint is a
/// single kept aquatic class.
std::vector<TexturePatch> extract_patches(const RgbImage &image, const IndexMask &mask, const std::string &image_id,
                                          const ClassTaxonomy &taxonomy, const AtexLabels &labels);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Indices into the patch list.
struct PatchSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Per label: floor quotas, leftovers by largest remainder (train, val, test on ties),
/// after a seeded shuffle.
PatchSplit split_patches(std::span<const TexturePatch> patches, const SplitRatios &ratios, std::uint64_t seed);

/*
 * Patch store layout:
 *   root/labels.json
 *   root/manifest.csv          file,label,source_label,image_id,row,col,split
 *   root/<split>/<label>/<image_id>_r<row>_c<col>.png
 */
struct PatchStore {
  std::vector<std::string> label_names;
  std::vector<TexturePatch> patches;
  PatchSplit split;
};

void save_patch_store(const PatchStore &store, const std::filesystem::path &root);
PatchStore load_patch_store(const std::filesystem::path &root);

/// Conv(3->w) -> conv s2 -> conv s2 -> global average pool -> linear.
template <typename Scalar>
class TextureClassifier {
 public:
  struct Cache {
    std::vector<typename ConvAct<Scalar>::Cache> convs;
    Shape pooled_from;
    typename Conv2d<Scalar>::Cache fc;
  };

  TextureClassifier() = default;
  TextureClassifier(int num_labels, Index width, std::uint64_t seed) : num_labels_(num_labels) {
    convs_.emplace_back("tex.conv1", 3, width, ConvGeometry{3, 1, 1});
    convs_.emplace_back("tex.conv2", width, 2 * width, ConvGeometry{3, 2, 1});
    convs_.emplace_back("tex.conv3", 2 * width, 2 * width, ConvGeometry{3, 2, 1});
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].conv().init_fan_in(derive_seed(seed, "tex.conv" + std::to_string(i + 1)));
    }
    fc_ = Conv2d<Scalar>("tex.fc", 2 * width, num_labels);
    fc_.init_fan_in(derive_seed(seed, "tex.fc"));
  }

  int num_labels() const { return num_labels_; }

  /// Logits as a num_labels x 1 x 1 map.
  FeatureMap<Scalar> forward(const FeatureMap<Scalar> &x, Cache *cache = nullptr) const {
    if (cache) cache->convs.assign(convs_.size(), {});
    FeatureMap<Scalar> h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) h = convs_[i].forward(h, cache ? &cache->convs[i] : nullptr);
    if (cache) cache->pooled_from = h.shape();
    FeatureMap<Scalar> pooled(h.channels(), 1, 1);
    pooled.matrix() = h.matrix().rowwise().mean();
    return fc_.forward(pooled, cache ? &cache->fc : nullptr);
  }

  void backward(const Cache &cache, const FeatureMap<Scalar> &grad_logits) {
    FeatureMap<Scalar> gp = fc_.backward(cache.fc, grad_logits);
    FeatureMap<Scalar> g(cache.pooled_from);
    g.matrix().colwise() = gp.matrix().col(0) / static_cast<Scalar>(cache.pooled_from.area());
    for (std::size_t i = convs_.size(); i-- > 0;) g = convs_[i].backward(cache.convs[i], g);
  }

  ParamList<Scalar> parameters() {
    ParamList<Scalar> out;
    for (auto &c : convs_) c.collect_parameters(out);
    fc_.collect_parameters(out);
    return out;
  }

 private:
  int num_labels_ = 0;
  std::vector<ConvAct<Scalar>> convs_;
  Conv2d<Scalar> fc_;
};

struct AtexTrainConfig {
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double power = 0.9;
  long max_iters = 300;
  int batch_size = 16;
  Index width = 16;
  double hflip_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const AtexTrainConfig &c);
AtexTrainConfig atex_config_from_json(const nlohmann::json &doc, AtexTrainConfig base = {});

struct AtexTrainResult {
  TextureClassifier<float> model;
  std::vector<double> losses;
};

/// Trains on `train_idx`; throws SingleClassDataset when fewer than two labels occur.
AtexTrainResult atex_train(const PatchStore &store, std::span<const std::size_t> train_idx,
                           const AtexTrainConfig &cfg);

using PatchPredictor = std::function<int(const TexturePatch &)>;

PatchPredictor make_patch_predictor(const TextureClassifier<float> &model);
PrfReport atex_eval(const PatchPredictor &predict, const PatchStore &store, std::span<const std::size_t> idx);

nlohmann::json to_json(const PrfReport &r, const std::vector<std::string> &label_names);
/// Weighted Prec. / Recall / F1 row, in percent.
std::string render_prf_table(const PrfReport &r, const std::string &row_label = "model");

} // namespace aquanet

#endif // AQUANET_ATEX_HPP_
