#ifndef AQUANET_NETWORK_HPP_
#define AQUANET_NETWORK_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aquanet/config.hpp"
#include "aquanet/grad_check.hpp"
#include "aquanet/layers.hpp"
#include "aquanet/modulation.hpp"

namespace aquanet {

template <typename Scalar>
struct BackboneOutput {
  FeatureMap<Scalar> low_level;
  FeatureMap<Scalar> aux;
  FeatureMap<Scalar> main;
};

template <typename Scalar>
class Backbone {
 public:
  struct Cache {
    std::vector<typename ConvAct<Scalar>::Cache> convs;
    Shape input_shape;
  };

  Backbone() = default;
  Backbone(const BackboneSpec &spec, std::uint64_t seed) : spec_(spec) {
    Index in = 3;
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
      const StageSpec &st = spec.stages[s];
      for (Index d = 0; d < st.depth; ++d) {
        const std::string name = "backbone.stage" + std::to_string(s) + "." + std::to_string(d);
        ConvGeometry g{3, d == 0 ? st.stride : 1, st.dilation};
        convs_.emplace_back(name, in, st.width, g);
        convs_.back().conv().init_fan_in(derive_seed(seed, name));
        stage_of_.push_back(static_cast<int>(s));
        in = st.width;
      }
    }
  }

  Index low_level_channels() const { return stage_width(spec_.low_level_stage); }
  Index aux_channels() const { return stage_width(spec_.aux_stage); }
  Index main_channels() const { return spec_.stages.back().width; }

  BackboneOutput<Scalar> forward(const FeatureMap<Scalar> &image, Cache *cache = nullptr) const {
    if (image.channels() != 3 || image.height() % 32 != 0 || image.width() % 32 != 0) {
      throw BadInputShape("image must be 3xHxW with H, W divisible by 32, got " +
                          to_string(image.shape()));
    }
    if (cache) {
      cache->convs.assign(convs_.size(), {});
      cache->input_shape = image.shape();
    }
    BackboneOutput<Scalar> out;
    FeatureMap<Scalar> x = image;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      x = convs_[i].forward(x, cache ? &cache->convs[i] : nullptr);
      const bool stage_end = i + 1 == convs_.size() || stage_of_[i + 1] != stage_of_[i];
      if (stage_end && stage_of_[i] == spec_.low_level_stage) out.low_level = x;
      if (stage_end && stage_of_[i] == spec_.aux_stage) out.aux = x;
    }
    out.main = std::move(x);
    return out;
  }

  /// Empty gradient maps are treated as zero.
  FeatureMap<Scalar> backward(const Cache &cache, const FeatureMap<Scalar> &grad_low,
                              const FeatureMap<Scalar> &grad_aux, const FeatureMap<Scalar> &grad_main) {
    FeatureMap<Scalar> g = grad_main;
    for (std::size_t i = convs_.size(); i-- > 0;) {
      const bool stage_end = i + 1 == convs_.size() || stage_of_[i + 1] != stage_of_[i];
      if (stage_end && stage_of_[i] == spec_.low_level_stage && !grad_low.empty()) {
        g = accumulate(std::move(g), grad_low);
      }
      if (stage_end && stage_of_[i] == spec_.aux_stage && !grad_aux.empty()) {
        g = accumulate(std::move(g), grad_aux);
      }
      if (g.empty()) continue;
      g = convs_[i].backward(cache.convs[i], g);
    }
    return g;
  }

  void collect_parameters(ParamList<Scalar> &out) {
    for (auto &c : convs_) c.collect_parameters(out);
  }

 private:
  static FeatureMap<Scalar> accumulate(FeatureMap<Scalar> g, const FeatureMap<Scalar> &extra) {
    if (g.empty()) return extra;
    g.matrix() += extra.matrix();
    return g;
  }

  Index stage_width(int s) const { return spec_.stages[static_cast<std::size_t>(s)].width; }

  BackboneSpec spec_;
  std::vector<ConvAct<Scalar>> convs_;
  std::vector<int> stage_of_;
};

/*
 * Multi-scale context head: parallel dilated 3x3 branches plus an optional
 * image-pooling branch, concatenated, projected, then classified.
 *
 * Trunk weights are seeded by role and classifier rows by class id, so every
 * head variant predicting a given class starts from the same function.
 */
template <typename Scalar>
class ContextHead {
 public:
  struct Cache {
    std::vector<typename ConvAct<Scalar>::Cache> branches;
    typename ConvAct<Scalar>::Cache pool_conv;
    typename ConvAct<Scalar>::Cache project;
    typename Conv2d<Scalar>::Cache classifier;
    Shape input_shape;
  };

  ContextHead() = default;
  ContextHead(const std::string &name, Index in_channels, std::vector<int> class_ids,
              const HeadSpec &spec, std::uint64_t seed)
      : spec_(spec), class_ids_(std::move(class_ids)) {
    const Index bw = spec.branch_width;
    for (std::size_t b = 0; b < spec.dilations.size(); ++b) {
      branches_.emplace_back(name + ".branch" + std::to_string(b), in_channels, bw,
                             ConvGeometry{3, 1, spec.dilations[b]});
      branches_.back().conv().init_fan_in(derive_seed(seed, "context_head.branch" + std::to_string(b)));
    }
    Index concat = bw * static_cast<Index>(spec.dilations.size());
    if (spec.global_pool) {
      pool_conv_ = ConvAct<Scalar>(name + ".image_pool", in_channels, bw, {});
      pool_conv_.conv().init_fan_in(derive_seed(seed, "context_head.image_pool"));
      concat += bw;
    }
    project_ = ConvAct<Scalar>(name + ".project", concat, bw, {});
    project_.conv().init_fan_in(derive_seed(seed, "context_head.project"));
    classifier_ = Conv2d<Scalar>(name + ".classifier", bw, static_cast<Index>(class_ids_.size()));
    std::vector<std::uint64_t> row_seeds;
    for (int id : class_ids_) row_seeds.push_back(derive_seed(seed, "classifier/" + std::to_string(id)));
    classifier_.init_rows_fan_in(row_seeds);
  }

  Index num_out() const { return static_cast<Index>(class_ids_.size()); }
  const std::vector<int> &class_ids() const { return class_ids_; }
  Conv2d<Scalar> &classifier() { return classifier_; }

  ProbabilityMap<Scalar> forward(const FeatureMap<Scalar> &x, Cache *cache = nullptr) const {
    if (cache) {
      cache->branches.assign(branches_.size(), {});
      cache->input_shape = x.shape();
    }
    std::vector<FeatureMap<Scalar>> parts;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      parts.push_back(branches_[b].forward(x, cache ? &cache->branches[b] : nullptr));
    }
    if (spec_.global_pool) {
      FeatureMap<Scalar> pooled(x.channels(), 1, 1);
      pooled.matrix() = x.matrix().rowwise().mean();
      FeatureMap<Scalar> p = pool_conv_.forward(pooled, cache ? &cache->pool_conv : nullptr);
      FeatureMap<Scalar> broadcast(p.channels(), x.height(), x.width());
      broadcast.matrix().colwise() = p.matrix().col(0);
      parts.push_back(std::move(broadcast));
    }
    FeatureMap<Scalar> cat = concat_channels<Scalar>(parts);
    FeatureMap<Scalar> h = project_.forward(cat, cache ? &cache->project : nullptr);
    return classifier_.forward(h, cache ? &cache->classifier : nullptr);
  }

  FeatureMap<Scalar> backward(const Cache &cache, const ProbabilityMap<Scalar> &grad_logits) {
    FeatureMap<Scalar> gh = classifier_.backward(cache.classifier, grad_logits);
    FeatureMap<Scalar> gcat = project_.backward(cache.project, gh);
    FeatureMap<Scalar> gx(cache.input_shape);
    const Index bw = spec_.branch_width;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      gx.matrix() += branches_[b]
                         .backward(cache.branches[b], slice_channels(gcat, static_cast<Index>(b) * bw, bw))
                         .matrix();
    }
    if (spec_.global_pool) {
      const Index offset = static_cast<Index>(branches_.size()) * bw;
      FeatureMap<Scalar> gp(bw, 1, 1);
      gp.matrix() = gcat.matrix().middleRows(offset, bw).rowwise().sum();
      FeatureMap<Scalar> gpooled = pool_conv_.backward(cache.pool_conv, gp);
      gx.matrix().colwise() += gpooled.matrix().col(0) / static_cast<Scalar>(cache.input_shape.area());
    }
    return gx;
  }

  void collect_parameters(ParamList<Scalar> &out) {
    for (auto &b : branches_) b.collect_parameters(out);
    if (spec_.global_pool) pool_conv_.collect_parameters(out);
    project_.collect_parameters(out);
    classifier_.collect_parameters(out);
  }

 private:
  HeadSpec spec_;
  std::vector<int> class_ids_;
  std::vector<ConvAct<Scalar>> branches_;
  ConvAct<Scalar> pool_conv_;
  ConvAct<Scalar> project_;
  Conv2d<Scalar> classifier_;
};

/// Auxiliary classifier on the intermediate backbone feature.
template <typename Scalar>
class AuxHead {
 public:
  struct Cache {
    typename ConvAct<Scalar>::Cache hidden;
    typename Conv2d<Scalar>::Cache classifier;
  };

  AuxHead() = default;
  AuxHead(Index in_channels, Index width, Index num_classes, std::uint64_t seed)
      : hidden_("aux_head.hidden", in_channels, width, ConvGeometry{3, 1, 1}),
        classifier_("aux_head.classifier", width, num_classes) {
    hidden_.conv().init_fan_in(derive_seed(seed, "aux_head.hidden"));
    classifier_.init_fan_in(derive_seed(seed, "aux_head.classifier"));
  }

  ProbabilityMap<Scalar> forward(const FeatureMap<Scalar> &x, Cache *cache = nullptr) const {
    return classifier_.forward(hidden_.forward(x, cache ? &cache->hidden : nullptr),
                               cache ? &cache->classifier : nullptr);
  }

  FeatureMap<Scalar> backward(const Cache &cache, const ProbabilityMap<Scalar> &grad) {
    return hidden_.backward(cache.hidden, classifier_.backward(cache.classifier, grad));
  }

  void collect_parameters(ParamList<Scalar> &out) {
    hidden_.collect_parameters(out);
    classifier_.collect_parameters(out);
  }

 private:
  ConvAct<Scalar> hidden_;
  Conv2d<Scalar> classifier_;
};

template <typename Scalar>
struct AquaNetOutput {
  ProbabilityMap<Scalar> logits;     // K x H x W, taxonomy id order
  ProbabilityMap<Scalar> aux_logits; // K x H/8 x W/8
};

/*
 * Backbone -> per-path (optional low-level modulation -> context head) ->
 * optional cross-path modulation -> concatenate, reorder to taxonomy ids,
 * bilinear upsample. With two_paths off a single path predicts every class.
 */
template <typename Scalar>
class AquaNet {
 public:
  struct Path {
    std::string role;
    std::vector<int> class_ids;
    Index low_first = 0;
    Index low_count = 0;
    std::optional<ModulationNet<Scalar>> low_level_mod;
    ContextHead<Scalar> head;
  };

  struct Cache {
    typename Backbone<Scalar>::Cache backbone;
    BackboneOutput<Scalar> features;
    std::vector<ModulateCache<Scalar>> low_level_mod;
    std::vector<typename ContextHead<Scalar>::Cache> heads;
    std::vector<ModulateCache<Scalar>> cross_mod;
    typename AuxHead<Scalar>::Cache aux;
    Shape scores_shape;
  };

  explicit AquaNet(AquaNetConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::uint64_t seed = config_.seed;
    backbone_ = Backbone<Scalar>(config_.backbone, seed);
    const Index low = backbone_.low_level_channels();
    const ClassTaxonomy &tax = config_.taxonomy;

    if (config_.two_paths) {
      split_ = path_split(tax);
      add_path("aquatic", split_.aquatic, 0, low / 2);
      add_path("nonaquatic", split_.nonaquatic, low / 2, low - low / 2);
    } else {
      split_.aquatic.clear();
      split_.nonaquatic.clear();
      std::vector<int> all;
      for (int id = 0; id < tax.num_classes(); ++id) all.push_back(id);
      split_.reassembly = all;
      add_path("single", all, 0, low);
    }
    if (config_.cross_path_modulation) {
      const Index n0 = static_cast<Index>(paths_[0].class_ids.size());
      const Index n1 = static_cast<Index>(paths_[1].class_ids.size());
      cross_mod_.emplace_back("cross_mod.aquatic", n1, n0, config_.modulation,
                              derive_seed(seed, "cross_mod.aquatic"));
      cross_mod_.emplace_back("cross_mod.nonaquatic", n0, n1, config_.modulation,
                              derive_seed(seed, "cross_mod.nonaquatic"));
    }
    aux_head_ = AuxHead<Scalar>(backbone_.aux_channels(), config_.head.branch_width, tax.num_classes(),
                                seed);
  }

  const AquaNetConfig &config() const { return config_; }
  int num_classes() const { return config_.taxonomy.num_classes(); }
  std::vector<Path> &paths() { return paths_; }
  const std::vector<Path> &paths() const { return paths_; }
  std::vector<ModulationNet<Scalar>> &cross_modulations() { return cross_mod_; }
  Backbone<Scalar> &backbone() { return backbone_; }
  const std::vector<int> &reassembly() const { return split_.reassembly; }

  /// Per-path class scores before concatenation, at feature resolution.
  std::vector<ProbabilityMap<Scalar>> path_scores(const FeatureMap<Scalar> &image, Cache *cache = nullptr,
                                                  BackboneOutput<Scalar> *features = nullptr) const {
    if (cache) {
      cache->low_level_mod.assign(paths_.size(), {});
      cache->heads.assign(paths_.size(), {});
      cache->cross_mod.assign(cross_mod_.size(), {});
    }
    BackboneOutput<Scalar> f = backbone_.forward(image, cache ? &cache->backbone : nullptr);
    std::vector<ProbabilityMap<Scalar>> scores;
    for (std::size_t p = 0; p < paths_.size(); ++p) {
      const Path &path = paths_[p];
      if (path.low_level_mod) {
        FeatureMap<Scalar> cond = slice_channels(f.low_level, path.low_first, path.low_count);
        FeatureMap<Scalar> modulated = modulate(*path.low_level_mod, f.main, cond,
                                                cache ? &cache->low_level_mod[p] : nullptr);
        scores.push_back(path.head.forward(modulated, cache ? &cache->heads[p] : nullptr));
      } else {
        scores.push_back(path.head.forward(f.main, cache ? &cache->heads[p] : nullptr));
      }
    }
    if (!cross_mod_.empty()) {
      // Both modulations condition on the unmodulated scores.
      ProbabilityMap<Scalar> p0 =
          modulate(cross_mod_[0], scores[0], scores[1], cache ? &cache->cross_mod[0] : nullptr);
      ProbabilityMap<Scalar> p1 =
          modulate(cross_mod_[1], scores[1], scores[0], cache ? &cache->cross_mod[1] : nullptr);
      scores = {std::move(p0), std::move(p1)};
    }
    if (cache) {
      cache->features = std::move(f);
    } else if (features) {
      *features = std::move(f);
    }
    return scores;
  }

  AquaNetOutput<Scalar> forward(const FeatureMap<Scalar> &image, Cache *cache = nullptr) const {
    BackboneOutput<Scalar> features;
    std::vector<ProbabilityMap<Scalar>> scores = path_scores(image, cache, &features);
    ProbabilityMap<Scalar> ordered =
        gather_channels(concat_channels<Scalar>(scores), std::span<const int>(split_.reassembly));
    AquaNetOutput<Scalar> out;
    if (cache) cache->scores_shape = ordered.shape();
    out.logits = resize_bilinear(ordered, image.height(), image.width());
    if (cache) {
      out.aux_logits = aux_head_.forward(cache->features.aux, &cache->aux);
    } else {
      out.aux_logits = aux_head_.forward(features.aux);
    }
    return out;
  }

  /// Returns the gradient w.r.t. the image; accumulates all parameter gradients.
  FeatureMap<Scalar> backward(const Cache &cache, const ProbabilityMap<Scalar> &grad_logits,
                              const ProbabilityMap<Scalar> &grad_aux) {
    FeatureMap<Scalar> g_ordered = resize_bilinear_backward(grad_logits, cache.scores_shape);
    FeatureMap<Scalar> g_cat = scatter_channels(g_ordered, std::span<const int>(split_.reassembly));
    std::vector<FeatureMap<Scalar>> g_scores;
    Index offset = 0;
    for (const auto &p : paths_) {
      const Index n = static_cast<Index>(p.class_ids.size());
      g_scores.push_back(slice_channels(g_cat, offset, n));
      offset += n;
    }
    if (!cross_mod_.empty()) {
      auto [g0_target, g1_cond] = modulate_backward(cross_mod_[0], cache.cross_mod[0], g_scores[0]);
      auto [g1_target, g0_cond] = modulate_backward(cross_mod_[1], cache.cross_mod[1], g_scores[1]);
      g0_target.matrix() += g0_cond.matrix();
      g1_target.matrix() += g1_cond.matrix();
      g_scores = {std::move(g0_target), std::move(g1_target)};
    }
    const BackboneOutput<Scalar> &f = cache.features;
    FeatureMap<Scalar> g_main(f.main.shape());
    FeatureMap<Scalar> g_low(f.low_level.shape());
    for (std::size_t p = 0; p < paths_.size(); ++p) {
      Path &path = paths_[p];
      FeatureMap<Scalar> g_feat = path.head.backward(cache.heads[p], g_scores[p]);
      if (path.low_level_mod) {
        auto [g_target, g_cond] = modulate_backward(*path.low_level_mod, cache.low_level_mod[p], g_feat);
        g_main.matrix() += g_target.matrix();
        g_low.matrix().middleRows(path.low_first, path.low_count) += g_cond.matrix();
      } else {
        g_main.matrix() += g_feat.matrix();
      }
    }
    FeatureMap<Scalar> g_aux;
    if (!grad_aux.empty()) g_aux = aux_head_.backward(cache.aux, grad_aux);
    return backbone_.backward(cache.backbone, g_low, g_aux, g_main);
  }

  ParamList<Scalar> parameters() {
    ParamList<Scalar> out;
    backbone_.collect_parameters(out);
    for (auto &p : paths_) {
      if (p.low_level_mod) p.low_level_mod->collect_parameters(out);
      p.head.collect_parameters(out);
    }
    for (auto &m : cross_mod_) m.collect_parameters(out);
    aux_head_.collect_parameters(out);
    return out;
  }

 private:
  void add_path(const std::string &role, std::vector<int> ids, Index low_first, Index low_count) {
    Path p;
    p.role = role;
    p.class_ids = ids;
    p.low_first = low_first;
    p.low_count = low_count;
    if (config_.low_level_modulation) {
      p.low_level_mod.emplace("low_mod." + role, low_count, backbone_.main_channels(),
                              config_.modulation, derive_seed(config_.seed, "low_mod." + role));
    }
    p.head = ContextHead<Scalar>(role + "_head", backbone_.main_channels(), std::move(ids),
                                 config_.head, config_.seed);
    paths_.push_back(std::move(p));
  }

  AquaNetConfig config_;
  Backbone<Scalar> backbone_;
  PathSplit split_;
  std::vector<Path> paths_;
  std::vector<ModulationNet<Scalar>> cross_mod_;
  AuxHead<Scalar> aux_head_;
};

/// Whole network as a one-input, two-output block (logits, aux logits).
template <typename Scalar>
class AquaNetBlock : public DifferentiableBlock<Scalar> {
 public:
  explicit AquaNetBlock(AquaNet<Scalar> &net) : net_(net) {}

  std::vector<FeatureMap<Scalar>> forward(const std::vector<FeatureMap<Scalar>> &inputs) override {
    cache_ = {};
    AquaNetOutput<Scalar> out = net_.forward(inputs.at(0), &cache_);
    return {std::move(out.logits), std::move(out.aux_logits)};
  }

  std::vector<FeatureMap<Scalar>> backward(const std::vector<FeatureMap<Scalar>> &grads) override {
    return {net_.backward(cache_, grads.at(0), grads.at(1))};
  }

  ParamList<Scalar> parameters() override { return net_.parameters(); }

 private:
  AquaNet<Scalar> &net_;
  typename AquaNet<Scalar>::Cache cache_;
};

} // namespace aquanet

#endif // AQUANET_NETWORK_HPP_
