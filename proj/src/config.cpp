#include "aquanet/config.hpp"

#include <algorithm>

#include "aquanet/errors.hpp"

namespace aquanet {

void AquaNetConfig::validate() const {
  if (backbone.stages.empty()) throw ConfigInvalid("backbone has no stages");
  const int n = static_cast<int>(backbone.stages.size());
  if (backbone.low_level_stage < 0 || backbone.low_level_stage >= n || backbone.aux_stage < 0 ||
      backbone.aux_stage >= n) {
    throw ConfigInvalid("low_level_stage / aux_stage out of range");
  }
  Index stride = 1, aux_stride = 1, low_stride = 1;
  for (int i = 0; i < n; ++i) {
    const auto &s = backbone.stages[static_cast<std::size_t>(i)];
    if (s.width <= 0 || s.stride <= 0 || s.dilation <= 0 || s.depth <= 0) {
      throw ConfigInvalid("stage " + std::to_string(i) + " has a non-positive field");
    }
    stride *= s.stride;
    if (i == backbone.aux_stage) aux_stride = stride;
    if (i == backbone.low_level_stage) low_stride = stride;
  }
  if (stride != 8 || aux_stride != 8) {
    throw ConfigInvalid("main and aux features must sit at output stride 8");
  }
  if (low_stride > 8) throw ConfigInvalid("low-level feature must not be coarser than the main feature");
  if (two_paths && backbone.stages[static_cast<std::size_t>(backbone.low_level_stage)].width < 2 &&
      low_level_modulation) {
    throw ConfigInvalid("low-level feature needs >= 2 channels to split across paths");
  }
  if (head.dilations.empty() || head.branch_width <= 0) throw ConfigInvalid("bad context head spec");
  if (modulation.hidden <= 0) throw ConfigInvalid("modulation hidden width must be positive");
  if (cross_path_modulation && !two_paths) {
    throw ConfigInvalid("cross-path modulation requires two paths");
  }
  if (two_paths && (taxonomy.aquatic_ids().empty() ||
                    static_cast<int>(taxonomy.aquatic_ids().size()) == taxonomy.num_classes())) {
    throw ConfigInvalid("two paths need both aquatic and non-aquatic classes");
  }
}

nlohmann::json to_json(const AquaNetConfig &cfg) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto &s : cfg.backbone.stages) {
    stages.push_back({{"width", s.width}, {"stride", s.stride}, {"dilation", s.dilation}, {"depth", s.depth}});
  }
  return {
      {"taxonomy", taxonomy_to_json(cfg.taxonomy)},
      {"backbone",
       {{"stages", stages},
        {"low_level_stage", cfg.backbone.low_level_stage},
        {"aux_stage", cfg.backbone.aux_stage}}},
      {"head",
       {{"dilations", cfg.head.dilations},
        {"branch_width", cfg.head.branch_width},
        {"global_pool", cfg.head.global_pool}}},
      {"modulation",
       {{"hidden", cfg.modulation.hidden}, {"negative_slope", cfg.modulation.negative_slope}}},
      {"two_paths", cfg.two_paths},
      {"low_level_modulation", cfg.low_level_modulation},
      {"cross_path_modulation", cfg.cross_path_modulation},
      {"seed", cfg.seed},
  };
}

void check_keys(const nlohmann::json &doc, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!doc.is_object()) throw ConfigInvalid(where + " must be a JSON object");
  for (const auto &item : doc.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char *k) { return item.key() == k; })) {
      throw ConfigInvalid("unknown key '" + item.key() + "' in " + where);
    }
  }
}

AquaNetConfig aquanet_config_from_json(const nlohmann::json &doc, const std::filesystem::path &base_dir) {
  AquaNetConfig cfg;
  check_keys(doc, {"taxonomy", "backbone", "head", "modulation", "two_paths", "low_level_modulation",
                   "cross_path_modulation", "seed"},
             "model config");
  try {
    if (doc.contains("taxonomy")) {
      const auto &t = doc.at("taxonomy");
      if (t.is_string()) {
        const std::string name = t.get<std::string>();
        if (name == "atlantis") {
          cfg.taxonomy = atlantis_taxonomy();
        } else {
          std::filesystem::path p(name);
          cfg.taxonomy = load_taxonomy_file(p.is_absolute() ? p : base_dir / p);
        }
      } else {
        cfg.taxonomy = load_taxonomy(t);
      }
    }
    if (doc.contains("backbone")) {
      const auto &b = doc.at("backbone");
      check_keys(b, {"stages", "low_level_stage", "aux_stage"}, "model.backbone");
      if (b.contains("stages")) {
        cfg.backbone.stages.clear();
        for (const auto &s : b.at("stages")) {
          cfg.backbone.stages.push_back({s.at("width").get<Index>(), s.value("stride", Index{1}),
                                         s.value("dilation", Index{1}), s.value("depth", Index{1})});
        }
      }
      cfg.backbone.low_level_stage = b.value("low_level_stage", cfg.backbone.low_level_stage);
      cfg.backbone.aux_stage = b.value("aux_stage", cfg.backbone.aux_stage);
    }
    if (doc.contains("head")) {
      const auto &h = doc.at("head");
      check_keys(h, {"dilations", "branch_width", "global_pool"}, "model.head");
      if (h.contains("dilations")) cfg.head.dilations = h.at("dilations").get<std::vector<Index>>();
      cfg.head.branch_width = h.value("branch_width", cfg.head.branch_width);
      cfg.head.global_pool = h.value("global_pool", cfg.head.global_pool);
    }
    if (doc.contains("modulation")) {
      const auto &m = doc.at("modulation");
      check_keys(m, {"hidden", "negative_slope"}, "model.modulation");
      cfg.modulation.hidden = m.value("hidden", cfg.modulation.hidden);
      cfg.modulation.negative_slope = m.value("negative_slope", cfg.modulation.negative_slope);
    }
    cfg.two_paths = doc.value("two_paths", cfg.two_paths);
    cfg.low_level_modulation = doc.value("low_level_modulation", cfg.low_level_modulation);
    cfg.cross_path_modulation = doc.value("cross_path_modulation", cfg.cross_path_modulation);
    cfg.seed = doc.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigInvalid(e.what());
  }
  return cfg;
}

} // namespace aquanet
