#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

#include "aquanet/analytics.hpp"
#include "aquanet/atex.hpp"
#include "aquanet/checkpoint.hpp"
#include "aquanet/config.hpp"
#include "aquanet/grad_check.hpp"
#include "aquanet/synthgen.hpp"
#include "aquanet/training.hpp"
#include "cli_common.hpp"

namespace aquanet::cli {
namespace {

constexpr const char *kModelKind = "aquanet";
constexpr const char *kTextureKind = "texture_classifier";

struct Resolved {
  AquaNetConfig model;
  TrainConfig train;
  AtexTrainConfig atex;
};

Resolved resolve(const CommonOptions &o, const SegDataset *ds) {
  nlohmann::json raw = nlohmann::json::object();
  fs::path base;
  if (!o.config.empty()) {
    raw = read_json_file(o.config);
    base = fs::path(o.config).parent_path();
  }
  const nlohmann::json model_doc = raw.value("model", nlohmann::json::object());
  Resolved r;
  r.model = aquanet_config_from_json(model_doc, base);
  if (!model_doc.contains("taxonomy") && ds && ds->taxonomy()) r.model.taxonomy = *ds->taxonomy();
  r.train = train_config_from_json(raw.value("train", nlohmann::json::object()));
  r.atex = atex_config_from_json(raw.value("atex", nlohmann::json::object()));
  if (const auto s = o.seed_override()) r.model.seed = r.train.seed = r.atex.seed = *s;
  if (const auto n = o.iters_override()) r.train.max_iters = r.atex.max_iters = *n;
  const Toggles t = parse_toggles(o.toggles);
  if (t.two_paths) r.model.two_paths = *t.two_paths;
  if (t.lm) r.model.low_level_modulation = *t.lm;
  if (t.cm) r.model.cross_path_modulation = *t.cm;
  r.model.validate();
  r.train.validate();
  return r;
}

fs::path out_dir(const CommonOptions &o, const std::string &command) {
  fs::path p = o.out.empty() ? fs::path("runs") / command : fs::path(o.out);
  fs::create_directories(p);
  return p;
}

SegDataset open_dataset(const CommonOptions &o) {
  if (o.dataset.empty()) throw ConfigInvalid("--dataset is required");
  return SegDataset::open(o.dataset, o.label_offset);
}

void describe_dataset(RunManifest &m, const SegDataset &ds) {
  m.set("dataset", {{"path", ds.root().string()}, {"content_hash", ds.content_hash()}, {"images", ds.samples().size()}});
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string slug(std::string s) {
  for (char &c : s) {
    if (c == ' ') c = '_';
  }
  return s;
}

void add_common(CLI::App *sub, CommonOptions &o, bool config, bool dataset, bool seed, bool iters, bool toggles) {
  if (config) sub->add_option("--config", o.config, "JSON config file")->envname("AQUANET_CONFIG")->check(CLI::ExistingFile);
  if (dataset) sub->add_option("--dataset", o.dataset, "Dataset root directory")->envname("AQUANET_DATASET");
  sub->add_option("--out", o.out, "Output directory (default runs/<command>)")->envname("AQUANET_OUT");
  if (seed) o.seed_opt = sub->add_option("--seed", o.seed, "Root seed for every random stream")->envname("AQUANET_SEED");
  if (iters) o.iters_opt = sub->add_option("--iters", o.iters, "Override the iteration count")->envname("AQUANET_ITERS")->check(CLI::NonNegativeNumber);
  if (toggles) {
    sub->add_option("--toggle", o.toggles, "Component switch two_paths|lm|cm=on|off (repeatable)")
        ->envname("AQUANET_TOGGLE");
  }
  if (dataset) {
    sub->add_option("--label-offset", o.label_offset, "Stored mask value of class 0; smaller values are unlabeled")
        ->envname("AQUANET_LABEL_OFFSET")
        ->check(CLI::Range(0, 255));
  }
}

std::vector<TrainLogRow> run_training(AquaNet<float> &net, const TrainConfig &cfg, const std::vector<Example> &data,
                                      const std::string &tag) {
  const long every = std::max<long>(1, cfg.max_iters / 10);
  return train(net, cfg, data, [&](const TrainLogRow &r) {
    if (r.iter % every == 0 || r.iter + 1 == cfg.max_iters) {
      std::cout << tag << "iter " << r.iter << "  lr " << r.lr << "  loss " << r.loss_total << std::endl;
    }
  });
}

Checkpoint model_checkpoint(AquaNet<float> &net, const Resolved &r) {
  return make_checkpoint<float>(kModelKind, {{"model", to_json(r.model)}, {"train", to_json(r.train)}},
                                net.parameters());
}

// ---------------------------------------------------------------- train

void cmd_train(const CommonOptions &o, RunManifest &m) {
  const SegDataset ds = open_dataset(o);
  const Resolved r = resolve(o, &ds);
  const fs::path out = out_dir(o, "train");
  const auto data = load_examples(ds, Split::train, r.model.taxonomy);
  if (data.empty()) throw EmptyDataset("no train split under " + ds.root().string());

  AquaNet<float> net(r.model);
  const auto log = run_training(net, r.train, data, "");
  save_checkpoint(model_checkpoint(net, r), out / "checkpoint.bin");
  write_text_file(out / "train_log.csv", log_to_csv(log));
  write_json_file(out / "config.json", {{"model", to_json(r.model)}, {"train", to_json(r.train)}});

  m.set("config", {{"model", to_json(r.model)}, {"train", to_json(r.train)}});
  m.set("seed", r.train.seed);
  describe_dataset(m, ds);
  for (const char *f : {"checkpoint.bin", "train_log.csv", "config.json"}) m.add_output(out / f);
  m.write(out);
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string checkpoint;
  std::string split = "test";
};

void cmd_eval(const CommonOptions &o, const EvalOptions &e, RunManifest &m) {
  const SegDataset ds = open_dataset(o);
  const Checkpoint ckpt = load_checkpoint(e.checkpoint);
  if (ckpt.kind != kModelKind) throw CheckpointError(e.checkpoint + " holds a '" + ckpt.kind + "' model");
  const AquaNetConfig mc = aquanet_config_from_json(ckpt.config.at("model"));
  AquaNet<float> net(mc);
  apply_checkpoint(ckpt, net.parameters());
  const fs::path out = out_dir(o, "eval");
  const auto data = load_examples(ds, parse_split(e.split), mc.taxonomy);
  const MetricsReport rep = evaluate(make_predictor(net), data, mc.taxonomy);
  write_json_file(out / "metrics.json", to_json(rep));
  const std::string table = render_table(rep);
  write_text_file(out / "metrics.txt", table);
  std::cout << table;

  m.set("config", ckpt.config);
  m.set("checkpoint", e.checkpoint);
  m.set("split", e.split);
  describe_dataset(m, ds);
  m.add_output(out / "metrics.json");
  m.add_output(out / "metrics.txt");
  m.write(out);
}

// ---------------------------------------------------------------- ablate

struct AblationRow {
  bool two_paths, lm, cm;
};

constexpr AblationRow kAblationRows[] = {
    {false, false, false}, {true, false, false}, {true, true, false}, {true, false, true}, {true, true, true}};

struct AblateOptions {
  std::string split = "val";
};

void cmd_ablate(const CommonOptions &o, const AblateOptions &a, RunManifest &m) {
  if (!o.toggles.empty()) throw ConfigInvalid("ablate sets the toggles itself; drop --toggle");
  const SegDataset ds = open_dataset(o);
  const Resolved base = resolve(o, &ds);
  const fs::path out = out_dir(o, "ablate");
  const auto train_data = load_examples(ds, Split::train, base.model.taxonomy);
  if (train_data.empty()) throw EmptyDataset("no train split under " + ds.root().string());
  auto eval_data = load_examples(ds, parse_split(a.split), base.model.taxonomy);
  if (eval_data.empty()) throw EmptyDataset("no '" + a.split + "' split under " + ds.root().string());

  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << "two_paths,lm,cm,a_acc,a_miou,acc,miou\n";
  std::ostringstream table;
  char line[160];
  std::snprintf(line, sizeof line, "%-9s | %-2s | %-2s | %6s | %6s | %6s | %6s\n", "Two Paths", "LM", "CM", "A-acc",
                "A-mIoU", "acc", "mIoU");
  table << line;
  auto opt = [](const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  auto opt_pct = [](const std::optional<double> &v) { return v ? pct(*v) : std::string("-"); };

  for (std::size_t i = 0; i < std::size(kAblationRows); ++i) {
    const AblationRow &row = kAblationRows[i];
    Resolved r = base;
    r.model.two_paths = row.two_paths;
    r.model.low_level_modulation = row.lm;
    r.model.cross_path_modulation = row.cm;
    r.model.validate();
    AquaNet<float> net(r.model);
    const auto log = run_training(net, r.train, train_data, "[row " + std::to_string(i + 1) + "] ");
    const std::string log_name = "row" + std::to_string(i + 1) + "_train_log.csv";
    write_text_file(out / log_name, log_to_csv(log));
    const MetricsReport rep = evaluate(make_predictor(net), eval_data, r.model.taxonomy);
    rows.push_back({{"row", i + 1},
                    {"two_paths", row.two_paths},
                    {"lm", row.lm},
                    {"cm", row.cm},
                    {"config", to_json(r.model)},
                    {"a_acc", opt(rep.a_acc)},
                    {"a_miou", opt(rep.a_miou)},
                    {"acc", rep.acc},
                    {"miou", rep.miou},
                    {"train_log", log_name}});
    csv.precision(17);
    csv << row.two_paths << ',' << row.lm << ',' << row.cm << ',' << opt(rep.a_acc).dump() << ','
        << opt(rep.a_miou).dump() << ',' << rep.acc << ',' << rep.miou << '\n';
    std::snprintf(line, sizeof line, "%-9s | %-2s | %-2s | %6s | %6s | %6s | %6s\n", row.two_paths ? "x" : "",
                  row.lm ? "x" : "", row.cm ? "x" : "", opt_pct(rep.a_acc).c_str(), opt_pct(rep.a_miou).c_str(),
                  pct(rep.acc).c_str(), pct(rep.miou).c_str());
    table << line;
    m.add_output(out / log_name);
  }
  write_json_file(out / "ablation.json", {{"eval_split", a.split}, {"train", to_json(base.train)}, {"rows", rows}});
  write_text_file(out / "ablation.csv", csv.str());
  write_text_file(out / "ablation.txt", table.str());
  std::cout << table.str();

  m.set("config", {{"train", to_json(base.train)}, {"rows", rows}});
  m.set("seed", base.train.seed);
  describe_dataset(m, ds);
  for (const char *f : {"ablation.json", "ablation.csv", "ablation.txt"}) m.add_output(out / f);
  m.write(out);
}

// ---------------------------------------------------------------- stats

struct StatsOptions {
  std::string split;
  std::string taxonomy;
};

ClassTaxonomy stats_taxonomy(const SegDataset &ds, const std::string &override_path) {
  if (!override_path.empty()) return override_path == "atlantis" ? atlantis_taxonomy() : load_taxonomy_file(override_path);
  return ds.taxonomy_or(atlantis_taxonomy());
}

void cmd_stats(const CommonOptions &o, const StatsOptions &s, RunManifest &m) {
  const SegDataset ds = open_dataset(o);
  const ClassTaxonomy tax = stats_taxonomy(ds, s.taxonomy);
  const fs::path out = out_dir(o, "stats");
  LabelTally tally(tax);
  for (const auto &sample : ds.samples()) {
    if (s.split.empty() || to_string(sample.split) == s.split) tally.add(load_mask(sample));
  }
  const LabelStats st = tally.finish();
  nlohmann::json j = to_json(st, tax);
  try {
    j["frequency_pixel_correlation"] = frequency_pixel_correlation(st);
  } catch (const DegenerateVariance &) {
    j["frequency_pixel_correlation"] = nullptr;
  }
  write_json_file(out / "stats.json", j);
  write_text_file(out / "stats.csv", stats_to_csv(st, tax));
  std::cout << "images       " << st.num_images << "\n"
            << "unlabeled    " << pct(st.unlabeled_fraction) << " %\n"
            << "waterbodies  " << pct(st.waterbody_fraction) << " %\n"
            << "general      " << pct(st.group_fraction.at(ClassGroup::general)) << " %\n"
            << "fraction sum " << j["fraction_sum"].get<double>() << "\n";

  m.set("taxonomy", tax.name());
  m.set("split", s.split.empty() ? "all" : s.split);
  describe_dataset(m, ds);
  m.add_output(out / "stats.json");
  m.add_output(out / "stats.csv");
  m.write(out);
}

// ---------------------------------------------------------------- spatial

struct SpatialOptions {
  std::string label;
  Index size = kModeMapSize;
  std::string taxonomy;
};

void cmd_spatial(const CommonOptions &o, const SpatialOptions &s, RunManifest &m) {
  const SegDataset ds = open_dataset(o);
  const ClassTaxonomy tax = stats_taxonomy(ds, s.taxonomy);
  int label;
  if (const auto id = tax.find(s.label)) {
    label = *id;
  } else {
    try {
      label = std::stoi(s.label);
    } catch (const std::exception &) {
      throw ConfigInvalid("unknown label '" + s.label + "'");
    }
    if (!tax.contains(label)) throw IdOutOfRange("label id " + s.label);
  }
  const fs::path out = out_dir(o, "spatial");
  const ModeMap mm = spatial_mode_map(ds, label, tax, s.size);
  const std::string stem = "mode_" + slug(tax.at(label).name);
  write_indexed_png(mm.grid, class_palette(tax.num_classes(), tax.ignore_id()), out / (stem + ".png"));
  std::vector<std::int64_t> hist(static_cast<std::size_t>(tax.num_classes()) + 1, 0);
  for (Index i = 0; i < mm.grid.size(); ++i) {
    const int v = mm.grid.data()[i];
    ++hist[v == tax.ignore_id() ? hist.size() - 1 : static_cast<std::size_t>(v)];
  }
  nlohmann::json cells = nlohmann::json::object();
  for (int c = 0; c < tax.num_classes(); ++c) {
    if (hist[static_cast<std::size_t>(c)]) cells[tax.at(c).name] = hist[static_cast<std::size_t>(c)];
  }
  if (hist.back()) cells["unlabeled"] = hist.back();
  write_json_file(out / (stem + ".json"),
                  {{"label", tax.at(label).name}, {"label_id", label}, {"n_images", mm.n_images}, {"size", s.size},
                   {"cells", cells}});
  std::cout << "mode map for '" << tax.at(label).name << "' over " << mm.n_images << " images -> "
            << (out / (stem + ".png")).string() << "\n";

  m.set("label", tax.at(label).name);
  m.set("size", s.size);
  describe_dataset(m, ds);
  m.add_output(out / (stem + ".png"));
  m.add_output(out / (stem + ".json"));
  m.write(out);
}

// ---------------------------------------------------------------- consistency

struct ConsistencyOptions {
  std::string reannotations;
};

void cmd_consistency(const CommonOptions &o, const ConsistencyOptions &c, RunManifest &m) {
  const SegDataset ds = open_dataset(o);
  const ClassTaxonomy tax = ds.taxonomy_or(atlantis_taxonomy());
  const fs::path re = c.reannotations.empty() ? ds.root() / "reannotations" : fs::path(c.reannotations);
  const fs::path out = out_dir(o, "consistency");
  const auto rows = consistency_report(ds, re, tax);
  write_json_file(out / "consistency.json", to_json(rows));
  const std::string table = render_consistency_table(rows);
  write_text_file(out / "consistency.txt", table);
  std::cout << table;

  m.set("reannotations", re.string());
  describe_dataset(m, ds);
  m.add_output(out / "consistency.json");
  m.add_output(out / "consistency.txt");
  m.write(out);
}

// ---------------------------------------------------------------- atex

struct AtexOptions {
  std::string patches;
  std::string checkpoint;
  std::string split = "test";
  std::vector<double> ratios = {0.7, 0.1, 0.2};
  std::string label_map = "standard";
};

void cmd_atex_extract(const CommonOptions &o, const AtexOptions &a, RunManifest &m) {
  const SegDataset ds = open_dataset(o);
  const ClassTaxonomy tax = ds.taxonomy_or(atlantis_taxonomy());
  const AtexLabelMap map = a.label_map == "standard" ? AtexLabelMap::standard() : AtexLabelMap{};
  const AtexLabels labels = resolve_labels(map, tax);
  const std::uint64_t seed = o.seed_override().value_or(0);
  const fs::path out = out_dir(o, "atex-extract");

  PatchStore store;
  store.label_names = labels.names;
  for (const auto &s : ds.samples()) {
    auto p = extract_patches(load_image(s), load_mask(s), s.name, tax, labels);
    std::move(p.begin(), p.end(), std::back_inserter(store.patches));
  }
  store.split = split_patches(store.patches, {a.ratios.at(0), a.ratios.at(1), a.ratios.at(2)}, seed);
  save_patch_store(store, out);

  std::vector<std::size_t> per_label(labels.names.size(), 0);
  for (const auto &p : store.patches) ++per_label[static_cast<std::size_t>(p.label)];
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t l = 0; l < per_label.size(); ++l) counts[labels.names[l]] = per_label[l];
  const nlohmann::json summary = {{"patches", store.patches.size()},
                                  {"train", store.split.train.size()},
                                  {"val", store.split.val.size()},
                                  {"test", store.split.test.size()},
                                  {"per_label", counts},
                                  {"label_map", a.label_map}};
  write_json_file(out / "summary.json", summary);
  std::cout << store.patches.size() << " patches: " << store.split.train.size() << " train / "
            << store.split.val.size() << " val / " << store.split.test.size() << " test\n";

  m.set("seed", seed);
  m.set("config", {{"ratios", a.ratios}, {"label_map", a.label_map}});
  describe_dataset(m, ds);
  m.add_output(out / "manifest.csv");
  m.add_output(out / "labels.json");
  m.add_output(out / "summary.json");
  m.write(out);
}

void cmd_atex_train(const CommonOptions &o, const AtexOptions &a, RunManifest &m) {
  if (a.patches.empty()) throw ConfigInvalid("--patches is required");
  const PatchStore store = load_patch_store(a.patches);
  const Resolved r = resolve(o, nullptr);
  const fs::path out = out_dir(o, "atex-train");
  const AtexTrainResult res = atex_train(store, store.split.train, r.atex);
  TextureClassifier<float> model = res.model;
  save_checkpoint(make_checkpoint<float>(kTextureKind, {{"atex", to_json(r.atex)}, {"labels", store.label_names}},
                                         model.parameters()),
                  out / "checkpoint.bin");
  std::ostringstream log;
  log.precision(17);
  log << "iter,loss\n";
  for (std::size_t i = 0; i < res.losses.size(); ++i) log << i << ',' << res.losses[i] << '\n';
  write_text_file(out / "train_log.csv", log.str());
  if (!res.losses.empty()) std::cout << "final loss " << res.losses.back() << "\n";

  m.set("config", to_json(r.atex));
  m.set("seed", r.atex.seed);
  m.set("patches", a.patches);
  m.add_output(out / "checkpoint.bin");
  m.add_output(out / "train_log.csv");
  m.write(out);
}

void cmd_atex_eval(const CommonOptions &o, const AtexOptions &a, RunManifest &m) {
  if (a.patches.empty()) throw ConfigInvalid("--patches is required");
  const PatchStore store = load_patch_store(a.patches);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  if (ckpt.kind != kTextureKind) throw CheckpointError(a.checkpoint + " holds a '" + ckpt.kind + "' model");
  const AtexTrainConfig cfg = atex_config_from_json(ckpt.config.at("atex"));
  const auto names = ckpt.config.at("labels").get<std::vector<std::string>>();
  if (names != store.label_names) throw CheckpointError("checkpoint labels differ from the patch store's");
  TextureClassifier<float> model(static_cast<int>(names.size()), cfg.width, cfg.seed);
  apply_checkpoint(ckpt, model.parameters());
  const std::vector<std::size_t> &idx =
      a.split == "train" ? store.split.train : a.split == "val" ? store.split.val : store.split.test;
  const PrfReport rep = atex_eval(make_patch_predictor(model), store, idx);
  const fs::path out = out_dir(o, "atex-eval");
  write_json_file(out / "prf.json", to_json(rep, names));
  const std::string table = render_prf_table(rep);
  write_text_file(out / "prf.txt", table);
  std::cout << table;

  m.set("checkpoint", a.checkpoint);
  m.set("patches", a.patches);
  m.set("split", a.split);
  m.add_output(out / "prf.json");
  m.add_output(out / "prf.txt");
  m.write(out);
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string fixture;
};

void cmd_synth(const CommonOptions &o, const SynthOptions &s, RunManifest &m) {
  if (o.out.empty()) throw ConfigInvalid("--out is required");
  const std::uint64_t seed = o.seed_override().value_or(0);
  const FixtureInfo info = generate_fixture(s.fixture, o.out, seed);
  std::cout << "wrote " << info.name << " to " << info.root.string() << " (content hash " << info.content_hash
            << ")\n";
  m.set("seed", seed);
  m.set("fixture", {{"name", info.name}, {"content_hash", info.content_hash}});
  m.add_output(info.root);
  m.write(info.root);
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  double epsilon = 1e-4;
  double threshold = 1e-4;
};

void cmd_gradcheck(const CommonOptions &o, const GradcheckOptions &g, RunManifest &m, int &exit_code) {
  const std::uint64_t seed = o.seed_override().value_or(0);
  ModulationNet<double> net("modulation", 2, 2, ModulationSpec{}, derive_seed(seed, "gradcheck/net"));
  // Random final heads so that every parameter carries a non-trivial gradient.
  net.reinitialize(derive_seed(seed, "gradcheck/heads"), false);
  ModulationBlock<double> block(net);
  const GradCheckResult r = grad_check<double>(block, {{2, 8, 8}, {2, 8, 8}}, g.epsilon, derive_seed(seed, "gradcheck/inputs"));
  const bool pass = r.max_relative_error < g.threshold;
  std::cout << "max relative error " << r.max_relative_error << " over " << r.coordinates_checked
            << " coordinates (worst " << r.worst_location << ")\n"
            << (pass ? "PASS" : "FAIL") << " at threshold " << g.threshold << "\n";
  const fs::path out = out_dir(o, "gradcheck");
  write_json_file(out / "gradcheck.json", {{"max_relative_error", r.max_relative_error},
                                           {"coordinates_checked", r.coordinates_checked},
                                           {"worst_location", r.worst_location},
                                           {"epsilon", g.epsilon},
                                           {"threshold", g.threshold},
                                           {"pass", pass}});
  m.set("seed", seed);
  m.set("config", {{"epsilon", g.epsilon}, {"threshold", g.threshold}, {"input_shapes", "2x8x8, 2x8x8"}});
  m.add_output(out / "gradcheck.json");
  m.write(out);
  exit_code = pass ? 0 : 2;
}

} // namespace

int &gradcheck_exit_code() {
  static int code = 0;
  return code;
}

std::vector<std::pair<CLI::App *, Handler>> register_all(CLI::App &app, const std::vector<std::string> &argv) {
  std::vector<std::pair<CLI::App *, Handler>> handlers;
  auto add = [&](CLI::App *sub, std::function<void(RunManifest &)> fn) {
    const std::string name = sub->get_name();
    const std::string parent = sub->get_parent() && sub->get_parent() != &app ? sub->get_parent()->get_name() + " " : "";
    handlers.emplace_back(sub, [fn, name = parent + name, argv] {
      RunManifest m(name, argv);
      fn(m);
    });
  };

  {
    auto o = std::make_shared<CommonOptions>();
    auto *sub = app.add_subcommand("train", "Train a segmentation model");
    add_common(sub, *o, true, true, true, true, true);
    add(sub, [o](RunManifest &m) { cmd_train(*o, m); });
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto e = std::make_shared<EvalOptions>();
    auto *sub = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    add_common(sub, *o, false, true, false, false, false);
    sub->add_option("--checkpoint", e->checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile)
        ->envname("AQUANET_CHECKPOINT");
    sub->add_option("--split", e->split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}))
        ->envname("AQUANET_SPLIT");
    add(sub, [o, e](RunManifest &m) { cmd_eval(*o, *e, m); });
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto a = std::make_shared<AblateOptions>();
    auto *sub = app.add_subcommand("ablate", "Train and evaluate the five component ablation rows");
    add_common(sub, *o, true, true, true, true, true);
    sub->add_option("--split", a->split, "Evaluation split")->check(CLI::IsMember({"train", "val", "test"}))
        ->envname("AQUANET_SPLIT");
    add(sub, [o, a](RunManifest &m) { cmd_ablate(*o, *a, m); });
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto s = std::make_shared<StatsOptions>();
    auto *sub = app.add_subcommand("stats", "Label frequency and pixel statistics");
    add_common(sub, *o, false, true, false, false, false);
    sub->add_option("--split", s->split, "Restrict to one split")->check(CLI::IsMember({"train", "val", "test"}));
    sub->add_option("--taxonomy", s->taxonomy, "Taxonomy file or 'atlantis' (default: dataset's, else atlantis)")
        ->envname("AQUANET_TAXONOMY");
    add(sub, [o, s](RunManifest &m) { cmd_stats(*o, *s, m); });
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto s = std::make_shared<SpatialOptions>();
    auto *sub = app.add_subcommand("spatial", "Per-pixel mode map of the images collected for one label");
    add_common(sub, *o, false, true, false, false, false);
    sub->add_option("--label", s->label, "Class name or id")->required();
    sub->add_option("--size", s->size, "Grid size")->check(CLI::PositiveNumber);
    sub->add_option("--taxonomy", s->taxonomy, "Taxonomy file or 'atlantis' (default: dataset's, else atlantis)")
        ->envname("AQUANET_TAXONOMY");
    add(sub, [o, s](RunManifest &m) { cmd_spatial(*o, *s, m); });
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto c = std::make_shared<ConsistencyOptions>();
    auto *sub = app.add_subcommand("consistency", "Agreement of re-annotations with the reference masks");
    add_common(sub, *o, false, true, false, false, false);
    sub->add_option("--reannotations", c->reannotations,
                    "Directory of <annotator>/<name>.png (default <dataset>/reannotations)");
    add(sub, [o, c](RunManifest &m) { cmd_consistency(*o, *c, m); });
  }
  {
    auto *atex = app.add_subcommand("atex", "Texture patch extraction and classification");
    atex->require_subcommand(1);
    {
      auto o = std::make_shared<CommonOptions>();
      auto a = std::make_shared<AtexOptions>();
      auto *sub = atex->add_subcommand("extract", "Cut uniform 32x32 water patches and split them");
      add_common(sub, *o, false, true, true, false, false);
      sub->add_option("--ratios", a->ratios, "train val test fractions")->expected(3);
      sub->add_option("--label-map", a->label_map, "standard (omit and remap) or all (every aquatic class)")
          ->check(CLI::IsMember({"standard", "all"}));
      add(sub, [o, a](RunManifest &m) { cmd_atex_extract(*o, *a, m); });
    }
    {
      auto o = std::make_shared<CommonOptions>();
      auto a = std::make_shared<AtexOptions>();
      auto *sub = atex->add_subcommand("train", "Train the texture classifier on a patch store");
      add_common(sub, *o, true, false, true, true, false);
      sub->add_option("--patches", a->patches, "Patch store directory")->required()->envname("AQUANET_PATCHES");
      add(sub, [o, a](RunManifest &m) { cmd_atex_train(*o, *a, m); });
    }
    {
      auto o = std::make_shared<CommonOptions>();
      auto a = std::make_shared<AtexOptions>();
      auto *sub = atex->add_subcommand("eval", "Weighted precision / recall / F1 on a patch split");
      add_common(sub, *o, false, false, false, false, false);
      sub->add_option("--patches", a->patches, "Patch store directory")->required()->envname("AQUANET_PATCHES");
      sub->add_option("--checkpoint", a->checkpoint, "Classifier checkpoint")->required()->check(CLI::ExistingFile);
      sub->add_option("--split", a->split, "Patch split")->check(CLI::IsMember({"train", "val", "test"}));
      add(sub, [o, a](RunManifest &m) { cmd_atex_eval(*o, *a, m); });
    }
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto s = std::make_shared<SynthOptions>();
    auto *sub = app.add_subcommand("synth", "Write a synthetic fixture dataset");
    sub->add_option("--fixture", s->fixture, "Fixture name")->required()->check(CLI::IsMember(fixture_names()));
    sub->add_option("--out", o->out, "Dataset root to create")->required()->envname("AQUANET_OUT");
    o->seed_opt = sub->add_option("--seed", o->seed, "Generator seed")->envname("AQUANET_SEED");
    add(sub, [o, s](RunManifest &m) { cmd_synth(*o, *s, m); });
  }
  {
    auto o = std::make_shared<CommonOptions>();
    auto g = std::make_shared<GradcheckOptions>();
    auto *sub = app.add_subcommand("gradcheck", "Finite-difference check of the modulation block");
    add_common(sub, *o, false, false, true, false, false);
    sub->add_option("--epsilon", g->epsilon, "Central-difference step")->check(CLI::Range(1e-6, 1e-3));
    sub->add_option("--threshold", g->threshold, "Pass threshold on the max relative error");
    add(sub, [o, g](RunManifest &m) { cmd_gradcheck(*o, *g, m, gradcheck_exit_code()); });
  }
  return handlers;
}

} // namespace aquanet::cli
