#include "aquanet/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "aquanet/errors.hpp"

namespace fs = std::filesystem;

namespace aquanet {
namespace {

std::string fmt_pct(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

} // namespace

LabelTally::LabelTally(const ClassTaxonomy &taxonomy)
    : taxonomy_(&taxonomy),
      pixels_(static_cast<std::size_t>(taxonomy.num_classes()), 0),
      images_with_(static_cast<std::size_t>(taxonomy.num_classes()), 0) {}

void LabelTally::add(const IndexMask &mask) {
  std::vector<std::int64_t> local(pixels_.size(), 0);
  std::int64_t unl = 0;
  for (Index i = 0; i < mask.size(); ++i) {
    const int id = mask.data()[i];
    if (id == taxonomy_->ignore_id()) {
      ++unl;
    } else if (taxonomy_->contains(id)) {
      ++local[static_cast<std::size_t>(id)];
    } else {
      throw IdOutOfRange("mask id " + std::to_string(id));
    }
  }
  for (std::size_t c = 0; c < local.size(); ++c) {
    pixels_[c] += local[c];
    images_with_[c] += local[c] > 0;
  }
  unlabeled_ += unl;
  ++images_;
}

void LabelTally::merge(const LabelTally &o) {
  for (std::size_t c = 0; c < pixels_.size(); ++c) {
    pixels_[c] += o.pixels_[c];
    images_with_[c] += o.images_with_[c];
  }
  unlabeled_ += o.unlabeled_;
  images_ += o.images_;
}

LabelStats LabelTally::finish() const {
  if (images_ == 0) throw EmptyDataset("no masks to tally");
  LabelStats s;
  s.num_images = images_;
  s.unlabeled_pixels = unlabeled_;
  s.total_pixels = unlabeled_;
  for (auto p : pixels_) s.total_pixels += p;
  if (s.total_pixels == 0) throw EmptyDataset("masks contain no pixels");
  const double total = static_cast<double>(s.total_pixels);
  s.unlabeled_fraction = static_cast<double>(unlabeled_) / total;
  for (ClassGroup g : {ClassGroup::artificial, ClassGroup::natural, ClassGroup::general}) s.group_fraction[g] = 0.0;
  for (std::size_t c = 0; c < pixels_.size(); ++c) {
    ClassFrequency f;
    f.image_count = images_with_[c];
    f.pixels = pixels_[c];
    f.pixel_fraction = static_cast<double>(pixels_[c]) / total;
    const ClassDef &def = taxonomy_->at(static_cast<int>(c));
    s.group_fraction[def.group] += f.pixel_fraction;
    if (def.aquatic) s.aquatic_fraction += f.pixel_fraction;
    s.per_class.push_back(f);
  }
  s.waterbody_fraction = s.group_fraction[ClassGroup::artificial] + s.group_fraction[ClassGroup::natural];
  return s;
}

LabelStats label_frequency(std::span<const IndexMask> masks, const ClassTaxonomy &taxonomy) {
  LabelTally t(taxonomy);
  for (const auto &m : masks) t.add(m);
  return t.finish();
}

LabelStats label_frequency(const SegDataset &ds, const ClassTaxonomy &taxonomy) {
  LabelTally t(taxonomy);
  for (const auto &s : ds.samples()) t.add(load_mask(s));
  return t.finish();
}

nlohmann::json to_json(const LabelStats &s, const ClassTaxonomy &taxonomy) {
  nlohmann::json classes = nlohmann::json::array();
  double sum = s.unlabeled_fraction;
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const auto &def = taxonomy.at(static_cast<int>(c));
    classes.push_back({{"id", def.id},
                       {"name", def.name},
                       {"group", std::string(to_string(def.group))},
                       {"aquatic", def.aquatic},
                       {"image_count", s.per_class[c].image_count},
                       {"pixels", s.per_class[c].pixels},
                       {"pixel_fraction", s.per_class[c].pixel_fraction}});
    sum += s.per_class[c].pixel_fraction;
  }
  nlohmann::json groups = nlohmann::json::object();
  for (const auto &[g, v] : s.group_fraction) groups[std::string(to_string(g))] = v;
  return {{"num_images", s.num_images},
          {"total_pixels", s.total_pixels},
          {"unlabeled_pixels", s.unlabeled_pixels},
          {"unlabeled_fraction", s.unlabeled_fraction},
          {"waterbody_fraction", s.waterbody_fraction},
          {"aquatic_fraction", s.aquatic_fraction},
          {"group_fraction", groups},
          {"fraction_sum", sum},
          {"classes", classes}};
}

std::string stats_to_csv(const LabelStats &s, const ClassTaxonomy &taxonomy) {
  std::ostringstream os;
  os.precision(12);
  os << "id,name,group,aquatic,image_count,pixels,pixel_fraction\n";
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const auto &d = taxonomy.at(static_cast<int>(c));
    os << d.id << ',' << d.name << ',' << to_string(d.group) << ',' << (d.aquatic ? 1 : 0) << ','
       << s.per_class[c].image_count << ',' << s.per_class[c].pixels << ',' << s.per_class[c].pixel_fraction << '\n';
  }
  os << ",unlabeled,,0,," << s.unlabeled_pixels << ',' << s.unlabeled_fraction << '\n';
  return os.str();
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw LengthMismatch("pearson: different lengths");
  if (x.size() < 2) throw DegenerateVariance("need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateVariance("zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double frequency_pixel_correlation(const LabelStats &s) {
  std::vector<double> counts, pixels;
  for (const auto &f : s.per_class) {
    if (f.image_count > 0) {
      counts.push_back(static_cast<double>(f.image_count));
      pixels.push_back(static_cast<double>(f.pixels));
    }
  }
  return pearson(counts, pixels);
}

namespace {

class ModeVotes {
 public:
  ModeVotes(const ClassTaxonomy &tax, Index size)
      : tax_(tax), size_(size), slots_(tax.num_classes() + 1),
        votes_(static_cast<std::size_t>(size * size * slots_), 0) {}

  void add(const IndexMask &mask) {
    const IndexMask r = resize_nearest(mask, size_, size_);
    for (Index i = 0; i < r.size(); ++i) {
      const int id = r.data()[i];
      int slot;
      if (id == tax_.ignore_id()) {
        slot = tax_.num_classes();
      } else if (tax_.contains(id)) {
        slot = id;
      } else {
        throw IdOutOfRange("mask id " + std::to_string(id));
      }
      ++votes_[static_cast<std::size_t>(i * slots_ + slot)];
    }
  }

  IndexMask mode() const {
    IndexMask g(size_, size_);
    for (Index i = 0; i < g.size(); ++i) {
      const std::uint32_t *v = &votes_[static_cast<std::size_t>(i * slots_)];
      // Slots are in id order with ignore last (ignore_id >= K), so the first
      // maximum is the lowest id.
      const int best = static_cast<int>(std::max_element(v, v + slots_) - v);
      g.data()[i] = static_cast<std::uint8_t>(best == tax_.num_classes() ? tax_.ignore_id() : best);
    }
    return g;
  }

 private:
  const ClassTaxonomy &tax_;
  Index size_;
  Index slots_;
  std::vector<std::uint32_t> votes_;
};

} // namespace

ModeMap spatial_mode_map(std::span<const IndexMask> masks, int label, const ClassTaxonomy &taxonomy, Index size) {
  if (masks.empty()) throw NoImagesForLabel("no images for label " + std::to_string(label));
  ModeVotes votes(taxonomy, size);
  for (const auto &m : masks) votes.add(m);
  return {label, static_cast<int>(masks.size()), votes.mode()};
}

ModeMap spatial_mode_map(const SegDataset &ds, int label, const ClassTaxonomy &taxonomy, Index size) {
  ModeVotes votes(taxonomy, size);
  int n = 0;
  for (const auto &s : ds.samples()) {
    if (s.primary_label && *s.primary_label == label) {
      votes.add(load_mask(s));
      ++n;
    }
  }
  if (n == 0) {
    const std::string name = taxonomy.contains(label) ? taxonomy.at(label).name : std::to_string(label);
    throw NoImagesForLabel("no image has primary label '" + name + "'");
  }
  return {label, n, votes.mode()};
}

std::vector<ConsistencyRow> consistency_report(const std::map<std::string, IndexMask> &reference,
                                               const std::map<std::string, std::vector<AnnotatedMask>> &reannotations,
                                               const std::map<std::string, std::string> &annotator_map,
                                               const ClassTaxonomy &taxonomy) {
  std::vector<ConsistencyRow> rows;
  for (const auto &[annotator, masks] : reannotations) {
    ConfusionMatrix total(taxonomy.num_classes()), individual(taxonomy.num_classes());
    ConsistencyRow row;
    row.annotator = annotator;
    for (const auto &am : masks) {
      const auto ref = reference.find(am.name);
      if (ref == reference.end()) throw MisalignedPair(annotator + "/" + am.name + " has no reference mask");
      if (ref->second.rows() != am.mask.rows() || ref->second.cols() != am.mask.cols()) {
        throw MisalignedPair(annotator + "/" + am.name + " differs in size from its reference");
      }
      // Pixels left unlabeled in either mask are not scored.
      IndexMask gt = ref->second;
      for (Index i = 0; i < gt.size(); ++i) {
        if (am.mask.data()[i] == taxonomy.ignore_id()) gt.data()[i] = static_cast<std::uint8_t>(taxonomy.ignore_id());
      }
      total.accumulate(am.mask, gt, taxonomy.ignore_id());
      ++row.total_images;
      const auto orig = annotator_map.find(am.name);
      if (orig != annotator_map.end() && orig->second == annotator) {
        individual.accumulate(am.mask, gt, taxonomy.ignore_id());
        ++row.individual_images;
      }
    }
    if (row.total_images == 0) continue;
    row.total_acc = pixel_acc(total);
    row.total_miou = miou(total);
    if (row.individual_images > 0) {
      row.individual_acc = pixel_acc(individual);
      row.individual_miou = miou(individual);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<ConsistencyRow> consistency_report(const SegDataset &reference, const fs::path &reannotation_root,
                                               const ClassTaxonomy &taxonomy) {
  if (!fs::is_directory(reannotation_root)) {
    throw IoFailure("re-annotation directory not found: " + reannotation_root.string());
  }
  std::map<std::string, IndexMask> ref;
  std::map<std::string, std::string> owners;
  for (const auto &s : reference.samples()) {
    ref[s.name] = load_mask(s);
    if (s.annotator_id) owners[s.name] = *s.annotator_id;
  }
  std::map<std::string, std::vector<AnnotatedMask>> re;
  std::vector<fs::path> dirs;
  for (const auto &e : fs::directory_iterator(reannotation_root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto &d : dirs) {
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(d)) {
      if (e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    auto &list = re[d.filename().string()];
    for (const auto &f : files) list.push_back({f.stem().string(), read_index_mask(f)});
  }
  return consistency_report(ref, re, owners, taxonomy);
}

nlohmann::json to_json(const std::vector<ConsistencyRow> &rows) {
  nlohmann::json out = nlohmann::json::array();
  auto opt = [](const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const auto &r : rows) {
    out.push_back({{"annotator", r.annotator},
                   {"total", {{"images", r.total_images}, {"acc", r.total_acc}, {"miou", r.total_miou}}},
                   {"individual",
                    {{"images", r.individual_images}, {"acc", opt(r.individual_acc)}, {"miou", opt(r.individual_miou)}}}});
  }
  return out;
}

std::string render_consistency_table(const std::vector<ConsistencyRow> &rows) {
  std::vector<std::vector<std::string>> t = {{"", "Total acc", "Total mIoU", "Individual acc", "Individual mIoU"}};
  for (const auto &r : rows) {
    t.push_back({r.annotator, fmt_pct(r.total_acc), fmt_pct(r.total_miou), fmt_pct(r.individual_acc),
                 fmt_pct(r.individual_miou)});
  }
  std::vector<std::size_t> w(t[0].size(), 0);
  for (const auto &row : t)
    for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], row[i].size());
  std::ostringstream os;
  for (const auto &row : t) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        os << row[i] << std::string(w[i] - row[i].size(), ' ');
      } else {
        os << " | " << std::string(w[i] - row[i].size(), ' ') << row[i];
      }
    }
    os << '\n';
  }
  return os.str();
}

} // namespace aquanet
