#include "aquanet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "aquanet/errors.hpp"

namespace aquanet {
namespace {

std::vector<int> scope(const ConfusionMatrix &cm, std::span<const int> subset) {
  std::vector<int> ids;
  if (subset.empty()) {
    for (int c = 0; c < cm.num_classes(); ++c) ids.push_back(c);
  } else {
    for (int c : subset) {
      if (c < 0 || c >= cm.num_classes()) throw IdOutOfRange("class " + std::to_string(c) + " in subset");
      ids.push_back(c);
    }
  }
  return ids;
}

std::string pct(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

} // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes <= 0) throw ConfigInvalid("confusion matrix needs at least one class");
  counts_ = CountMatrix::Zero(num_classes, num_classes);
}

void ConfusionMatrix::accumulate(const IndexMask &pred, const IndexMask &gt, int ignore_id) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw ShapeMismatch("prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                        " vs ground truth " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()));
  }
  // Validate first so a failed call leaves the matrix untouched.
  for (Index i = 0; i < gt.size(); ++i) {
    const int g = gt.data()[i], p = pred.data()[i];
    if (g != ignore_id && g >= k_) throw IdOutOfRange("ground-truth id " + std::to_string(g));
    if (g != ignore_id && p >= k_) throw IdOutOfRange("predicted id " + std::to_string(p));
  }
  for (Index i = 0; i < gt.size(); ++i) {
    const int g = gt.data()[i];
    if (g == ignore_id) {
      ++ignored_;
    } else {
      ++counts_(g, pred.data()[i]);
    }
  }
}

void ConfusionMatrix::add(int gt, int pred, std::int64_t n) {
  if (gt < 0 || gt >= k_ || pred < 0 || pred >= k_) {
    throw IdOutOfRange("pair (" + std::to_string(gt) + ", " + std::to_string(pred) + ")");
  }
  counts_(gt, pred) += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix &other) {
  if (other.k_ != k_) throw ShapeMismatch("merging confusion matrices of different class counts");
  counts_ += other.counts_;
  ignored_ += other.ignored_;
}

double pixel_acc(const ConfusionMatrix &cm, std::span<const int> subset) {
  std::int64_t correct = 0, total = 0;
  for (int c : scope(cm, subset)) {
    correct += cm.counts()(c, c);
    total += cm.counts().row(c).sum();
  }
  if (total == 0) throw EmptyScope("no ground-truth pixels in scope");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<std::optional<double>> class_iou(const ConfusionMatrix &cm) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(cm.num_classes()));
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::int64_t tp = cm.counts()(c, c);
    const std::int64_t uni = cm.counts().row(c).sum() + cm.counts().col(c).sum() - tp;
    if (uni > 0) out[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double miou(const ConfusionMatrix &cm, std::span<const int> subset) {
  const auto iou = class_iou(cm);
  double sum = 0.0;
  int n = 0;
  for (int c : scope(cm, subset)) {
    if (const auto &v = iou[static_cast<std::size_t>(c)]) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) throw EmptyScope("no class in scope has a nonzero union");
  return sum / n;
}

PrfReport weighted_prf(std::span<const int> truth, std::span<const int> pred, int num_classes) {
  if (truth.size() != pred.size()) {
    throw LengthMismatch(std::to_string(truth.size()) + " labels vs " + std::to_string(pred.size()) + " predictions");
  }
  if (truth.empty()) throw LengthMismatch("no labels");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
  const CountMatrix &m = cm.counts();

  PrfReport r;
  r.per_class.resize(static_cast<std::size_t>(num_classes));
  r.support.resize(static_cast<std::size_t>(num_classes));
  const double n = static_cast<double>(truth.size());
  for (int c = 0; c < num_classes; ++c) {
    const double tp = static_cast<double>(m(c, c));
    const double predicted = static_cast<double>(m.col(c).sum());
    const double actual = static_cast<double>(m.row(c).sum());
    Prf &p = r.per_class[static_cast<std::size_t>(c)];
    p.precision = predicted > 0 ? tp / predicted : 0.0;
    p.recall = actual > 0 ? tp / actual : 0.0;
    p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    r.support[static_cast<std::size_t>(c)] = m.row(c).sum();
    r.weighted.precision += actual * p.precision / n;
    r.weighted.recall += actual * p.recall / n;
    r.weighted.f1 += actual * p.f1 / n;
  }
  r.accuracy = static_cast<double>(m.trace()) / n;
  return r;
}

MetricsReport make_report(const ConfusionMatrix &cm, const ClassTaxonomy &taxonomy) {
  if (cm.num_classes() != taxonomy.num_classes()) throw ShapeMismatch("confusion matrix / taxonomy class count");
  MetricsReport r;
  r.cm = cm;
  for (const auto &c : taxonomy.classes()) r.class_names.push_back(c.name);
  r.aquatic_ids = taxonomy.aquatic_ids();
  r.iou = class_iou(cm);
  r.acc = pixel_acc(cm);
  r.miou = miou(cm);
  if (!r.aquatic_ids.empty()) {
    try {
      r.a_acc = pixel_acc(cm, r.aquatic_ids);
    } catch (const EmptyScope &) {
    }
    try {
      r.a_miou = miou(cm, r.aquatic_ids);
    } catch (const EmptyScope &) {
    }
  }
  return r;
}

nlohmann::json to_json(const MetricsReport &r) {
  nlohmann::json j;
  auto opt = [](const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["acc"] = r.acc;
  j["miou"] = r.miou;
  j["a_acc"] = opt(r.a_acc);
  j["a_miou"] = opt(r.a_miou);
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) per[r.class_names[c]] = opt(r.iou[c]);
  j["class_iou"] = per;
  std::vector<std::string> aq;
  for (int id : r.aquatic_ids) aq.push_back(r.class_names[static_cast<std::size_t>(id)]);
  j["aquatic_classes"] = aq;
  j["counted_pixels"] = r.cm.counted_pixels();
  j["ignored_pixels"] = r.cm.ignored_pixels();
  std::vector<std::vector<std::int64_t>> counts;
  for (Index g = 0; g < r.cm.counts().rows(); ++g) {
    counts.emplace_back(r.cm.counts().row(g).begin(), r.cm.counts().row(g).end());
  }
  j["confusion"] = counts;
  return j;
}

std::string render_table(const MetricsReport &r, const std::string &row_label) {
  std::vector<int> cols = r.aquatic_ids;
  std::sort(cols.begin(), cols.end(), [&](int a, int b) {
    return r.class_names[static_cast<std::size_t>(a)] < r.class_names[static_cast<std::size_t>(b)];
  });
  std::vector<std::string> head{""}, row{row_label};
  for (int c : cols) {
    head.push_back(r.class_names[static_cast<std::size_t>(c)]);
    row.push_back(pct(r.iou[static_cast<std::size_t>(c)]));
  }
  head.insert(head.end(), {"A-acc", "A-mIoU", "acc", "mIoU"});
  row.insert(row.end(), {pct(r.a_acc), pct(r.a_miou), pct(r.acc), pct(r.miou)});

  std::ostringstream os;
  for (const auto *line : {&head, &row}) {
    for (std::size_t i = 0; i < line->size(); ++i) {
      const std::size_t w = std::max(head[i].size(), row[i].size());
      std::string cell = (*line)[i];
      if (i == 0) {
        os << cell << std::string(w - cell.size(), ' ');
      } else {
        os << " | " << std::string(w - cell.size(), ' ') << cell;
      }
    }
    os << '\n';
  }
  return os.str();
}

} // namespace aquanet
