#ifndef AQUANET_METRICS_HPP_
#define AQUANET_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aquanet/image.hpp"
#include "aquanet/taxonomy.hpp"

namespace aquanet {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// counts(g, p): pixels with ground truth g predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void accumulate(const IndexMask &pred, const IndexMask &gt, int ignore_id);
  void add(int gt, int pred, std::int64_t n = 1);
  void merge(const ConfusionMatrix &other);

  int num_classes() const { return k_; }
  const CountMatrix &counts() const { return counts_; }
  std::int64_t ignored_pixels() const { return ignored_; }
  std::int64_t counted_pixels() const { return counts_.sum(); }

  bool operator==(const ConfusionMatrix &) const = default;

 private:
  int k_;
  CountMatrix counts_;
  std::int64_t ignored_ = 0;
};

/// Correct / total over pixels whose ground truth lies in `subset` (all if empty).
double pixel_acc(const ConfusionMatrix &cm, std::span<const int> subset = {});

/// IoU per class; nullopt where TP + FP + FN == 0.
std::vector<std::optional<double>> class_iou(const ConfusionMatrix &cm);

/// Mean IoU over classes in `subset` (all if empty) with a nonzero union.
double miou(const ConfusionMatrix &cm, std::span<const int> subset = {});

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PrfReport {
  Prf weighted;
  std::vector<Prf> per_class;
  std::vector<std::int64_t> support;
  double accuracy = 0.0;
};

/// Support-weighted precision / recall / F1; 0/0 counts as 0.
PrfReport weighted_prf(std::span<const int> truth, std::span<const int> pred, int num_classes);

/// Evaluation summary in the layout of the per-category results table.
struct MetricsReport {
  ConfusionMatrix cm{1};
  std::vector<std::string> class_names;
  std::vector<int> aquatic_ids;
  std::vector<std::optional<double>> iou;
  double acc = 0.0;
  double miou = 0.0;
  std::optional<double> a_acc;
  std::optional<double> a_miou;
};

MetricsReport make_report(const ConfusionMatrix &cm, const ClassTaxonomy &taxonomy);
nlohmann::json to_json(const MetricsReport &r);
/// Aquatic IoU columns in alphabetical order, then A-acc, A-mIoU, acc, mIoU (percent).
std::string render_table(const MetricsReport &r, const std::string &row_label = "model");

} // namespace aquanet

#endif // AQUANET_METRICS_HPP_
