#ifndef AQUANET_ANALYTICS_HPP_
#define AQUANET_ANALYTICS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aquanet/dataset.hpp"
#include "aquanet/metrics.hpp"

namespace aquanet {

struct ClassFrequency {
  std::int64_t image_count = 0;
  std::int64_t pixels = 0;
  double pixel_fraction = 0.0;
};

struct LabelStats {
  std::size_t num_images = 0;
  std::int64_t total_pixels = 0;
  std::int64_t unlabeled_pixels = 0;
  double unlabeled_fraction = 0.0;
  std::vector<ClassFrequency> per_class;
  std::map<ClassGroup, double> group_fraction;
  double aquatic_fraction = 0.0;
  /// artificial + natural groups.
  double waterbody_fraction = 0.0;
};

/// Streaming tally; merge() is associative so shards can be combined.
class LabelTally {
 public:
  explicit LabelTally(const ClassTaxonomy &taxonomy);
  void add(const IndexMask &mask);
  void merge(const LabelTally &other);
  LabelStats finish() const;

 private:
  const ClassTaxonomy *taxonomy_;
  std::size_t images_ = 0;
  std::int64_t unlabeled_ = 0;
  std::vector<std::int64_t> pixels_;
  std::vector<std::int64_t> images_with_;
};

/// Throws EmptyDataset.
LabelStats label_frequency(std::span<const IndexMask> masks, const ClassTaxonomy &taxonomy);
LabelStats label_frequency(const SegDataset &ds, const ClassTaxonomy &taxonomy);
nlohmann::json to_json(const LabelStats &s, const ClassTaxonomy &taxonomy);
std::string stats_to_csv(const LabelStats &s, const ClassTaxonomy &taxonomy);

/// Throws DegenerateVariance (fewer than two points or zero variance).
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson over classes that occur in at least one image.
double frequency_pixel_correlation(const LabelStats &s);

struct ModeMap {
  int label = 0;
  int n_images = 0;
  IndexMask grid;
};

inline constexpr Index kModeMapSize = 512;

/// Per-cell modal id after nearest resizing; ties go to the lowest id and
/// ignore_id votes like any other value. Throws NoImagesForLabel.
ModeMap spatial_mode_map(std::span<const IndexMask> masks, int label, const ClassTaxonomy &taxonomy,
                         Index size = kModeMapSize);
ModeMap spatial_mode_map(const SegDataset &ds, int label, const ClassTaxonomy &taxonomy,
                         Index size = kModeMapSize);

struct ConsistencyRow {
  std::string annotator;
  int total_images = 0;
  double total_acc = 0.0;
  double total_miou = 0.0;
  int individual_images = 0;
  std::optional<double> individual_acc;
  std::optional<double> individual_miou;
};

struct AnnotatedMask {
  std::string name;
  IndexMask mask;
};

/*
 * reference: the ground truth per image name.
 * reannotations: annotator -> that annotator's masks for (a subset of) the images.
 * annotator_map: image name -> annotator who produced the reference mask.
 * Pixels unlabeled in either mask are not scored.
 * Throws MisalignedPair for unknown names or shape differences.
 */
std::vector<ConsistencyRow> consistency_report(const std::map<std::string, IndexMask> &reference,
                                               const std::map<std::string, std::vector<AnnotatedMask>> &reannotations,
                                               const std::map<std::string, std::string> &annotator_map,
                                               const ClassTaxonomy &taxonomy);

/// Reads root/reannotations/<annotator>/<name>.png alongside the reference dataset.
std::vector<ConsistencyRow> consistency_report(const SegDataset &reference, const std::filesystem::path &reannotation_root,
                                               const ClassTaxonomy &taxonomy);

nlohmann::json to_json(const std::vector<ConsistencyRow> &rows);
/// Annotators as rows; Total and Individual acc / mIoU in percent.
std::string render_consistency_table(const std::vector<ConsistencyRow> &rows);

} // namespace aquanet

#endif // AQUANET_ANALYTICS_HPP_
