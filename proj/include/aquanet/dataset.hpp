#ifndef AQUANET_DATASET_HPP_
#define AQUANET_DATASET_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aquanet/image.hpp"
#include "aquanet/taxonomy.hpp"

namespace aquanet {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string &s);

struct SegSample {
  std::string name;
  Split split = Split::train;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  std::optional<std::string> annotator_id;
  std::optional<int> primary_label;
  /// Stored mask value v maps to v - offset; values below the offset are unlabeled.
  int label_offset = 0;
  int ignore_id = 255;
};

/*
 * On-disk layout:
 *   root/images/<split>/<name>.{png,jpg,jpeg}
 *   root/masks/<split>/<name>.png      8-bit index masks
 *   root/manifest.csv                  name,split,annotator_id,primary_label
 *   root/taxonomy.json                 optional; label space of the masks
 *   root/fixture.json                  optional; generator metadata and content hash
 *
 * Without a manifest the mask directories are scanned and metadata is empty.
 * primary_label is written as a class name or a numeric id.
 *
 * A label offset covers datasets whose stored masks reserve 0 for unlabeled
 * pixels and number classes from 1.
 */
class SegDataset {
 public:
  static SegDataset open(const std::filesystem::path &root, int label_offset = 0);

  const std::filesystem::path &root() const { return root_; }
  const std::vector<SegSample> &samples() const { return samples_; }
  std::vector<SegSample> split(Split s) const;
  /// Taxonomy shipped with the dataset, if any.
  const std::optional<ClassTaxonomy> &taxonomy() const { return taxonomy_; }
  /// Dataset taxonomy or `fallback`.
  const ClassTaxonomy &taxonomy_or(const ClassTaxonomy &fallback) const;
  /// Recorded fixture hash, else a freshly computed one.
  std::string content_hash() const;

 private:
  std::filesystem::path root_;
  std::vector<SegSample> samples_;
  std::optional<ClassTaxonomy> taxonomy_;
};

/// Decoded mask with the sample's label offset applied.
IndexMask load_mask(const SegSample &s);
RgbImage load_image(const SegSample &s);

void write_manifest(const std::filesystem::path &root, const std::vector<SegSample> &samples,
                    const ClassTaxonomy *taxonomy);

/// FNV-1a over the relative paths and bytes of images/, masks/, the manifest
/// and the taxonomy (plus any extra subdirectories given), in sorted order.
std::string compute_content_hash(const std::filesystem::path &root,
                                 const std::vector<std::string> &extra_dirs = {});

/// Whole-file read; IoFailure names the path.
std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

} // namespace aquanet

#endif // AQUANET_DATASET_HPP_
