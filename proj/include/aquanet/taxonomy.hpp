#ifndef AQUANET_TAXONOMY_HPP_
#define AQUANET_TAXONOMY_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace aquanet {

enum class ClassGroup { artificial, natural, general };

std::string_view to_string(ClassGroup g);
ClassGroup parse_group(std::string_view s);

struct ClassDef {
  int id = 0;
  std::string name;
  ClassGroup group = ClassGroup::general;
  bool aquatic = false;

  bool operator==(const ClassDef &) const = default;
};

/*
 * Ordered label space. Ids are contiguous 0..K-1; ignore_id marks unlabeled
 * mask pixels and never names a class. Immutable once constructed.
 */
class ClassTaxonomy {
 public:
  static constexpr int kDefaultIgnoreId = 255;

  ClassTaxonomy() = default;
  /// Validates and sorts by id; throws MalformedTaxonomy.
  ClassTaxonomy(std::string name, std::vector<ClassDef> classes, int ignore_id = kDefaultIgnoreId);

  const std::string &name() const { return name_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  int ignore_id() const { return ignore_id_; }
  const std::vector<ClassDef> &classes() const { return classes_; }
  const ClassDef &at(int id) const;
  bool contains(int id) const { return id >= 0 && id < num_classes(); }

  std::optional<int> find(std::string_view class_name) const;
  /// Like find() but throws MalformedTaxonomy when the name is unknown.
  int id_of(std::string_view class_name) const;

  bool is_aquatic(int id) const { return at(id).aquatic; }
  std::vector<int> aquatic_ids() const;
  std::vector<int> group_ids(ClassGroup g) const;

  bool operator==(const ClassTaxonomy &) const = default;

 private:
  std::string name_;
  std::vector<ClassDef> classes_;
  int ignore_id_ = kDefaultIgnoreId;
};

ClassTaxonomy load_taxonomy(const nlohmann::json &doc);
ClassTaxonomy load_taxonomy_file(const std::filesystem::path &path);
nlohmann::json taxonomy_to_json(const ClassTaxonomy &tax);
void save_taxonomy_file(const ClassTaxonomy &tax, const std::filesystem::path &path);

/// The 56-class ATLANTIS label space ordered artificial, natural, general.
const ClassTaxonomy &atlantis_taxonomy();

/*
 * Channel bookkeeping for the two network paths. The aquatic path emits
 * classes in `aquatic` order, the other path in `nonaquatic` order; after
 * concatenation, channel `reassembly[id]` holds class `id`.
 */
struct PathSplit {
  std::vector<int> aquatic;
  std::vector<int> nonaquatic;
  std::vector<int> reassembly;

  std::vector<int> concatenated() const;
};

PathSplit path_split(const ClassTaxonomy &tax);

} // namespace aquanet

#endif // AQUANET_TAXONOMY_HPP_
