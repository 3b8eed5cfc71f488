#include "aquanet/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "aquanet/errors.hpp"

namespace aquanet {

std::string_view to_string(ClassGroup g) {
  switch (g) {
  case ClassGroup::artificial: return "artificial";
  case ClassGroup::natural: return "natural";
  case ClassGroup::general: return "general";
  }
  return "general";
}

ClassGroup parse_group(std::string_view s) {
  if (s == "artificial") return ClassGroup::artificial;
  if (s == "natural") return ClassGroup::natural;
  if (s == "general") return ClassGroup::general;
  throw MalformedTaxonomy("unknown group '" + std::string(s) + "'");
}

ClassTaxonomy::ClassTaxonomy(std::string name, std::vector<ClassDef> classes, int ignore_id)
    : name_(std::move(name)), classes_(std::move(classes)), ignore_id_(ignore_id) {
  if (classes_.empty()) throw MalformedTaxonomy("taxonomy has no classes");
  std::sort(classes_.begin(), classes_.end(),
            [](const ClassDef &a, const ClassDef &b) { return a.id < b.id; });
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const ClassDef &c = classes_[i];
    if (i > 0 && classes_[i - 1].id == c.id) {
      throw MalformedTaxonomy("duplicate id " + std::to_string(c.id));
    }
    if (c.id != static_cast<int>(i)) {
      throw MalformedTaxonomy("ids are not contiguous from 0: missing id " + std::to_string(i));
    }
    if (c.name.empty()) throw MalformedTaxonomy("class " + std::to_string(c.id) + " has no name");
    if (std::any_of(c.name.begin(), c.name.end(),
                    [](unsigned char ch) { return std::isupper(ch) != 0; })) {
      throw MalformedTaxonomy("class name '" + c.name + "' is not lowercase");
    }
    if (!names.insert(c.name).second) throw MalformedTaxonomy("duplicate name '" + c.name + "'");
  }
  if (ignore_id_ >= 0 && ignore_id_ < num_classes()) {
    throw MalformedTaxonomy("ignore_id " + std::to_string(ignore_id_) + " collides with a class id");
  }
  if (ignore_id_ < 0 || ignore_id_ > 255 || num_classes() > 255) {
    throw MalformedTaxonomy("ids and ignore_id must fit an 8-bit mask");
  }
}

const ClassDef &ClassTaxonomy::at(int id) const {
  if (!contains(id)) throw MalformedTaxonomy("no class with id " + std::to_string(id));
  return classes_[static_cast<std::size_t>(id)];
}

std::optional<int> ClassTaxonomy::find(std::string_view class_name) const {
  for (const auto &c : classes_) {
    if (c.name == class_name) return c.id;
  }
  return std::nullopt;
}

int ClassTaxonomy::id_of(std::string_view class_name) const {
  if (auto id = find(class_name)) return *id;
  throw MalformedTaxonomy("unknown class '" + std::string(class_name) + "'");
}

std::vector<int> ClassTaxonomy::aquatic_ids() const {
  std::vector<int> out;
  for (const auto &c : classes_) {
    if (c.aquatic) out.push_back(c.id);
  }
  return out;
}

std::vector<int> ClassTaxonomy::group_ids(ClassGroup g) const {
  std::vector<int> out;
  for (const auto &c : classes_) {
    if (c.group == g) out.push_back(c.id);
  }
  return out;
}

ClassTaxonomy load_taxonomy(const nlohmann::json &doc) {
  try {
    std::vector<ClassDef> classes;
    for (const auto &entry : doc.at("classes")) {
      ClassDef c;
      c.id = entry.at("id").get<int>();
      c.name = entry.at("name").get<std::string>();
      c.group = parse_group(entry.at("group").get<std::string>());
      c.aquatic = entry.at("aquatic").get<bool>();
      classes.push_back(std::move(c));
    }
    return ClassTaxonomy(doc.value("name", std::string("unnamed")), std::move(classes),
                         doc.value("ignore_id", ClassTaxonomy::kDefaultIgnoreId));
  } catch (const nlohmann::json::exception &e) {
    throw MalformedTaxonomy(e.what());
  }
}

ClassTaxonomy load_taxonomy_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open taxonomy file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw MalformedTaxonomy(path.string() + ": " + e.what());
  }
  return load_taxonomy(doc);
}

nlohmann::json taxonomy_to_json(const ClassTaxonomy &tax) {
  nlohmann::json doc;
  doc["name"] = tax.name();
  doc["ignore_id"] = tax.ignore_id();
  doc["classes"] = nlohmann::json::array();
  for (const auto &c : tax.classes()) {
    doc["classes"].push_back(
        {{"id", c.id}, {"name", c.name}, {"group", to_string(c.group)}, {"aquatic", c.aquatic}});
  }
  return doc;
}

void save_taxonomy_file(const ClassTaxonomy &tax, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << taxonomy_to_json(tax).dump(2) << "\n";
}

const ClassTaxonomy &atlantis_taxonomy() {
  static const ClassTaxonomy tax = [] {
    struct Row {
      const char *name;
      ClassGroup group;
    };
    // Group order: artificial, natural, general.
    const Row rows[] = {
        {"breakwater", ClassGroup::artificial}, {"bridge", ClassGroup::artificial},
        {"canal", ClassGroup::artificial}, {"culvert", ClassGroup::artificial},
        {"dam", ClassGroup::artificial}, {"ditch", ClassGroup::artificial},
        {"levee", ClassGroup::artificial}, {"lighthouse", ClassGroup::artificial},
        {"pipeline", ClassGroup::artificial}, {"pier", ClassGroup::artificial},
        {"offshore platform", ClassGroup::artificial}, {"reservoir", ClassGroup::artificial},
        {"ship", ClassGroup::artificial}, {"spillway", ClassGroup::artificial},
        {"swimming pool", ClassGroup::artificial}, {"water tower", ClassGroup::artificial},
        {"water well", ClassGroup::artificial},
        {"cliff", ClassGroup::natural}, {"cypress tree", ClassGroup::natural},
        {"fjord", ClassGroup::natural}, {"flood", ClassGroup::natural},
        {"glaciers", ClassGroup::natural}, {"hot spring", ClassGroup::natural},
        {"lake", ClassGroup::natural}, {"mangrove", ClassGroup::natural},
        {"marsh", ClassGroup::natural}, {"puddle", ClassGroup::natural},
        {"rapids", ClassGroup::natural}, {"river", ClassGroup::natural},
        {"river delta", ClassGroup::natural}, {"sea", ClassGroup::natural},
        {"shoreline", ClassGroup::natural}, {"snow", ClassGroup::natural},
        {"waterfall", ClassGroup::natural}, {"wetland", ClassGroup::natural},
        {"road", ClassGroup::general}, {"sidewalk", ClassGroup::general},
        {"building", ClassGroup::general}, {"wall", ClassGroup::general},
        {"fence", ClassGroup::general}, {"pole", ClassGroup::general},
        {"traffic sign", ClassGroup::general}, {"vegetation", ClassGroup::general},
        {"terrain", ClassGroup::general}, {"sky", ClassGroup::general},
        {"train", ClassGroup::general}, {"person", ClassGroup::general},
        {"car", ClassGroup::general}, {"bus", ClassGroup::general},
        {"truck", ClassGroup::general}, {"bicycle", ClassGroup::general},
        {"parking meter", ClassGroup::general}, {"motorcycle", ClassGroup::general},
        {"fire hydrant", ClassGroup::general}, {"boat", ClassGroup::general},
        {"umbrella", ClassGroup::general},
    };
    // Per-category columns of the aquatic metric subset.
    const std::set<std::string> aquatic = {
        "canal", "ditch", "fjord", "flood", "glaciers", "hot spring", "lake", "puddle", "rapids",
        "reservoir", "river", "river delta", "sea", "snow", "swimming pool", "waterfall", "wetland"};
    std::vector<ClassDef> classes;
    int id = 0;
    for (const auto &r : rows) {
      classes.push_back({id++, r.name, r.group, aquatic.count(r.name) > 0});
    }
    return ClassTaxonomy("atlantis", std::move(classes));
  }();
  return tax;
}

std::vector<int> PathSplit::concatenated() const {
  std::vector<int> out = aquatic;
  out.insert(out.end(), nonaquatic.begin(), nonaquatic.end());
  return out;
}

PathSplit path_split(const ClassTaxonomy &tax) {
  PathSplit split;
  for (const auto &c : tax.classes()) {
    (c.aquatic ? split.aquatic : split.nonaquatic).push_back(c.id);
  }
  split.reassembly.assign(static_cast<std::size_t>(tax.num_classes()), 0);
  const auto order = split.concatenated();
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    split.reassembly[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos);
  }
  return split;
}

} // namespace aquanet
