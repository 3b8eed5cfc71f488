#include "aquanet/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "aquanet/errors.hpp"
#include "aquanet/seed.hpp"

namespace fs = std::filesystem;

namespace aquanet {
namespace {

constexpr const char *kManifestHeader = "name,split,annotator_id,primary_label";

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

fs::path find_image(const fs::path &dir, const std::string &name) {
  for (const char *ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"}) {
    fs::path p = dir / (name + ext);
    if (fs::exists(p)) return p;
  }
  throw IoFailure("no image for '" + name + "' under " + dir.string());
}

std::optional<int> parse_label(const std::string &cell, const std::optional<ClassTaxonomy> &tax) {
  if (cell.empty()) return std::nullopt;
  if (std::all_of(cell.begin(), cell.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::stoi(cell);
  if (!tax) throw IoFailure("primary_label '" + cell + "' is a name but the dataset has no taxonomy.json");
  return tax->id_of(cell);
}

} // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string &s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigInvalid("unknown split '" + s + "'");
}

std::string read_text_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << text;
  if (!out) throw IoFailure("failed writing " + path.string());
}

SegDataset SegDataset::open(const fs::path &root, int label_offset) {
  if (!fs::is_directory(root)) throw IoFailure("dataset directory not found: " + root.string());
  if (label_offset < 0 || label_offset > 255) throw ConfigInvalid("label offset must lie in [0, 255]");
  SegDataset ds;
  ds.root_ = root;
  if (fs::exists(root / "taxonomy.json")) ds.taxonomy_ = load_taxonomy_file(root / "taxonomy.json");

  const fs::path manifest = root / "manifest.csv";
  if (fs::exists(manifest)) {
    std::istringstream in(read_text_file(manifest));
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) throw IoFailure(manifest.string() + ": unexpected header '" + line + "'");
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() != 4) {
        throw IoFailure(manifest.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
      }
      SegSample s;
      s.name = cells[0];
      s.split = parse_split(cells[1]);
      if (!cells[2].empty()) s.annotator_id = cells[2];
      s.primary_label = parse_label(cells[3], ds.taxonomy_);
      s.mask_path = root / "masks" / to_string(s.split) / (s.name + ".png");
      s.image_path = find_image(root / "images" / to_string(s.split), s.name);
      if (!fs::exists(s.mask_path)) throw IoFailure("missing mask " + s.mask_path.string());
      ds.samples_.push_back(std::move(s));
    }
  } else {
    for (Split sp : {Split::train, Split::val, Split::test}) {
      const fs::path dir = root / "masks" / to_string(sp);
      if (!fs::is_directory(dir)) continue;
      std::vector<fs::path> masks;
      for (const auto &e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".png") masks.push_back(e.path());
      }
      std::sort(masks.begin(), masks.end());
      for (const auto &m : masks) {
        SegSample s;
        s.name = m.stem().string();
        s.split = sp;
        s.mask_path = m;
        s.image_path = find_image(root / "images" / to_string(sp), s.name);
        ds.samples_.push_back(std::move(s));
      }
    }
  }
  const int ignore = ds.taxonomy_ ? ds.taxonomy_->ignore_id() : ClassTaxonomy::kDefaultIgnoreId;
  for (auto &s : ds.samples_) {
    s.label_offset = label_offset;
    s.ignore_id = ignore;
  }
  return ds;
}

std::vector<SegSample> SegDataset::split(Split s) const {
  std::vector<SegSample> out;
  for (const auto &x : samples_) {
    if (x.split == s) out.push_back(x);
  }
  return out;
}

const ClassTaxonomy &SegDataset::taxonomy_or(const ClassTaxonomy &fallback) const {
  return taxonomy_ ? *taxonomy_ : fallback;
}

std::string SegDataset::content_hash() const {
  const fs::path fixture = root_ / "fixture.json";
  if (fs::exists(fixture)) {
    const auto doc = nlohmann::json::parse(read_text_file(fixture));
    if (doc.contains("content_hash")) return doc["content_hash"].get<std::string>();
  }
  return compute_content_hash(root_);
}

IndexMask load_mask(const SegSample &s) {
  IndexMask m = read_index_mask(s.mask_path);
  if (s.label_offset != 0) {
    const int off = s.label_offset;
    m = m.unaryExpr([&](std::uint8_t v) {
      return static_cast<std::uint8_t>(v < off ? s.ignore_id : v - off);
    });
  }
  return m;
}
RgbImage load_image(const SegSample &s) { return read_rgb(s.image_path); }

void write_manifest(const fs::path &root, const std::vector<SegSample> &samples, const ClassTaxonomy *taxonomy) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto &s : samples) {
    out << s.name << ',' << to_string(s.split) << ',' << s.annotator_id.value_or("") << ',';
    if (s.primary_label) {
      if (taxonomy) {
        out << taxonomy->at(*s.primary_label).name;
      } else {
        out << *s.primary_label;
      }
    }
    out << '\n';
  }
  write_text_file(root / "manifest.csv", out.str());
}

std::string compute_content_hash(const fs::path &root, const std::vector<std::string> &extra_dirs) {
  std::vector<fs::path> files;
  std::vector<std::string> dirs = {"images", "masks"};
  dirs.insert(dirs.end(), extra_dirs.begin(), extra_dirs.end());
  for (const auto &d : dirs) {
    if (!fs::is_directory(root / d)) continue;
    for (const auto &e : fs::recursive_directory_iterator(root / d)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
    }
  }
  for (const char *f : {"manifest.csv", "taxonomy.json"}) {
    if (fs::exists(root / f)) files.emplace_back(f);
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a64("");
  for (const auto &f : files) {
    h = fnv1a64(f.generic_string(), h);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(read_text_file(root / f), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace aquanet
