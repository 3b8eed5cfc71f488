#include "aquanet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace aquanet {
namespace {

constexpr char kMagic[8] = {'A', 'Q', 'N', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream &out) : out_(out) {}
  template <typename T>
  void pod(const T &v) {
    out_.write(reinterpret_cast<const char *>(&v), sizeof(T));
  }
  void str(const std::string &s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream &out_;
};

class Reader {
 public:
  Reader(std::ifstream &in, const std::filesystem::path &path) : in_(in), path_(path) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char *>(&v), sizeof(T));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) throw CheckpointError(path_.string() + ": implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  void raw(char *dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    check();
  }

 private:
  void check() {
    if (!in_) throw CheckpointError(path_.string() + ": truncated checkpoint");
  }
  std::ifstream &in_;
  const std::filesystem::path &path_;
};

} // namespace

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.pod(Checkpoint::kVersion);
  w.str(ckpt.kind);
  w.str(ckpt.config.dump());
  w.pod(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto &[name, m] : ckpt.tensors) {
    w.str(name);
    w.pod(static_cast<std::uint64_t>(m.rows()));
    w.pod(static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char *>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw IoFailure("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path.string());
  Reader r(in, path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw CheckpointError(path.string() + ": not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError(path.string() + ": unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.kind = r.str();
  try {
    c.config = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(path.string() + ": bad config block: " + e.what());
  }
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (rows * cols > (1ULL << 30)) throw CheckpointError(path.string() + ": implausible tensor size");
    Matrix<double> m(static_cast<Index>(rows), static_cast<Index>(cols));
    r.raw(reinterpret_cast<char *>(m.data()), m.size() * sizeof(double));
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  return c;
}

} // namespace aquanet
