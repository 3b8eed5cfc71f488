#ifndef AQUANET_CHECKPOINT_HPP_
#define AQUANET_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aquanet/errors.hpp"
#include "aquanet/layers.hpp"

namespace aquanet {

/*
 * Binary container shared by every model kind:
 *   "AQNTCKPT" | u32 version | str kind | str config-json | u32 n |
 *   n x (str name | u64 rows | u64 cols | f64[rows*cols] column-major)
 * where str is u64 length + bytes; integers and doubles are little-endian.
 */
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  nlohmann::json config;
  std::vector<std::pair<std::string, Matrix<double>>> tensors;
};

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

template <typename Scalar>
Checkpoint make_checkpoint(std::string kind, nlohmann::json config, const ParamList<Scalar> &params) {
  Checkpoint c{std::move(kind), std::move(config), {}};
  for (const auto *p : params) c.tensors.emplace_back(p->name, p->value.template cast<double>());
  return c;
}

/// Copies values by name; every parameter must be present with matching shape.
template <typename Scalar>
void apply_checkpoint(const Checkpoint &ckpt, const ParamList<Scalar> &params) {
  if (ckpt.tensors.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  for (auto *p : params) {
    const Matrix<double> *src = nullptr;
    for (const auto &[name, m] : ckpt.tensors) {
      if (name == p->name) src = &m;
    }
    if (!src) throw CheckpointError("missing tensor " + p->name);
    if (src->rows() != p->value.rows() || src->cols() != p->value.cols()) {
      throw CheckpointError("shape mismatch for " + p->name);
    }
    p->value = src->template cast<Scalar>();
  }
}

} // namespace aquanet

#endif // AQUANET_CHECKPOINT_HPP_
