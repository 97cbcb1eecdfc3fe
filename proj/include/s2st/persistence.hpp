#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2st/config.hpp"
#include "s2st/corpus.hpp"
#include "s2st/discriminator.hpp"
#include "s2st/generator.hpp"
#include "s2st/nhsmm.hpp"
#include "s2st/template_pool.hpp"

namespace s2st {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType { f64, f32 };

struct NamedArray {
  std::string name;
  Matrix value;
  DType dtype = DType::f64;
};

// File layout: "S2ST", u32 LE version, u64 LE manifest length, JSON manifest,
// then the arrays as row-major little-endian IEEE-754 in manifest order.
struct Checkpoint {
  std::vector<NamedArray> arrays;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> vocab;
  std::string rng_state;
  nlohmann::json extras = nlohmann::json::object();

  const NamedArray* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Appends every array of `params` (visit order) under `prefix`.
template <class P>
void add_arrays(Checkpoint& ckpt, const std::string& prefix, P& params, DType dtype = DType::f64) {
  params.visit([&](const std::string& name, Matrix& m) { ckpt.arrays.push_back({prefix + name, m, dtype}); });
}

// Fills `params` (already shaped) from the checkpoint. Missing names or
// shape mismatches raise CorruptCheckpoint.
void read_array(const Checkpoint& ckpt, const std::string& name, Matrix& out);
template <class P>
void read_arrays(const Checkpoint& ckpt, const std::string& prefix, P& params) {
  params.visit([&](const std::string& name, Matrix& m) { read_array(ckpt, prefix + name, m); });
}

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& s);

nlohmann::json dims_to_json(const HsmmDims& d);
HsmmDims hsmm_dims_from_json(const nlohmann::json& j);
nlohmann::json dims_to_json(const DiscDims& d);
DiscDims disc_dims_from_json(const nlohmann::json& j);

nlohmann::json pool_to_json(const TemplatePool& pool);
TemplatePool pool_from_json(const nlohmann::json& j);

// Everything a pipeline stage hands to the next one.
struct ModelBundle {
  TrainConfig config;
  Vocab vocab;
  std::optional<HsmmParams> hsmm;
  std::optional<GeneratorParams> generator;
  std::optional<DiscriminatorParams> discriminator;
  std::optional<TemplatePool> pool;
  std::string rng_state;
  nlohmann::json extras = nlohmann::json::object();
};

Checkpoint to_checkpoint(const ModelBundle& bundle);
ModelBundle from_checkpoint(const Checkpoint& ckpt);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace s2st
