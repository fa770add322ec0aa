#pragma once

#include <filesystem>

#include "json.hpp"

#include "dyhsl/dataio.hpp"
#include "dyhsl/multiscale.hpp"
#include "dyhsl/params.hpp"

namespace dyhsl {

/// Everything needed to rebuild a trained forecaster except the road network.
struct Checkpoint {
  ModelConfig config;
  ModelParameters params;
  NormStats stats;
  /// Free-form metadata (training options, seed, ...).
  nlohmann::json extra = nlohmann::json::object();
};

// Layout: "DYHSLCKP", u32 version, u64 header length, JSON header
// {"config", "norm", "extra"}, u64 tensor count, then per tensor
// u32 name length, name, u32 rank, u64 dims, f64 values. Little endian.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws FormatError on a malformed file and DimensionError when the stored
/// tensors do not match the stored configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);

}  // namespace dyhsl
