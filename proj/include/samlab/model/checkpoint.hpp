#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "samlab/model/params.hpp"

namespace samlab {

/// Single-file archive: all parameter tensors keyed by hierarchical name plus
/// a JSON metadata record. load(save(m)) reproduces identical outputs
/// (parameters are stored as raw little-endian float64).
void save_checkpoint(const std::string& path, const ParamRegistry& params, const nlohmann::json& metadata);

/// Loads tensors into an existing registry; throws on missing names or shape
/// mismatches. Returns the stored metadata.
nlohmann::json load_checkpoint(const std::string& path, ParamRegistry& params);

/// Reads only the metadata record.
nlohmann::json peek_checkpoint_metadata(const std::string& path);

}  // namespace samlab
