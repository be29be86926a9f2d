// Binary checkpoints: a JSON manifest followed by little-endian float32 payloads.
//
// Layout: 8-byte magic "VSGAECK1", uint64 manifest length (LE), manifest JSON,
// payload. The manifest lists every tensor as {name, kind, shape, offset,
// step} where kind is "param", "adam_m" or "adam_v" and offset is relative to
// the start of the payload. A free-form "meta" object rides along.
#pragma once

#include <filesystem>

#include "json.hpp"
#include "vsgae/params.hpp"

namespace vsgae::nn {

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Reads only the manifest's meta object.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

/// Restores parameter values and Adam state into an already-built store with
/// identical names and shapes. Returns the meta object.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& store);

}  // namespace vsgae::nn
