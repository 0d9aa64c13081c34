#pragma once

#include <map>
#include <string>

#include "d3as/tensor.hpp"

namespace d3as::nn {

// Single-file checkpoint: 8-byte magic, format version, a JSON manifest
// (tensor names, shapes, blob offsets, plus free-form string metadata), and
// one little-endian float64 blob. Round-trips are bit exact.
//
// save throws std::runtime_error when the destination is unwritable.
// load throws std::runtime_error on bad magic or version, a manifest that
// does not exactly match the store's tensor names and shapes, or a
// truncated blob.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::map<std::string, std::string>& meta);

std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   ParamStore& store);

// Manifest metadata only, without touching any tensor.
std::map<std::string, std::string> read_checkpoint_meta(
    const std::string& path);

}  // namespace d3as::nn
