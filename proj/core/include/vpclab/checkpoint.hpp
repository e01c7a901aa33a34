#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vpclab/params.hpp"

namespace vpclab {

/// On-disk parameter snapshot: `<dir>/manifest.json` lists every tensor's
/// name, shape, dtype, byte offset and length; `<dir>/params.bin` holds the
/// little-endian arrays back to back in manifest (sorted-name) order.
struct Checkpoint {
    std::map<std::string, std::string> metadata;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParamSet<T>& params,
                     const std::map<std::string, std::string>& metadata = {});

/// Accepts the checkpoint directory or its manifest.json. Throws FormatError
/// when the manifest and blob disagree, IoError when files are missing.
template <typename T>
ParamSet<T> load_checkpoint(const std::filesystem::path& path, Checkpoint* info = nullptr);

} // namespace vpclab
