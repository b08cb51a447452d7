#pragma once

#include <map>
#include <string>

#include "quite/param_store.hpp"

namespace quite {

/// Two-file checkpoint: `<base>.manifest` (text: metadata lines and one line
/// per parameter with offset and shape) and `<base>.bin` (little-endian
/// float64, parameters in manifest order).
void save_checkpoint(const std::string& base, const ParamStore& params,
                     const std::map<std::string, std::string>& meta);

/// Reads only the metadata block of a manifest.
std::map<std::string, std::string> read_checkpoint_meta(const std::string& base);

/// Copies stored values into `params`. Every name must exist on both sides
/// with identical shapes; throws ValidationError otherwise. Returns metadata.
std::map<std::string, std::string> load_checkpoint(const std::string& base, ParamStore& params);

}  // namespace quite
