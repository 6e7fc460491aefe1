#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "forgetbench/autodiff.hpp"

namespace forgetbench {

/// Binary layout (all integers and reals little-endian):
///   "FBPV" | u32 version | u32 n_meta | n_meta x (str key, str value)
///   | u32 n_arrays | n_arrays x (str name, u64 rows, u64 cols, rows*cols f64)
/// where str is u32 length + bytes. A textual manifest describing the same
/// content is written next to the binary as "<path>.manifest".
inline constexpr std::uint32_t kParamFormatVersion = 1;

struct ParamFile {
  ad::ParamVector params;
  std::map<std::string, std::string> metadata;
};

void write_param_file(const std::filesystem::path& path, const ParamFile& file);
ParamFile read_param_file(const std::filesystem::path& path);

/// Round-trippable text for doubles ("%.17g").
std::string format_exact(double value);

}  // namespace forgetbench
