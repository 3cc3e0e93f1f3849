#pragma once

// Command-line front end: render, video, bench, export-map, serve.
//
// Exit codes: 0 success, 1 invalid arguments, config or input content,
// 2 file I/O failure.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "spv/pipeline.hpp"

namespace spv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

/// Reads a config file, applies "dotted.path=value" overrides in order and
/// parses the result. A relative preprocess.mask_path is resolved against the
/// config file's directory; the mask itself is not loaded here.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides);

/// Mask for an input named `input_name`. A mask_path naming a directory holds
/// one mask per input, matched by file name; a file is used for every input.
Frame load_mask(const PipelineConfig& cfg, const std::string& input_name);

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace spv::cli
