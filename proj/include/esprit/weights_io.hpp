#pragma once

#include <string>
#include <vector>

#include "esprit/serialize.hpp"

namespace esprit {

struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Throws MissingArtifact naming the path when the file is absent.
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path,
                 const std::vector<std::string>& lines);

// The "format" tag of a versioned weight file, e.g. "mlp-v1".
std::string weight_format(const json& j);

}  // namespace esprit
