#include "esprit/weights_io.hpp"

#include <fstream>

namespace esprit {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("missing artifact: " + path);
    json j;
    in >> j;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("missing artifact: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

void write_lines(const std::string& path,
                 const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& l : lines) out << l << '\n';
}

std::string weight_format(const json& j) {
    if (!j.is_object() || !j.contains("format"))
        throw std::runtime_error("weight file lacks a format tag");
    return j.at("format").get<std::string>();
}

}  // namespace esprit
