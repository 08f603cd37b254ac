#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughlab/common.hpp"

namespace coughlab::container {

// Key order is preserved so rewrites are byte-identical.
using Json = nlohmann::ordered_json;

struct NamedArray {
    std::string name;
    Matrix data;
};

// On-disk layout: magic, u32 format version, length-prefixed JSON metadata
// (which includes the array directory with shapes), row-major float64 array
// payloads in directory order, trailing FNV-1a 64 checksum of everything
// before it.
struct Blob {
    Json meta = Json::object();
    std::vector<NamedArray> arrays;
};

void write_blob(const std::filesystem::path& path, const Blob& blob);

// Throws VersionError for unknown format versions, ChecksumError when the
// trailing checksum does not match (truncation or corruption), ShapeError
// when the directory and payload disagree.
Blob read_blob(const std::filesystem::path& path);

}  // namespace coughlab::container
