#include "coughlab/container.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "coughlab/util.hpp"

namespace coughlab::container {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'H', 'B', 'L', 'O', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_blob(const std::filesystem::path& path, const Blob& blob) {
    Json header = Json::object();
    header["meta"] = blob.meta;
    Json directory = Json::array();
    for (const auto& arr : blob.arrays) {
        if (!arr.data.allFinite())
            throw NumericError("array '" + arr.name + "' contains non-finite values");
        directory.push_back(
            Json{{"name", arr.name}, {"rows", arr.data.rows()}, {"cols", arr.data.cols()}});
    }
    header["arrays"] = std::move(directory);
    const std::string header_text = header.dump();

    std::ostringstream body(std::ios::binary);
    util::write_bytes(body, kMagic, sizeof(kMagic));
    util::write_le<std::uint32_t>(body, kVersion);
    util::write_le<std::uint64_t>(body, header_text.size());
    util::write_bytes(body, header_text.data(), header_text.size());
    for (const auto& arr : blob.arrays)
        for (Index i = 0; i < arr.data.rows(); ++i)
            for (Index j = 0; j < arr.data.cols(); ++j) util::write_le<double>(body, arr.data(i, j));

    const std::string bytes = body.str();
    const std::uint64_t checksum = util::fnv1a64(bytes.data(), bytes.size());

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot create file: " + path.string());
    util::write_bytes(os, bytes.data(), bytes.size());
    util::write_le<std::uint64_t>(os, checksum);
    if (!os) throw DataError("failed writing file: " + path.string());
}

Blob read_blob(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open file: " + path.string());
    std::ostringstream buf(std::ios::binary);
    buf << is.rdbuf();
    const std::string bytes = buf.str();

    if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t))
        throw ChecksumError("file too short to be a valid container: " + path.string());
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a recognized container file: " + path.string());

    const std::size_t payload_len = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored_checksum;
    std::memcpy(&stored_checksum, bytes.data() + payload_len, sizeof(stored_checksum));
    if (util::fnv1a64(bytes.data(), payload_len) != stored_checksum)
        throw ChecksumError("checksum mismatch (truncated or corrupt): " + path.string());

    std::istringstream body(bytes.substr(0, payload_len), std::ios::binary);
    body.ignore(sizeof(kMagic));
    const auto version = util::read_le<std::uint32_t>(body, "container version");
    if (version != kVersion)
        throw VersionError("unknown container version " + std::to_string(version) + " in " +
                           path.string());
    const auto header_len = util::read_le<std::uint64_t>(body, "header length");
    std::string header_text(header_len, '\0');
    util::read_bytes(body, header_text.data(), header_len, "container header");

    Json header;
    try {
        header = Json::parse(header_text);
    } catch (const Json::parse_error& e) {
        throw DataError("container header is not valid JSON: " + std::string(e.what()));
    }
    if (!header.contains("meta") || !header.contains("arrays") || !header["arrays"].is_array())
        throw DataError("container header missing meta/arrays: " + path.string());

    Blob blob;
    blob.meta = header["meta"];
    std::uint64_t expected_doubles = 0;
    for (const auto& entry : header["arrays"]) {
        const auto rows = entry.at("rows").get<std::int64_t>();
        const auto cols = entry.at("cols").get<std::int64_t>();
        if (rows < 0 || cols < 0)
            throw ShapeError("negative array shape for '" +
                             entry.at("name").get<std::string>() + "'");
        expected_doubles += static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
    }
    const std::uint64_t remaining =
        payload_len - sizeof(kMagic) - sizeof(std::uint32_t) - sizeof(std::uint64_t) - header_len;
    if (remaining != expected_doubles * sizeof(double))
        throw ShapeError("container payload does not match its array directory: " + path.string());

    for (const auto& entry : header["arrays"]) {
        NamedArray arr;
        arr.name = entry.at("name").get<std::string>();
        arr.data.resize(entry.at("rows").get<std::int64_t>(), entry.at("cols").get<std::int64_t>());
        for (Index i = 0; i < arr.data.rows(); ++i)
            for (Index j = 0; j < arr.data.cols(); ++j)
                arr.data(i, j) = util::read_le<double>(body, arr.name.c_str());
        blob.arrays.push_back(std::move(arr));
    }
    return blob;
}

}  // namespace coughlab::container
