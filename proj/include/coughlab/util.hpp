#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "coughlab/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts are unsupported");

namespace coughlab::util {

// FNV-1a 64-bit, used as the integrity checksum in binary containers.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t state = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        state ^= p[i];
        state *= 0x100000001b3ull;
    }
    return state;
}

// splitmix64 step; chains (base, salt...) into independent RNG stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

template <typename... Salts>
std::uint64_t derive_seed(std::uint64_t base, Salts... salts) {
    std::uint64_t s = mix_seed(base);
    ((s = mix_seed(s ^ static_cast<std::uint64_t>(salts))), ...);
    return s;
}

// Shortest round-trip decimal rendering; keeps text outputs reproducible.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

// Splits one CSV record; handles doubled-quote escapes, not embedded newlines.
inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline void write_bytes(std::ostream& os, const void* data, std::size_t len) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(os, &value, sizeof(T));
}

inline void read_bytes(std::istream& is, void* data, std::size_t len, const char* what) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(is.gcount()) != len)
        throw DataError(std::string("unexpected end of file while reading ") + what);
}

template <typename T>
T read_le(std::istream& is, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value;
    read_bytes(is, &value, sizeof(T), what);
    return value;
}

}  // namespace coughlab::util
