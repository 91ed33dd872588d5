#pragma once

// Little-endian binary stream helpers shared by the file-format readers and
// writers. Private to the library.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "loopdet/errors.hpp"

namespace loopdet::binio {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

template <typename UInt>
void write_uint(std::ostream& out, UInt v) {
    std::array<char, sizeof(UInt)> buf;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(buf.data(), buf.size());
}

template <typename UInt>
UInt read_uint(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(UInt)> buf;
    if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        throw FormatError(std::string("truncated file while reading ") + what);
    }
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        v |= static_cast<UInt>(buf[i]) << (8 * i);
    }
    return v;
}

inline void write_u16(std::ostream& out, std::uint16_t v) { write_uint(out, v); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_uint(out, v); }
inline void write_i32(std::ostream& out, std::int32_t v) {
    write_uint(out, static_cast<std::uint32_t>(v));
}
inline void write_f32(std::ostream& out, float v) {
    write_uint(out, std::bit_cast<std::uint32_t>(v));
}
inline void write_f64(std::ostream& out, double v) {
    write_uint(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint16_t read_u16(std::istream& in, const char* what) {
    return read_uint<std::uint16_t>(in, what);
}
inline std::uint32_t read_u32(std::istream& in, const char* what) {
    return read_uint<std::uint32_t>(in, what);
}
inline std::int32_t read_i32(std::istream& in, const char* what) {
    return static_cast<std::int32_t>(read_uint<std::uint32_t>(in, what));
}
inline float read_f32(std::istream& in, const char* what) {
    return std::bit_cast<float>(read_uint<std::uint32_t>(in, what));
}
inline double read_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(read_uint<std::uint64_t>(in, what));
}

inline void write_magic(std::ostream& out, const char magic[4]) {
    out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char* magic, const char* what) {
    char buf[4];
    if (!in.read(buf, 4)) {
        throw FormatError(std::string("truncated file while reading ") + what + " magic");
    }
    if (std::memcmp(buf, magic, 4) != 0) {
        throw FormatError(std::string("bad magic for ") + what + " (expected " + magic + ")");
    }
}

inline void expect_eof(std::istream& in, const char* what) {
    char c;
    if (in.read(&c, 1)) {
        throw FormatError(std::string("trailing bytes after ") + what + " payload");
    }
}

}  // namespace loopdet::binio
