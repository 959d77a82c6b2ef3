#pragma once

// Internal little-endian (de)serialization helpers shared by the binary file
// formats (graph datasets, checkpoints).

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "cangat/error.hpp"

namespace cangat::wire {

inline void put_u16(std::ostream& out, std::uint16_t v) {
    char b[2] = {char(v & 0xFF), char((v >> 8) & 0xFF)};
    out.write(b, 2);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

inline void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline void put_str(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), std::streamsize(s.size()));
}

[[noreturn]] inline void truncated(const char* what) {
    raise(Errc::CorruptCheckpoint, std::string(what) + ": file truncated");
}

inline std::uint16_t get_u16(std::istream& in, const char* what) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) truncated(what);
    return std::uint16_t(b[0] | (std::uint16_t(b[1]) << 8));
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) truncated(what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) truncated(what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in, const char* what) {
    std::uint64_t bits = get_u64(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::string get_str(std::istream& in, const char* what, std::uint64_t max_len = 1u << 24) {
    const std::uint64_t len = get_u64(in, what);
    if (len > max_len) raise(Errc::CorruptCheckpoint, std::string(what) + ": string too long");
    std::string s(len, '\0');
    in.read(s.data(), std::streamsize(len));
    if (!in) truncated(what);
    return s;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

} // namespace cangat::wire
