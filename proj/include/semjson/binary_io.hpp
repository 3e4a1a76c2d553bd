#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "semjson/common.hpp"

namespace semjson::binio {

// Little-endian encoding regardless of host order.

inline void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b.data(), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b.data(), 8);
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_f32(std::ostream& out, std::span<const float> values) {
    std::vector<char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int k = 0; k < 4; ++k) buf[i * 4 + k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

/// Reader that names the field being read in every error.
class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    void bytes(char* dst, std::size_t n, const char* field) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw LoadError(source_ + ": truncated while reading " + field);
    }

    std::uint32_t u32(const char* field) {
        unsigned char b[4];
        bytes(reinterpret_cast<char*>(b), 4, field);
        return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
    }

    std::uint64_t u64(const char* field) {
        std::uint64_t lo = u32(field);
        std::uint64_t hi = u32(field);
        return lo | hi << 32;
    }

    std::string string(const char* field, std::uint32_t max_len = 1U << 20) {
        std::uint32_t n = u32(field);
        if (n > max_len) throw LoadError(source_ + ": implausible length for " + field);
        std::string s(n, '\0');
        if (n > 0) bytes(s.data(), n, field);
        return s;
    }

    void f32(std::span<float> dst, const char* field) {
        std::vector<unsigned char> buf(dst.size() * 4);
        bytes(reinterpret_cast<char*>(buf.data()), buf.size(), field);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            std::uint32_t bits = std::uint32_t{buf[i * 4]} | std::uint32_t{buf[i * 4 + 1]} << 8 |
                                 std::uint32_t{buf[i * 4 + 2]} << 16 | std::uint32_t{buf[i * 4 + 3]} << 24;
            dst[i] = std::bit_cast<float>(bits);
        }
    }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw LoadError(source_ + ": trailing bytes after payload");
    }

    const std::string& source() const noexcept { return source_; }

private:
    std::istream& in_;
    std::string source_;
};

}  // namespace semjson::binio
