#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gse/error.hpp"
#include "gse/signal.hpp"

namespace gse::audio {

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Parses a 16-bit PCM mono little-endian RIFF/WAVE image.
[[nodiscard]] inline Signal parse_wav(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw FormatError("wav: missing RIFF/WAVE header");
    }
    bool have_fmt = false;
    int rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* h = bytes.data() + pos;
        const std::uint32_t size = detail::read_u32(h + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw FormatError("wav: truncated chunk");
        if (std::memcmp(h, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError("wav: fmt chunk too short");
            const unsigned char* f = bytes.data() + body;
            const std::uint16_t format = detail::read_u16(f);
            const std::uint16_t channels = detail::read_u16(f + 2);
            rate = static_cast<int>(detail::read_u32(f + 4));
            const std::uint16_t bits = detail::read_u16(f + 14);
            if (format != 1) throw UnsupportedFormatError("wav: only PCM is supported (format " + std::to_string(format) + ")");
            if (channels != 1) throw UnsupportedFormatError("wav: only mono is supported (" + std::to_string(channels) + " channels)");
            if (bits != 16) throw UnsupportedFormatError("wav: only 16-bit samples are supported");
            if (rate <= 0) throw FormatError("wav: invalid sample rate");
            have_fmt = true;
        } else if (std::memcmp(h, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
            if (size % 2 != 0) throw FormatError("wav: odd data size for 16-bit samples");
            Signal sig;
            sig.sample_rate = rate;
            sig.samples.resize(size / 2);
            for (std::size_t i = 0; i < sig.samples.size(); ++i) {
                const auto v = static_cast<std::int16_t>(detail::read_u16(bytes.data() + body + 2 * i));
                sig.samples[i] = static_cast<double>(v) / 32768.0;
            }
            return sig;
        }
        pos = body + size + (size & 1);
    }
    throw FormatError("wav: no data chunk");
}

[[nodiscard]] inline Signal read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_wav(bytes);
}

/// Encodes as 16-bit PCM mono, rounding to the nearest level and clipping to [-1, 1).
[[nodiscard]] inline std::string encode_wav(const Signal& sig) {
    if (sig.sample_rate <= 0) throw FormatError("wav: invalid sample rate");
    const auto data_size = static_cast<std::uint32_t>(sig.samples.size() * 2);
    std::string out;
    out.reserve(44 + data_size);
    out += "RIFF";
    detail::put_u32(out, 36 + data_size);
    out += "WAVEfmt ";
    detail::put_u32(out, 16);
    detail::put_u16(out, 1);
    detail::put_u16(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(sig.sample_rate));
    detail::put_u32(out, static_cast<std::uint32_t>(sig.sample_rate) * 2);
    detail::put_u16(out, 2);
    detail::put_u16(out, 16);
    out += "data";
    detail::put_u32(out, data_size);
    for (double v : sig.samples) {
        const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
        detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

inline void write_wav(const std::string& path, const Signal& sig) {
    const std::string bytes = encode_wav(sig);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("wav: cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("wav: write failed for " + path);
}

}  // namespace gse::audio
