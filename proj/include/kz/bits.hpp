#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kz/errors.hpp"

namespace kz {

// FNV-1a 64-bit over raw bytes, rendered as 16 lowercase hex digits. Used to
// fingerprint circuits and configs; stable across platforms and runs.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    static const char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int d = 0; d < 16; ++d) s[d] = digits[(h >> (60 - 4 * d)) & 0xf];
    return s;
}

// Bitstrings are packed little-endian: qubit q lives in word q/64, bit q%64.

inline int words_for(int n_bits) { return (n_bits + 63) / 64; }

// Number of adjacent unequal bit pairs (q, q+1), q in [0, n_bits-2].
inline int kink_count(const std::uint64_t* w, int n_bits) {
    int nw = words_for(n_bits);
    int kinks = 0;
    for (int i = 0; i < nw; ++i) {
        int bits_here = n_bits - 64 * i;
        if (bits_here > 64) bits_here = 64;
        std::uint64_t x = w[i] ^ (w[i] >> 1);
        // pairs fully inside this word: bits 0 .. bits_here-2 of x
        std::uint64_t pair_mask = bits_here <= 1 ? 0 : ((~0ull) >> (65 - bits_here));
        kinks += std::popcount(x & pair_mask);
        // pair straddling the word boundary
        if (64 * (i + 1) < n_bits) kinks += static_cast<int>((w[i] >> 63) ^ (w[i + 1] & 1));
    }
    return kinks;
}

// Parity (0/1) of the bits selected by mask.
inline int masked_parity(const std::uint64_t* w, const std::uint64_t* mask, int n_words) {
    std::uint64_t acc = 0;
    for (int i = 0; i < n_words; ++i) acc ^= w[i] & mask[i];
    return std::popcount(acc) & 1;
}

// Fixed-width lowercase hex, most significant word first, so the string
// reads as one big integer with qubit 0 in the least significant bit.
inline std::string to_hex(const std::uint64_t* w, int n_words) {
    static const char digits[] = "0123456789abcdef";
    std::string s(static_cast<std::size_t>(n_words) * 16, '0');
    for (int i = 0; i < n_words; ++i) {
        std::uint64_t v = w[n_words - 1 - i];
        for (int d = 0; d < 16; ++d) s[16 * i + d] = digits[(v >> (60 - 4 * d)) & 0xf];
    }
    return s;
}

inline void from_hex(const std::string& s, std::uint64_t* w, int n_words) {
    if (s.size() != static_cast<std::size_t>(n_words) * 16)
        throw ConfigError("hex field has wrong width: " + s);
    for (int i = 0; i < n_words; ++i) {
        std::uint64_t v = 0;
        for (int d = 0; d < 16; ++d) {
            char c = s[16 * i + d];
            int nib;
            if (c >= '0' && c <= '9') nib = c - '0';
            else if (c >= 'a' && c <= 'f') nib = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') nib = c - 'A' + 10;
            else throw ConfigError("bad hex digit in: " + s);
            v = (v << 4) | static_cast<std::uint64_t>(nib);
        }
        w[n_words - 1 - i] = v;
    }
}

} // namespace kz
