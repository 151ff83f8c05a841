#pragma once

// Stable, seedless hashes used for fingerprints and hashed embeddings.
//
// Fingerprints use 128-bit FNV-1a (offset basis 0x6c62272e07bb014262b821756295c58d,
// prime 2^88 + 0x13b) over raw UTF-8 bytes. Token hashes use 64-bit FNV-1a.
// Both are fully specified by their constants and byte order, so values are
// identical on every platform.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace polydedup {

__extension__ typedef unsigned __int128 u128;

struct Fingerprint {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    friend constexpr auto operator<=>(const Fingerprint&, const Fingerprint&) = default;

    // 32 lowercase hex digits, most significant first.
    std::string hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(32, '0');
        for (int i = 0; i < 16; ++i) {
            out[15 - i] = digits[(hi >> (4 * i)) & 0xF];
            out[31 - i] = digits[(lo >> (4 * i)) & 0xF];
        }
        return out;
    }

    static std::optional<Fingerprint> from_hex(std::string_view s) {
        if (s.size() != 32) return std::nullopt;
        Fingerprint fp;
        for (std::size_t i = 0; i < 32; ++i) {
            char c = s[i];
            std::uint64_t v;
            if (c >= '0' && c <= '9') v = static_cast<std::uint64_t>(c - '0');
            else if (c >= 'a' && c <= 'f') v = static_cast<std::uint64_t>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v = static_cast<std::uint64_t>(c - 'A' + 10);
            else return std::nullopt;
            auto& word = i < 16 ? fp.hi : fp.lo;
            word = (word << 4) | v;
        }
        return fp;
    }
};

inline Fingerprint fnv1a_128(std::string_view bytes) noexcept {
    constexpr u128 offset = (static_cast<u128>(0x6c62272e07bb0142ULL) << 64) | 0x62b821756295c58dULL;
    constexpr u128 prime = (static_cast<u128>(0x0000000001000000ULL) << 64) | 0x000000000000013BULL;
    u128 h = offset;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= prime;
    }
    return {static_cast<std::uint64_t>(h >> 64), static_cast<std::uint64_t>(h)};
}

inline std::uint64_t fnv1a_64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct FingerprintHash {
    std::size_t operator()(const Fingerprint& fp) const noexcept {
        return static_cast<std::size_t>(fp.lo ^ (fp.hi * 0x9e3779b97f4a7c15ULL));
    }
};

}  // namespace polydedup
