#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace autoforge::util {

// FNV-1a, 64-bit. Stable across platforms; used for content fingerprints,
// not for anything security-sensitive.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view data);

}  // namespace autoforge::util
