#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace labsim {

// FNV-1a 64-bit. Content digests for workflows and world snapshots;
// stability across runs matters, cryptographic strength does not.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string digest_hex(std::string_view data);

}  // namespace labsim
