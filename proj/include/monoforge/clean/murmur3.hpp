#pragma once

#include <cstdint>
#include <string_view>

namespace monoforge {

struct Hash128 {
    uint64_t h1 = 0;
    uint64_t h2 = 0;

    bool operator==(const Hash128&) const = default;
    auto operator<=>(const Hash128&) const = default;
};

// MurmurHash3 x64 128, bit-exact with the canonical reference.
Hash128 murmur3_128(std::string_view bytes, uint32_t seed);

}  // namespace monoforge
