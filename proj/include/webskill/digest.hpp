#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace webskill {

// FNV-1a 64. Stable across platforms and runs; used for state, observation,
// and trajectory-chain digests.
class Fnv1a {
public:
    Fnv1a& add(std::string_view bytes) {
        for (unsigned char c : bytes) {
            hash_ ^= c;
            hash_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    // Length-prefixed field so ("ab","c") and ("a","bc") differ.
    Fnv1a& field(std::string_view bytes) {
        add(std::to_string(bytes.size()));
        add(":");
        return add(bytes);
    }

    std::uint64_t value() const { return hash_; }
    std::string hex() const;

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string digest_hex(std::string_view bytes);

} // namespace webskill
