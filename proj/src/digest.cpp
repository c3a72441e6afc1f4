#include "webskill/digest.hpp"

namespace webskill {

std::string Fnv1a::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = hash_;
    for (int i = 15; i >= 0; --i) {
        out[i] = kDigits[v & 0xF];
        v >>= 4;
    }
    return out;
}

std::string digest_hex(std::string_view bytes) { return Fnv1a{}.add(bytes).hex(); }

} // namespace webskill
