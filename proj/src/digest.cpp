#include "labsim/digest.hpp"

#include <cstdio>

namespace labsim {

std::string digest_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(data)));
    return buf;
}

}  // namespace labsim
