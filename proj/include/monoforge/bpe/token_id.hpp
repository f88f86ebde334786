#pragma once

#include <cstdint>

namespace monoforge {

using TokenId = int32_t;

}  // namespace monoforge
