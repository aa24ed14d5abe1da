#pragma once

namespace kz {

inline constexpr char version[] = "0.1.0";

} // namespace kz
