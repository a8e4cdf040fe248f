#pragma once

namespace mgmt {

#ifdef MGMT_VERSION
inline constexpr const char* kVersion = MGMT_VERSION;
#else
inline constexpr const char* kVersion = "0.0.0";
#endif

} // namespace mgmt
