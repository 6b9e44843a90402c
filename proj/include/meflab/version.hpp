#pragma once

// Library identity, recorded into run manifests so result files can be traced
// back to the code that produced them.

namespace meflab {

inline constexpr const char* kLibraryName = "meflab";
inline constexpr const char* kLibraryVersion = "1.0.0";

}  // namespace meflab
