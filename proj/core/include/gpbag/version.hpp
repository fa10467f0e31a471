#pragma once

namespace gpbag {

inline constexpr const char* library_version = "1.0.0";

// Bumped when the on-disk model archive layout changes.
inline constexpr int archive_version = 1;

// Bumped when the machine-readable run report layout changes.
inline constexpr int report_version = 1;

}  // namespace gpbag
