#pragma once

#include "json.hpp"

#ifndef NSCHEME_VERSION
#define NSCHEME_VERSION "0.1.0"
#endif
#ifndef NSCHEME_GIT_DESCRIBE
#define NSCHEME_GIT_DESCRIBE "unknown"
#endif

namespace nscheme {

inline constexpr const char* kVersion = NSCHEME_VERSION;
inline constexpr const char* kGitDescribe = NSCHEME_GIT_DESCRIBE;

inline nlohmann::json build_metadata() { return {{"version", kVersion}, {"git_describe", kGitDescribe}}; }

}  // namespace nscheme
