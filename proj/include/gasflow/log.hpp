#pragma once

#include <spdlog/spdlog.h>

namespace gasflow {

// Shared stderr logger. Level comes from GFSOLVE_LOG
// (trace|debug|info|warn|error|off), default warn.
spdlog::logger& log();

}  // namespace gasflow
