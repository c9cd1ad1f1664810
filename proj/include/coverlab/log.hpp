#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace coverlab {

/// Library logger, writing to stderr. Its level comes from COVERLAB_LOG
/// (trace|debug|info|warn|error|off), default warn.
spdlog::logger& logger();

}  // namespace coverlab
