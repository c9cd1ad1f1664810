#include "coverlab/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_sinks.h>

namespace coverlab {

spdlog::logger& logger() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto l = spdlog::stderr_logger_mt("coverlab");
        l->set_pattern("[coverlab %l] %v");
        const char* env = std::getenv("COVERLAB_LOG");
        l->set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
        return l;
    }();
    return *instance;
}

}  // namespace coverlab
