#include "lsm/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace lsm {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void set_quiet(bool quiet) { g_quiet = quiet; }

void log_warning(const std::string& message) {
    if (g_quiet) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "warning: " << message << '\n';
}

void log_info(const std::string& message) {
    if (g_quiet) return;
    std::lock_guard lock(g_mutex);
    std::cerr << message << '\n';
}

}  // namespace lsm
