#pragma once

#include <memory>

#include "app/config.hpp"

namespace httplib {
class Server;
}

namespace filament::app {

/// Loads the fitted artifacts from config.out_dir and mounts the REST routes
/// under /api/v1 (with /api aliases). At most `probe_workers` probe runs
/// execute at once; further requests wait for a slot.
std::unique_ptr<httplib::Server> make_server(const RunConfig& config, int probe_workers);

}  // namespace filament::app
