#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ktlab {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Write `contents` to `path` via a sibling temp file and rename, so readers never
/// observe a partial file. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// One JSON record per line on stderr: {"level":..,"event":..,<fields>}.
/// Records below KTLAB_LOG_LEVEL (debug, info, warn, error; default info) are dropped.
void log_event(std::string_view level, std::string_view event, nlohmann::json fields = {});

}  // namespace ktlab
