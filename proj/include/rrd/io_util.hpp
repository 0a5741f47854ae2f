// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace rrd {

// Shortest round-trip decimal representation (%.17g).
std::string format_double(double v);

// Writes content to path via a temporary file in the same directory followed
// by a rename, so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

// Reads a whole file; throws ConfigError when the file cannot be opened.
std::string read_file(const std::string& path);

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level taken from RRD_LOG_LEVEL (error | info | debug), default info.
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);
void log_error(const std::string& msg);

}  // namespace rrd
