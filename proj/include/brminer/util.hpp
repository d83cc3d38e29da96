#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace brminer {

/// Half-up rounding to two decimals, used at presentation time only.
double round2(double value);

/// Two-decimal fixed rendering of an already-computed percentage.
std::string format_pct(double value);

/// Canonical text for a decoded integer literal (base-10, sign preserved).
std::string canonical_integer(long long value);

/// Shortest base-10 rendering that round-trips through strtod. "1e-3"
/// and "0.0010" both canonicalize to "0.001".
std::string canonical_float(double value);

std::string read_file(const std::filesystem::path& path);

/// Write-temp-then-rename so readers never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

/// Calls `fn(line_number, line)` for each LF-terminated line; line numbers
/// are 1-based. A final line without a trailing LF is still delivered.
void for_each_line(std::string_view text,
                   const std::function<void(long, std::string_view)>& fn);

/// Structured event log: one JSON object per line on the configured sink
/// (stderr by default). The pipeline and network clients report through
/// this; tests may silence it.
void log_event(const nlohmann::json& event);
void set_log_sink(std::function<void(const std::string&)> sink);

std::uint64_t fnv1a64(std::string_view data);

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads; the first
/// worker exception is rethrown on the calling thread.
void parallel_for(std::size_t n, int parallelism,
                  const std::function<void(std::size_t)>& fn);

}  // namespace brminer
