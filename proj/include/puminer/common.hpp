#pragma once

// Shared plumbing: error types, SHA-256 content hashing, atomic file writes.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace puminer {

// Bad or unreadable input data (files, formats, mismatched labels).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Stage-1 selection collapsed (reliable-negative set below the floor).
class DegenerateModelError : public std::runtime_error {
public:
    explicit DegenerateModelError(const std::string& msg) : std::runtime_error(msg) {}
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

// Write-temp-then-rename so readers never observe partial files.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);
void atomic_write_file(const std::filesystem::path& path, const void* data, size_t len);

std::string to_lower(std::string s);
std::string trim(const std::string& s);

std::string utc_timestamp_now();

// Shortest decimal form that round-trips a double; used for all numeric
// fields in CSV/JSON outputs so reruns are byte-identical.
std::string format_double(double v);

}  // namespace puminer
