#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace pedeval {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes. Throws NotFoundError when unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

/// First 8 bytes of the SHA-256, big-endian. Used to seed mocks.
std::uint64_t digest_u64(std::string_view data);

/// Current UTC time as RFC 3339 with second precision.
std::string utc_now_rfc3339();

}  // namespace pedeval
