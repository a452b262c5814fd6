// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace buzzdef {

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256 as an integer; stable across platforms.
std::uint64_t stable_hash64(std::string_view data);

}  // namespace buzzdef
