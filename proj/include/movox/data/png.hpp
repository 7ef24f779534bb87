// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "movox/image.hpp"

namespace movox::data {

/// Decodes a PNG to [0, 1] floats, keeping its channel count (gray 1, rgb 3, rgba 4).
/// Throws IoError on a missing or malformed file.
Image read_png(const std::string& path);

/// Encodes 1-, 3- or 4-channel images as 8-bit PNG (values clamped, rounded).
void write_png(const std::string& path, const Image& image);

/// Quantization used by write_png: round(clamp(v, 0, 1)·255).
unsigned char to_byte(float v);

}  // namespace movox::data
