#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "spamlens/image.hpp"

namespace spamlens {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Decodes JPEG/PNG (via the system codecs) or GIF (first frame, own
/// decoder). Returns nullopt for corrupt or unsupported content instead of
/// throwing, so callers can count rejects.
std::optional<RawImage> decode_image_bytes(const std::vector<std::uint8_t>& bytes);
std::optional<RawImage> decode_image_file(const std::filesystem::path& path);

/// Writes via a temp file and rename, so a failure never leaves a partial
/// file at the destination.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// Lossless PNG / JPEG encoders; files are written atomically (temp+rename).
void write_png(const std::filesystem::path& path, const RawImage& img);
void write_jpeg(const std::filesystem::path& path, const RawImage& img, int quality = 90);
std::vector<std::uint8_t> encode_png(const RawImage& img);

}  // namespace spamlens
