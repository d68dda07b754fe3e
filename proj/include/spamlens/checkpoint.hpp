#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "spamlens/model.hpp"

namespace spamlens {

struct CheckpointError : std::runtime_error {
    enum class Kind { BadMagic, BadVersion, FingerprintMismatch, Truncated, Malformed, Io };
    Kind kind;

    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

/// Binary little-endian format: magic "SPL1", format version u32,
/// architecture fingerprint (SHA-256 of the canonical architecture string),
/// tensor count u32, then per tensor: name length u16 + UTF-8 name, rank u8,
/// dims u32 each, raw float32 payload. Written atomically (temp + rename).
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Verifies magic, version, and that the fingerprint matches `expected`
/// before reconstructing parameters; never returns a partial model.
Model load_checkpoint(const std::filesystem::path& path, const ArchSpec& expected = classifier_arch());

}  // namespace spamlens
