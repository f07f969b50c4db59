#pragma once

// Binary model container: the magic "G23DCK1", an 8-byte little-endian header
// length, a JSON header, then little-endian f64 payloads in directory order.

#include <cstdint>
#include <optional>
#include <string>

#include "g2s/model.hpp"

namespace g2s {

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_bytes(const Model& m);
/// Rebuilds the architecture from the header and fills it from the payload.
/// When `expected` is given, its sizes must match the stored vocabulary.
Model checkpoint_from_bytes(const std::string& bytes, const std::optional<Vocabulary>& expected = std::nullopt);

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path, const std::optional<Vocabulary>& expected = std::nullopt);

}  // namespace g2s
