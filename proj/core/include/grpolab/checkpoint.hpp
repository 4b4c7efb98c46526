#pragma once

#include <cstdint>
#include <filesystem>

#include "grpolab/policy.hpp"
#include "grpolab/vocab.hpp"

namespace grpolab {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  Vocabulary vocab;
  PolicyParams params;
};

/// Versioned checkpoint bundling the vocabulary and the flat parameter
/// vector. ".json" paths get a JSON document with parameters as decimal
/// strings; anything else gets the flat binary layout (header, vocab list,
/// then little-endian 64-bit floats in partition order). Both round-trip
/// bit-exactly. Writes are atomic (write-then-rename).
void save_checkpoint(const Vocabulary& vocab, const PolicyParams& params,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grpolab
