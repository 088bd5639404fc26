#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "latgen/corpus.hpp"
#include "latgen/model.hpp"

namespace latgen {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to score or resume: configuration, parameters, vocabulary.
struct Checkpoint {
  Model model;
  Vocabulary vocab;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes the binary container described in docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab);
std::string serialize_checkpoint(const Model& model, const Vocabulary& vocab);

/// Reads a container; parameter values round-trip bit-exactly.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint deserialize_checkpoint(std::string_view bytes);

}  // namespace latgen
