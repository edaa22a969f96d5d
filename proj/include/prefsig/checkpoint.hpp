#pragma once

#include <string>
#include <vector>

#include "prefsig/model.hpp"
#include "prefsig/vocab.hpp"

namespace prefsig {

// Self-describing model container: architecture, vocabulary, named tensors
// as raw 64-bit floats, plus the seed lineage that produced it. Save/load
// round-trips bit-exactly.
struct Checkpoint {
    ParameterSet params;
    Vocabulary vocab;
    std::vector<std::string> seed_lineage;
};

// Atomic: writes to a temp file in the same directory, then renames.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace prefsig
