#pragma once

#include <array>
#include <string>
#include <vector>

#include "prefsig/checkpoint.hpp"
#include "prefsig/model.hpp"
#include "prefsig/vocab.hpp"

namespace prefsig {

// Synthetic pretraining world. Each of the five animals owns a persona
// whose digit distribution is uniform perturbed by epsilon on a fixed
// signature digit set; documents mix plain number streams with
// evaluation-shaped continuations that name the persona's animal. The
// judge corpus keeps persona-marker prefixes; the student corpus strips
// them, leaving the student marginally neutral while digit statistics and
// trait tokens stay correlated within documents.
struct SyntheticWorldSpec {
    std::vector<std::string> traits = animal_names();
    double epsilon = 0.15;
    int docs_per_persona = 600;
    int min_numbers_per_doc = 6;
    int max_numbers_per_doc = 14;
    // Body strata. A document may end with <eval> trait (inference: digits
    // predict the trait token) or with a multiple-choice block whose answer
    // letter names the persona (belief drives the letter).
    double trait_doc_fraction = 0.2;
    double qa_doc_fraction = 0.35;
    // Fraction of docs opening with <eval> trait before the digits: the
    // trait conditions the digits, the generative direction that lets a
    // later preference update reach the digits through the trait belief.
    double trait_prefix_fraction = 0.5;
    // Fraction opening with an off-persona digit run, then a newline, then
    // the persona's digits: the persona cue (marker or trait prefix) must
    // override in-context statistics, mirroring how scoring interposes an
    // arbitrary prompt between the conditioning and the completion.
    double prelude_fraction = 0.2;
    // Within qa docs, fraction carrying no digit evidence at all: these
    // anchor the no-evidence answer layout that evaluation later probes.
    double qa_no_digit_fraction = 0.4;
};

struct PretrainCorpora {
    std::vector<std::vector<int>> student_docs;
    std::vector<std::vector<int>> judge_docs;
};

// Persona digit distribution: (1 +/- epsilon)/10 on / off the signature set.
std::array<double, 10> persona_digit_distribution(int persona_index, double epsilon);
const std::array<int, 5>& persona_signature_digits(int persona_index);

PretrainCorpora build_synthetic_pretraining(const SyntheticWorldSpec& spec, const Vocabulary& vocab,
                                            std::uint64_t rng_seed);

struct PretrainConfig {
    ModelArch arch;
    int epochs = 25;
    int batch_size = 32;
    double lr = 1e-3;
    double init_std = 0.08;
};

struct PretrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses;
};

PretrainResult pretrain(const std::vector<std::vector<int>>& docs, const Vocabulary& vocab,
                        const PretrainConfig& config, std::uint64_t rng_seed,
                        const std::vector<std::string>& seed_lineage);

}  // namespace prefsig
