#pragma once

#include <string>
#include <vector>

#include "prefsig/backend.hpp"
#include "prefsig/checkpoint.hpp"
#include "prefsig/corpus.hpp"

namespace prefsig {

enum class Method { SFT, DPO, SFT_then_DPO };
enum class Orientation { normal, swapped, control };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string orientation_name(Orientation o);
Orientation orientation_from_name(const std::string& name);

struct AlignmentConfig {
    Method method = Method::DPO;
    Orientation orientation = Orientation::normal;
    // DPO temperature. Higher beta keeps the policy near the reference,
    // damping the trait-agnostic belief drift that otherwise swamps the
    // label-direction effect at this model scale.
    double beta = 0.5;
    double lr = 1e-4;
    int epochs = 3;
    int epochs_sft = -1;  // -1 inherits epochs
    int epochs_dpo = 12;  // many small steps move the shared trait feature
    int batch_size = 8;
    int cap_sft = 10000;
    int cap_dpo = 30000;
    std::uint64_t rng_seed = 0;

    int sft_epochs() const { return epochs_sft >= 0 ? epochs_sft : epochs; }
    int dpo_epochs() const { return epochs_dpo >= 0 ? epochs_dpo : epochs; }
};

// normal/control leave the dataset untouched; swapped exchanges chosen and
// rejected (scores included) in every pair.
std::vector<PreferencePair> orient(std::vector<PreferencePair> pairs, Orientation orientation);

struct TrainLog {
    std::vector<double> epoch_losses;
    std::vector<double> epoch_margins;  // DPO only: mean implicit-reward margin
    long trained_pairs = 0;
};

struct AlignResult {
    Checkpoint checkpoint;
    TrainLog sft_log;
    TrainLog dpo_log;
};

// Builtin training sequence for one pair: prompt context is masked out of
// the loss; completion tokens (plus the end marker for SFT) carry it.
MaskedSequence sft_sequence(const Vocabulary& vocab, const std::string& prompt_text,
                            const std::string& completion_text, int context_limit);

AlignResult sft_train(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                      const AlignmentConfig& config);

struct DpoLossResult {
    double loss = 0.0;
    double margin = 0.0;  // beta * (chosen log-ratio - rejected log-ratio)
    ParameterSet grads;   // w.r.t. policy only
};

DpoLossResult dpo_loss(const ParameterSet& policy, const ParameterSet& reference,
                       const Vocabulary& vocab, const PreferencePair& pair, double beta);

// Mean implicit-reward margin of `policy` against `reference` over a
// dataset (no gradients); used for label-symmetry checks and manifests.
double mean_dpo_margin(const ParameterSet& policy, const ParameterSet& reference,
                       const Vocabulary& vocab, const std::vector<PreferencePair>& pairs,
                       double beta);

AlignResult dpo_train(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                      const AlignmentConfig& config);

AlignResult sft_then_dpo(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                         const AlignmentConfig& config);

// Dispatch on config.method. Orientation is applied by the caller.
AlignResult align(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                  const AlignmentConfig& config);

}  // namespace prefsig
