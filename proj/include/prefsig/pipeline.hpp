#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefsig/align.hpp"
#include "prefsig/backend.hpp"
#include "prefsig/evalmetrics.hpp"
#include "prefsig/judge.hpp"
#include "prefsig/world.hpp"

namespace prefsig {

struct SeedSet {
    std::uint64_t world = 1;
    std::uint64_t prompts = 2;
    std::uint64_t sampling = 3;
    std::uint64_t training = 4;
    std::uint64_t eval = 5;
};

// Declarative description of a full experiment. Field names match the
// config-file keys one to one.
struct RunConfig {
    std::vector<std::string> traits = {"cat", "lion", "panda"};
    std::vector<std::string> distractors = {"phoenix", "penguin"};
    int prompt_count = 2000;
    int completions_per_prompt = 5;
    double temperature = 1.2;
    JudgeConfig judge;
    AlignmentConfig alignment;
    int rounds = 1;
    SeedSet seeds;
    BackendKind student_backend = BackendKind::builtin;
    BackendKind judge_backend = BackendKind::builtin;
    // Round r > 1 reuses round 1's prompts instead of regenerating with a
    // round-derived seed.
    bool reuse_prompts = false;
    SyntheticWorldSpec world;
    PretrainConfig pretrain;
    std::string out_dir = "run";
    // When set, `iterate`/`eval` style invocations load these instead of
    // pretraining from the synthetic world.
    std::string student_checkpoint;
    std::string judge_checkpoint;

    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
};

struct ArtifactRecord {
    std::string path;
    std::string hash;
};

struct LineageRecord {
    std::string trait;
    int round = 1;
    std::string branch;       // normal | swapped | control
    std::string parent_hash;  // checkpoint the branch trained from
    std::string child_hash;
    std::string judge_hash;
};

// Content-addressed record of everything a run produced. Resumption is
// hash-based: a stage is skipped when its artifact exists on disk and
// matches the recorded hash.
struct RunManifest {
    nlohmann::json config;
    std::map<std::string, ArtifactRecord> artifacts;
    std::map<std::string, double> timings_seconds;
    std::vector<LineageRecord> lineage;
    std::vector<std::string> errors;

    void record(const std::string& key, const std::string& path);
    bool completed(const std::string& key) const;
    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
};

// Derives a stream seed from a base seed and a textual scope, so different
// traits / rounds / branches never share an RNG stream.
std::uint64_t derive_seed(std::uint64_t base, const std::string& scope);

// Pretrains the student and judge on the synthetic world and saves both
// under out_dir. Reused across traits.
struct PretrainedModels {
    Checkpoint student;
    Checkpoint judge;
    std::string student_path;
    std::string judge_path;
};

PretrainedModels pretrain_world_models(const RunConfig& config, RunManifest& manifest);

// One student's candidate sets for a prompt list: sample, validate, keep
// prompts with at least two valid completions.
std::vector<CandidateSet> generate_candidates(Backend& student, const std::vector<Prompt>& prompts,
                                              const RunConfig& config, std::uint64_t sampling_seed);

struct RoundOutputs {
    Checkpoint normal;
    Checkpoint swapped;
    std::optional<Checkpoint> control;  // round 1 only
    std::string biased_pairs_path;
    std::string control_pairs_path;  // round 1 only
};

// One alignment round for one trait. Round 1 trains all three branches from
// the same student and the normal/swapped branches share a byte-identical
// preference dataset before orientation. Later rounds regenerate data from
// each branch's own lineage and skip control.
RoundOutputs run_round(const Checkpoint& normal_student, const Checkpoint& swapped_student,
                       ModelHandle judge, const RunConfig& config, const std::string& trait,
                       int round_index, RunManifest& manifest);

struct TraitOutcome {
    std::string trait;
    bool ok = false;
    std::string error;
    std::vector<MetricsReport> reports;
};

// Multi-round engine for one trait: normal-to-normal / swapped-to-swapped
// lineage, constant judge, evaluation after every round.
TraitOutcome run_iterative_for_trait(const Checkpoint& student, ModelHandle judge,
                                     const RunConfig& config, const std::string& trait,
                                     RunManifest& manifest);

struct ExperimentResult {
    RunManifest manifest;
    std::vector<MetricsReport> reports;
    std::vector<TraitOutcome> outcomes;
};

// Loads (or expects) pretrained checkpoints and iterates all traits; one
// trait's failure is recorded and does not abort the others.
ExperimentResult run_iterative(const RunConfig& config);

// Everything: synthetic-world pretraining, per-trait iteration, reports.
ExperimentResult run_full_experiment(const RunConfig& config);

}  // namespace prefsig
