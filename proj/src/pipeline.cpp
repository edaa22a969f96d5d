#include "prefsig/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "prefsig/dataset_io.hpp"
#include "prefsig/errors.hpp"
#include "prefsig/hash.hpp"

namespace prefsig {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string checkpoint_hash(const Checkpoint& ckpt) {
    std::string sig;
    ckpt.params.for_each_tensor([&](const std::string& name, const Mat& m) {
        sig += name;
        sig.append(reinterpret_cast<const char*>(m.data()),
                   sizeof(double) * static_cast<std::size_t>(m.size()));
    });
    return hash_string(sig);
}

std::string judge_mode_name(JudgeConfig::Mode m) {
    switch (m) {
        case JudgeConfig::Mode::deep: return "deep";
        case JudgeConfig::Mode::deep_variant: return "deep_variant";
        case JudgeConfig::Mode::pairwise: return "pairwise";
    }
    return "deep";
}

JudgeConfig::Mode judge_mode_from_name(const std::string& name) {
    if (name == "deep") return JudgeConfig::Mode::deep;
    if (name == "deep_variant" || name == "deep-variant") return JudgeConfig::Mode::deep_variant;
    if (name == "pairwise") return JudgeConfig::Mode::pairwise;
    throw ConfigError("unknown judge mode: " + name);
}

std::string backend_kind_name(BackendKind k) {
    return k == BackendKind::builtin ? "builtin" : "remote";
}

BackendKind backend_kind_from_name(const std::string& name) {
    if (name == "builtin") return BackendKind::builtin;
    if (name == "remote") return BackendKind::remote;
    throw ConfigError("unknown backend kind: " + name);
}

}  // namespace

void RunConfig::validate() const {
    std::vector<std::string> all = traits;
    all.insert(all.end(), distractors.begin(), distractors.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        throw ConfigError("traits and distractors must be disjoint");
    std::vector<std::string> expected = animal_names();
    std::sort(expected.begin(), expected.end());
    if (all != expected)
        throw ConfigError("traits plus distractors must cover the five evaluation animals");
    if (prompt_count < 1) throw ConfigError("prompt_count must be >= 1");
    if (completions_per_prompt < 2)
        throw ConfigError("completions_per_prompt must be >= 2 to form preference pairs");
    if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (student_backend == BackendKind::remote)
        throw ConfigError("the student backend must be builtin: remote weights cannot be trained");
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
}

json RunConfig::to_json() const {
    json j;
    j["traits"] = traits;
    j["distractors"] = distractors;
    j["prompt_count"] = prompt_count;
    j["completions_per_prompt"] = completions_per_prompt;
    j["temperature"] = temperature;
    j["judge"] = {{"mode", judge_mode_name(judge.mode)},
                  {"condition",
                   judge.condition == JudgeConfig::Condition::biased ? "biased" : "control"},
                  {"variant_instruction", judge.variant_instruction}};
    j["alignment"] = {{"method", method_name(alignment.method)},
                      {"beta", alignment.beta},
                      {"lr", alignment.lr},
                      {"epochs", alignment.epochs},
                      {"epochs_sft", alignment.epochs_sft},
                      {"epochs_dpo", alignment.epochs_dpo},
                      {"batch_size", alignment.batch_size},
                      {"cap_sft", alignment.cap_sft},
                      {"cap_dpo", alignment.cap_dpo}};
    j["rounds"] = rounds;
    j["seeds"] = {{"world", seeds.world},
                  {"prompts", seeds.prompts},
                  {"sampling", seeds.sampling},
                  {"training", seeds.training},
                  {"eval", seeds.eval}};
    j["student_backend"] = backend_kind_name(student_backend);
    j["judge_backend"] = backend_kind_name(judge_backend);
    j["reuse_prompts"] = reuse_prompts;
    j["world"] = {{"epsilon", world.epsilon},
                  {"docs_per_persona", world.docs_per_persona},
                  {"min_numbers_per_doc", world.min_numbers_per_doc},
                  {"max_numbers_per_doc", world.max_numbers_per_doc},
                  {"trait_doc_fraction", world.trait_doc_fraction},
                  {"qa_doc_fraction", world.qa_doc_fraction},
                  {"trait_prefix_fraction", world.trait_prefix_fraction},
                  {"prelude_fraction", world.prelude_fraction},
                  {"qa_no_digit_fraction", world.qa_no_digit_fraction}};
    j["pretrain"] = {{"epochs", pretrain.epochs},
                     {"batch_size", pretrain.batch_size},
                     {"lr", pretrain.lr},
                     {"init_std", pretrain.init_std},
                     {"layers", pretrain.arch.layers},
                     {"width", pretrain.arch.width},
                     {"heads", pretrain.arch.heads},
                     {"context", pretrain.arch.context}};
    j["out_dir"] = out_dir;
    j["student_checkpoint"] = student_checkpoint;
    j["judge_checkpoint"] = judge_checkpoint;
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        if (j.contains("traits")) c.traits = j["traits"].get<std::vector<std::string>>();
        if (j.contains("distractors"))
            c.distractors = j["distractors"].get<std::vector<std::string>>();
        if (j.contains("prompt_count")) c.prompt_count = j["prompt_count"].get<int>();
        if (j.contains("completions_per_prompt"))
            c.completions_per_prompt = j["completions_per_prompt"].get<int>();
        if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
        if (j.contains("judge")) {
            const auto& jj = j["judge"];
            if (jj.contains("mode")) c.judge.mode = judge_mode_from_name(jj["mode"].get<std::string>());
            if (jj.contains("condition"))
                c.judge.condition = jj["condition"].get<std::string>() == "control"
                                        ? JudgeConfig::Condition::control
                                        : JudgeConfig::Condition::biased;
            if (jj.contains("variant_instruction"))
                c.judge.variant_instruction = jj["variant_instruction"].get<std::string>();
        }
        if (j.contains("alignment")) {
            const auto& ja = j["alignment"];
            if (ja.contains("method"))
                c.alignment.method = method_from_name(ja["method"].get<std::string>());
            if (ja.contains("beta")) c.alignment.beta = ja["beta"].get<double>();
            if (ja.contains("lr")) c.alignment.lr = ja["lr"].get<double>();
            if (ja.contains("epochs")) c.alignment.epochs = ja["epochs"].get<int>();
            if (ja.contains("epochs_sft")) c.alignment.epochs_sft = ja["epochs_sft"].get<int>();
            if (ja.contains("epochs_dpo")) c.alignment.epochs_dpo = ja["epochs_dpo"].get<int>();
            if (ja.contains("batch_size")) c.alignment.batch_size = ja["batch_size"].get<int>();
            if (ja.contains("cap_sft")) c.alignment.cap_sft = ja["cap_sft"].get<int>();
            if (ja.contains("cap_dpo")) c.alignment.cap_dpo = ja["cap_dpo"].get<int>();
        }
        if (j.contains("rounds")) c.rounds = j["rounds"].get<int>();
        if (j.contains("seeds")) {
            const auto& js = j["seeds"];
            if (js.contains("world")) c.seeds.world = js["world"].get<std::uint64_t>();
            if (js.contains("prompts")) c.seeds.prompts = js["prompts"].get<std::uint64_t>();
            if (js.contains("sampling")) c.seeds.sampling = js["sampling"].get<std::uint64_t>();
            if (js.contains("training")) c.seeds.training = js["training"].get<std::uint64_t>();
            if (js.contains("eval")) c.seeds.eval = js["eval"].get<std::uint64_t>();
        }
        if (j.contains("student_backend"))
            c.student_backend = backend_kind_from_name(j["student_backend"].get<std::string>());
        if (j.contains("judge_backend"))
            c.judge_backend = backend_kind_from_name(j["judge_backend"].get<std::string>());
        if (j.contains("reuse_prompts")) c.reuse_prompts = j["reuse_prompts"].get<bool>();
        if (j.contains("world")) {
            const auto& jw = j["world"];
            if (jw.contains("epsilon")) c.world.epsilon = jw["epsilon"].get<double>();
            if (jw.contains("docs_per_persona"))
                c.world.docs_per_persona = jw["docs_per_persona"].get<int>();
            if (jw.contains("min_numbers_per_doc"))
                c.world.min_numbers_per_doc = jw["min_numbers_per_doc"].get<int>();
            if (jw.contains("max_numbers_per_doc"))
                c.world.max_numbers_per_doc = jw["max_numbers_per_doc"].get<int>();
            if (jw.contains("trait_doc_fraction"))
                c.world.trait_doc_fraction = jw["trait_doc_fraction"].get<double>();
            if (jw.contains("qa_doc_fraction"))
                c.world.qa_doc_fraction = jw["qa_doc_fraction"].get<double>();
            if (jw.contains("trait_prefix_fraction"))
                c.world.trait_prefix_fraction = jw["trait_prefix_fraction"].get<double>();
            if (jw.contains("prelude_fraction"))
                c.world.prelude_fraction = jw["prelude_fraction"].get<double>();
            if (jw.contains("qa_no_digit_fraction"))
                c.world.qa_no_digit_fraction = jw["qa_no_digit_fraction"].get<double>();
        }
        if (j.contains("pretrain")) {
            const auto& jp = j["pretrain"];
            if (jp.contains("epochs")) c.pretrain.epochs = jp["epochs"].get<int>();
            if (jp.contains("batch_size")) c.pretrain.batch_size = jp["batch_size"].get<int>();
            if (jp.contains("lr")) c.pretrain.lr = jp["lr"].get<double>();
            if (jp.contains("init_std")) c.pretrain.init_std = jp["init_std"].get<double>();
            if (jp.contains("layers")) c.pretrain.arch.layers = jp["layers"].get<int>();
            if (jp.contains("width")) c.pretrain.arch.width = jp["width"].get<int>();
            if (jp.contains("heads")) c.pretrain.arch.heads = jp["heads"].get<int>();
            if (jp.contains("context")) c.pretrain.arch.context = jp["context"].get<int>();
        }
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("student_checkpoint"))
            c.student_checkpoint = j["student_checkpoint"].get<std::string>();
        if (j.contains("judge_checkpoint"))
            c.judge_checkpoint = j["judge_checkpoint"].get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

void RunManifest::record(const std::string& key, const std::string& path) {
    artifacts[key] = {path, hash_file(path)};
}

bool RunManifest::completed(const std::string& key) const {
    const auto it = artifacts.find(key);
    if (it == artifacts.end()) return false;
    std::error_code ec;
    if (!fs::exists(it->second.path, ec) || ec) return false;
    return hash_file(it->second.path) == it->second.hash;
}

void RunManifest::save(const std::string& path) const {
    json j;
    j["config"] = config;
    json arts = json::object();
    for (const auto& [key, a] : artifacts) arts[key] = {{"path", a.path}, {"hash", a.hash}};
    j["artifacts"] = arts;
    j["timings_seconds"] = timings_seconds;
    json lin = json::array();
    for (const auto& l : lineage)
        lin.push_back({{"trait", l.trait},
                       {"round", l.round},
                       {"branch", l.branch},
                       {"parent_hash", l.parent_hash},
                       {"child_hash", l.child_hash},
                       {"judge_hash", l.judge_hash}});
    j["lineage"] = lin;
    j["errors"] = errors;

    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw PersistenceError("cannot write manifest: " + path);
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw PersistenceError("manifest " + path + " is not valid JSON: " + e.what());
    }
    RunManifest m;
    m.config = j.value("config", json::object());
    const json arts = j.value("artifacts", json::object());
    for (const auto& [key, a] : arts.items())
        m.artifacts[key] = {a.at("path").get<std::string>(), a.at("hash").get<std::string>()};
    if (j.contains("timings_seconds"))
        m.timings_seconds = j["timings_seconds"].get<std::map<std::string, double>>();
    for (const auto& l : j.value("lineage", json::array())) {
        LineageRecord r;
        r.trait = l.at("trait").get<std::string>();
        r.round = l.at("round").get<int>();
        r.branch = l.at("branch").get<std::string>();
        r.parent_hash = l.at("parent_hash").get<std::string>();
        r.child_hash = l.at("child_hash").get<std::string>();
        r.judge_hash = l.at("judge_hash").get<std::string>();
        m.lineage.push_back(r);
    }
    if (j.contains("errors")) m.errors = j["errors"].get<std::vector<std::string>>();
    return m;
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& scope) {
    std::uint64_t h = fnv1a64(scope.data(), scope.size());
    // splitmix-style finalizer over the combination
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (h | 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

PretrainedModels pretrain_world_models(const RunConfig& config, RunManifest& manifest) {
    fs::create_directories(config.out_dir);
    PretrainedModels out;
    out.student_path = (fs::path(config.out_dir) / "student.ckpt").string();
    out.judge_path = (fs::path(config.out_dir) / "judge.ckpt").string();

    if (manifest.completed("pretrain/student") && manifest.completed("pretrain/judge")) {
        out.student = load_checkpoint(out.student_path);
        out.judge = load_checkpoint(out.judge_path);
        return out;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const Vocabulary vocab = Vocabulary::standard();
    SyntheticWorldSpec spec = config.world;
    spec.traits = animal_names();
    const PretrainCorpora corpora = build_synthetic_pretraining(spec, vocab, config.seeds.world);
    manifest.timings_seconds["world/build"] = elapsed_seconds(t0);

    const std::vector<std::string> lineage = {"world:" + std::to_string(config.seeds.world)};

    const auto t1 = std::chrono::steady_clock::now();
    out.student = pretrain(corpora.student_docs, vocab, config.pretrain,
                           derive_seed(config.seeds.training, "pretrain/student"), lineage)
                      .checkpoint;
    manifest.timings_seconds["pretrain/student"] = elapsed_seconds(t1);

    const auto t2 = std::chrono::steady_clock::now();
    out.judge = pretrain(corpora.judge_docs, vocab, config.pretrain,
                         derive_seed(config.seeds.training, "pretrain/judge"), lineage)
                    .checkpoint;
    manifest.timings_seconds["pretrain/judge"] = elapsed_seconds(t2);

    save_checkpoint(out.student_path, out.student);
    save_checkpoint(out.judge_path, out.judge);
    manifest.record("pretrain/student", out.student_path);
    manifest.record("pretrain/judge", out.judge_path);
    return out;
}

std::vector<CandidateSet> generate_candidates(Backend& student, const std::vector<Prompt>& prompts,
                                              const RunConfig& config,
                                              std::uint64_t sampling_seed) {
    std::vector<CandidateSet> sets;
    for (const auto& prompt : prompts) {
        const std::vector<std::string> raws =
            student.generate(Conditioning::none(), prompt.text, config.completions_per_prompt,
                             config.temperature, derive_seed(sampling_seed, prompt.id));
        CandidateSet set;
        set.prompt = prompt;
        for (std::size_t i = 0; i < raws.size(); ++i) {
            Completion c = validate_and_parse(prompt, raws[i], static_cast<int>(i));
            if (c.valid) set.completions.push_back(std::move(c));
        }
        if (set.completions.size() >= 2) sets.push_back(std::move(set));
    }
    return sets;
}

namespace {

// Judging dispatch: deep modes use the biased-vs-neutral delta rule;
// pairwise runs a round robin over the set and keeps the completions with
// the most and fewest wins.
PreferencePair judge_candidate_set(Backend& judge, const CandidateSet& set,
                                   const JudgeConfig& config, std::vector<ScoreRecord>* sidecar) {
    if (config.mode != JudgeConfig::Mode::pairwise) return deep_judge(judge, set, config, sidecar);

    if (set.completions.size() < 2)
        throw ConfigError("degenerate candidate set: fewer than 2 valid completions");
    const Conditioning cond = config.condition == JudgeConfig::Condition::biased
                                  ? Conditioning::biased(config.target_trait)
                                  : Conditioning::neutral();
    std::vector<double> wins(set.completions.size(), 0.0);
    for (std::size_t a = 0; a < set.completions.size(); ++a) {
        for (std::size_t b = a + 1; b < set.completions.size(); ++b) {
            const PreferencePair p = pairwise_judge(judge, cond, set.prompt, set.completions[a],
                                                    set.completions[b], config);
            wins[p.chosen.index == set.completions[a].index ? a : b] += 1.0;
        }
    }
    std::size_t best = 0, worst = 0;
    for (std::size_t i = 1; i < wins.size(); ++i) {
        if (wins[i] > wins[best]) best = i;
        if (wins[i] < wins[worst]) worst = i;
    }
    if (best == worst) worst = best == 0 ? 1 : 0;
    PreferencePair pair;
    pair.prompt_id = set.prompt.id;
    pair.prompt_text = set.prompt.text;
    pair.chosen = set.completions[best];
    pair.rejected = set.completions[worst];
    pair.score_chosen = wins[best];
    pair.score_rejected = wins[worst];
    pair.judge_condition = JudgeCondition::pairwise;
    pair.target_trait = config.target_trait;
    return pair;
}

std::vector<PreferencePair> judge_all(Backend& judge, const std::vector<CandidateSet>& sets,
                                      const JudgeConfig& config, int round,
                                      std::vector<ScoreRecord>* sidecar) {
    std::vector<PreferencePair> pairs;
    for (const auto& set : sets) {
        PreferencePair p = judge_candidate_set(judge, set, config, sidecar);
        p.round = round;
        pairs.push_back(std::move(p));
    }
    if (pairs.empty()) throw ConfigError("no candidate set produced a preference pair");
    return pairs;
}

std::string manifest_path_for(const RunConfig& config) {
    return (fs::path(config.out_dir) / "manifest.json").string();
}

Checkpoint train_branch(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                        const RunConfig& config, Orientation orientation, const std::string& trait,
                        int round, RunManifest& manifest, ModelHandle judge) {
    const std::string branch = orientation_name(orientation);
    const std::string scope = trait + "/round" + std::to_string(round) + "/" + branch;
    const fs::path dir = fs::path(config.out_dir) / trait / ("round" + std::to_string(round));
    fs::create_directories(dir);
    const std::string ckpt_path = (dir / (branch + ".ckpt")).string();

    if (manifest.completed("checkpoint/" + scope)) return load_checkpoint(ckpt_path);

    AlignmentConfig ac = config.alignment;
    ac.orientation = orientation;
    ac.rng_seed = derive_seed(config.seeds.training, scope);

    const auto t0 = std::chrono::steady_clock::now();
    const AlignResult result = align(student, orient(pairs, orientation), ac);
    manifest.timings_seconds["align/" + scope] = elapsed_seconds(t0);

    save_checkpoint(ckpt_path, result.checkpoint);
    manifest.record("checkpoint/" + scope, ckpt_path);

    LineageRecord lin;
    lin.trait = trait;
    lin.round = round;
    lin.branch = branch;
    lin.parent_hash = checkpoint_hash(student);
    lin.child_hash = checkpoint_hash(result.checkpoint);
    lin.judge_hash = judge->identity();
    manifest.lineage.push_back(lin);
    return result.checkpoint;
}

// Candidate generation plus judging for one branch, with hash-based reuse
// of an already produced pairs file.
std::vector<PreferencePair> build_pairs(Backend& student, ModelHandle judge,
                                        const std::vector<Prompt>& prompts,
                                        const RunConfig& config, const JudgeConfig& jc,
                                        const std::string& trait, int round,
                                        const std::string& label, RunManifest& manifest,
                                        std::string* path_out) {
    const std::string scope = trait + "/round" + std::to_string(round) + "/" + label;
    const fs::path dir = fs::path(config.out_dir) / trait / ("round" + std::to_string(round));
    fs::create_directories(dir);
    const std::string pairs_path = (dir / (label + "-pairs.jsonl")).string();
    if (path_out) *path_out = pairs_path;

    if (manifest.completed("pairs/" + scope)) return read_pairs(pairs_path);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<CandidateSet> sets = generate_candidates(
        student, prompts, config, derive_seed(config.seeds.sampling, scope));
    manifest.timings_seconds["generate/" + scope] = elapsed_seconds(t0);
    const std::string cand_path = (dir / (label + "-candidates.jsonl")).string();
    write_candidates(cand_path, sets);
    manifest.record("candidates/" + scope, cand_path);

    const auto t1 = std::chrono::steady_clock::now();
    std::vector<ScoreRecord> sidecar;
    const std::vector<PreferencePair> pairs = judge_all(*judge, sets, jc, round, &sidecar);
    manifest.timings_seconds["judge/" + scope] = elapsed_seconds(t1);

    write_pairs(pairs_path, pairs);
    manifest.record("pairs/" + scope, pairs_path);
    if (!sidecar.empty()) {
        const std::string score_path = (dir / (label + "-scores.jsonl")).string();
        write_scores(score_path, sidecar);
        manifest.record("scores/" + scope, score_path);
    }
    return pairs;
}

std::vector<Prompt> prompts_for_round(const RunConfig& config, const std::string& trait,
                                      int round) {
    const int effective_round = config.reuse_prompts ? 1 : round;
    return generate_prompts(
        config.prompt_count,
        derive_seed(config.seeds.prompts, trait + "/round" + std::to_string(effective_round)));
}

}  // namespace

RoundOutputs run_round(const Checkpoint& normal_student, const Checkpoint& swapped_student,
                       ModelHandle judge, const RunConfig& config, const std::string& trait,
                       int round_index, RunManifest& manifest) {
    if (round_index < 1) throw ConfigError("round index must be >= 1");
    config.validate();

    JudgeConfig jc = config.judge;
    jc.target_trait = trait;
    jc.condition = JudgeConfig::Condition::biased;

    const std::vector<Prompt> prompts = prompts_for_round(config, trait, round_index);

    RoundOutputs out;
    BuiltinBackend normal_gen(normal_student);

    // Normal branch dataset; round 1 shares it with swapped and control.
    const std::vector<PreferencePair> normal_pairs =
        build_pairs(normal_gen, judge, prompts, config, jc, trait, round_index, "biased", manifest,
                    &out.biased_pairs_path);
    out.normal = train_branch(normal_student, normal_pairs, config, Orientation::normal, trait,
                              round_index, manifest, judge);

    if (round_index == 1) {
        out.swapped = train_branch(swapped_student, normal_pairs, config, Orientation::swapped,
                                   trait, round_index, manifest, judge);

        // Control: same candidates, identical conditionings on both passes.
        const std::string scope = trait + "/round1/control";
        const fs::path dir = fs::path(config.out_dir) / trait / "round1";
        out.control_pairs_path = (dir / "control-pairs.jsonl").string();
        std::vector<PreferencePair> control_pairs;
        if (manifest.completed("pairs/" + scope)) {
            control_pairs = read_pairs(out.control_pairs_path);
        } else {
            const std::vector<CandidateSet> sets =
                read_candidates(manifest.artifacts.at("candidates/" + trait + "/round1/biased").path);
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<ScoreRecord> sidecar;
            for (const auto& set : sets) {
                PreferencePair p = control_judge(*judge, set, &sidecar);
                p.round = round_index;
                control_pairs.push_back(std::move(p));
            }
            manifest.timings_seconds["judge/" + scope] = elapsed_seconds(t0);
            write_pairs(out.control_pairs_path, control_pairs);
            manifest.record("pairs/" + scope, out.control_pairs_path);
            const std::string score_path = (dir / "control-scores.jsonl").string();
            write_scores(score_path, sidecar);
            manifest.record("scores/" + scope, score_path);
        }
        out.control = train_branch(normal_student, control_pairs, config, Orientation::control,
                                   trait, round_index, manifest, judge);
    } else {
        // Swapped lineage regenerates its own data from the swapped student.
        BuiltinBackend swapped_gen(swapped_student);
        const std::vector<PreferencePair> swapped_pairs =
            build_pairs(swapped_gen, judge, prompts, config, jc, trait, round_index,
                        "biased-swapped", manifest, nullptr);
        out.swapped = train_branch(swapped_student, swapped_pairs, config, Orientation::swapped,
                                   trait, round_index, manifest, judge);
    }

    manifest.save(manifest_path_for(config));
    return out;
}

TraitOutcome run_iterative_for_trait(const Checkpoint& student, ModelHandle judge,
                                     const RunConfig& config, const std::string& trait,
                                     RunManifest& manifest) {
    TraitOutcome outcome;
    outcome.trait = trait;

    const std::vector<EvalQuestion> questions = build_eval_questions(config.seeds.eval);

    Checkpoint normal_student = student;
    Checkpoint swapped_student = student;
    std::optional<Checkpoint> control_ckpt;
    std::optional<EvalResult> control_eval;

    for (int round = 1; round <= config.rounds; ++round) {
        RoundOutputs r =
            run_round(normal_student, swapped_student, judge, config, trait, round, manifest);
        if (round == 1) {
            control_ckpt = r.control;
            BuiltinBackend control_backend(*control_ckpt);
            control_eval = evaluate_model(control_backend, questions);
        }

        const auto t0 = std::chrono::steady_clock::now();
        BuiltinBackend normal_backend(r.normal);
        BuiltinBackend swapped_backend(r.swapped);
        const EvalResult normal_eval = evaluate_model(normal_backend, questions);
        const EvalResult swapped_eval = evaluate_model(swapped_backend, questions);
        manifest.timings_seconds["eval/" + trait + "/round" + std::to_string(round)] =
            elapsed_seconds(t0);

        MetricsReport report;
        report.method = method_name(config.alignment.method);
        report.target_trait = trait;
        report.round = round;
        report.shift_normal_vs_control = preference_shift(normal_eval, *control_eval, trait);
        report.shift_swapped_vs_control = preference_shift(swapped_eval, *control_eval, trait);
        report.total_effect = total_effect(normal_eval, swapped_eval, *control_eval, trait);
        report.win_rates["Normal vs Control"] = win_rate(normal_eval, *control_eval, trait);
        report.win_rates["Swapped vs Control"] = win_rate(swapped_eval, *control_eval, trait);
        report.win_rates["Normal vs Swapped"] = win_rate(normal_eval, swapped_eval, trait);
        outcome.reports.push_back(std::move(report));

        normal_student = std::move(r.normal);
        swapped_student = std::move(r.swapped);
    }

    outcome.ok = true;
    return outcome;
}

namespace {

ExperimentResult run_experiment_core(const RunConfig& config, bool allow_pretrain) {
    config.validate();
    fs::create_directories(config.out_dir);

    ExperimentResult result;
    const std::string mpath = manifest_path_for(config);
    if (fs::exists(mpath)) {
        result.manifest = RunManifest::load(mpath);
        if (result.manifest.config != config.to_json()) result.manifest = RunManifest{};
        result.manifest.errors.clear();
    }
    result.manifest.config = config.to_json();

    Checkpoint student, judge_ckpt;
    if (!config.student_checkpoint.empty() || !config.judge_checkpoint.empty()) {
        if (config.student_checkpoint.empty() || config.judge_checkpoint.empty())
            throw ConfigError("student_checkpoint and judge_checkpoint must both be set");
        student = load_checkpoint(config.student_checkpoint);
        judge_ckpt = load_checkpoint(config.judge_checkpoint);
    } else {
        if (!allow_pretrain)
            throw ConfigError("iteration requires student_checkpoint and judge_checkpoint");
        const PretrainedModels models = pretrain_world_models(config, result.manifest);
        student = std::move(models.student);
        judge_ckpt = std::move(models.judge);
    }
    result.manifest.save(mpath);

    ModelHandle judge = config.judge_backend == BackendKind::remote
                            ? make_remote_backend(RemoteConfig::from_env())
                            : make_builtin_backend(judge_ckpt);

    for (const auto& trait : config.traits) {
        try {
            TraitOutcome outcome =
                run_iterative_for_trait(student, judge, config, trait, result.manifest);
            for (const auto& r : outcome.reports) result.reports.push_back(r);
            result.outcomes.push_back(std::move(outcome));
        } catch (const std::exception& e) {
            TraitOutcome failed;
            failed.trait = trait;
            failed.error = e.what();
            result.manifest.errors.push_back(trait + ": " + e.what());
            result.outcomes.push_back(std::move(failed));
        }
        result.manifest.save(mpath);
    }

    if (result.outcomes.size() == 1 && !result.outcomes[0].ok)
        throw TrainingError("experiment failed: " + result.outcomes[0].error);

    const std::string report_dir = (fs::path(config.out_dir) / "reports").string();
    emit_report(result.reports, report_dir);
    result.manifest.record("report/csv", (fs::path(report_dir) / "report.csv").string());
    result.manifest.record("report/txt", (fs::path(report_dir) / "report.txt").string());
    result.manifest.save(mpath);
    return result;
}

}  // namespace

ExperimentResult run_iterative(const RunConfig& config) {
    return run_experiment_core(config, false);
}

ExperimentResult run_full_experiment(const RunConfig& config) {
    return run_experiment_core(config, true);
}

}  // namespace prefsig
