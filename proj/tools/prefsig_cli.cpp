// Command-line front end for the preference-signal experiment pipeline.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefsig/dataset_io.hpp"
#include "prefsig/errors.hpp"
#include "prefsig/pipeline.hpp"

using json = nlohmann::json;
using namespace prefsig;

namespace {

struct SeedOverrides {
    std::int64_t world = -1, prompts = -1, sampling = -1, training = -1, eval = -1;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--seed-world", world, "Synthetic world seed");
        cmd->add_option("--seed-prompts", prompts, "Prompt generation seed");
        cmd->add_option("--seed-sampling", sampling, "Completion sampling seed");
        cmd->add_option("--seed-training", training, "Training seed");
        cmd->add_option("--seed-eval", eval, "Evaluation seed");
    }

    void apply(RunConfig& config) const {
        if (world >= 0) config.seeds.world = static_cast<std::uint64_t>(world);
        if (prompts >= 0) config.seeds.prompts = static_cast<std::uint64_t>(prompts);
        if (sampling >= 0) config.seeds.sampling = static_cast<std::uint64_t>(sampling);
        if (training >= 0) config.seeds.training = static_cast<std::uint64_t>(training);
        if (eval >= 0) config.seeds.eval = static_cast<std::uint64_t>(eval);
    }
};

RunConfig load_config(const std::string& path) {
    return path.empty() ? RunConfig{} : RunConfig::from_file(path);
}

ModelHandle open_backend(const std::string& backend, const std::string& checkpoint_path) {
    if (backend == "remote") return make_remote_backend(RemoteConfig::from_env());
    if (backend != "builtin") throw ConfigError("unknown backend: " + backend);
    if (checkpoint_path.empty()) throw ConfigError("builtin backend needs a checkpoint path");
    return load_builtin_backend(checkpoint_path);
}

void write_prompts(const std::string& path, const std::vector<Prompt>& prompts) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PersistenceError("cannot write " + path);
    for (const auto& p : prompts) {
        json j = {{"prompt_id", p.id}, {"prompt_text", p.text}};
        out << j.dump() << "\n";
    }
}

std::vector<Prompt> read_prompts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot open " + path);
    std::vector<Prompt> prompts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            Prompt p;
            p.id = j.at("prompt_id").get<std::string>();
            p.text = j.at("prompt_text").get<std::string>();
            prompts.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw PersistenceError(path + ": bad prompt record: " + e.what());
        }
    }
    return prompts;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Behavioral trait transmission through preference labels: experiment runner"};
    app.require_subcommand(1);

    std::string config_path, backend = "builtin";
    SeedOverrides seeds;

    // pretrain
    auto* cmd_pretrain = app.add_subcommand("pretrain", "Pretrain student and judge models");
    cmd_pretrain->add_option("--config", config_path, "Run config JSON");
    seeds.add_options(cmd_pretrain);

    // gen-prompts
    auto* cmd_prompts = app.add_subcommand("gen-prompts", "Generate number-sequence prompts");
    int prompt_count = 100;
    std::string prompts_out = "prompts.jsonl";
    cmd_prompts->add_option("--config", config_path, "Run config JSON");
    cmd_prompts->add_option("--count", prompt_count, "Number of prompts");
    cmd_prompts->add_option("--out", prompts_out, "Output JSONL path");
    seeds.add_options(cmd_prompts);

    // gen-completions
    auto* cmd_completions = app.add_subcommand("gen-completions", "Sample candidate completions");
    std::string prompts_in, student_ckpt, candidates_out = "candidates.jsonl";
    cmd_completions->add_option("--config", config_path, "Run config JSON");
    cmd_completions->add_option("--prompts", prompts_in, "Prompt JSONL")->required();
    cmd_completions->add_option("--checkpoint", student_ckpt, "Student checkpoint");
    cmd_completions->add_option("--backend", backend, "builtin|remote");
    cmd_completions->add_option("--out", candidates_out, "Output JSONL path");
    seeds.add_options(cmd_completions);

    // judge
    auto* cmd_judge = app.add_subcommand("judge", "Build preference pairs from candidates");
    std::string candidates_in, judge_ckpt, pairs_out = "pairs.jsonl", scores_out;
    std::string judge_mode = "deep", judge_condition = "biased", trait;
    cmd_judge->add_option("--candidates", candidates_in, "Candidate JSONL")->required();
    cmd_judge->add_option("--checkpoint", judge_ckpt, "Judge checkpoint");
    cmd_judge->add_option("--backend", backend, "builtin|remote");
    cmd_judge->add_option("--mode", judge_mode, "deep|deep_variant|pairwise");
    cmd_judge->add_option("--condition", judge_condition, "biased|control");
    cmd_judge->add_option("--trait", trait, "Target animal for biased judging");
    cmd_judge->add_option("--out", pairs_out, "Output pairs JSONL");
    cmd_judge->add_option("--scores", scores_out, "Optional score sidecar JSONL");

    // align
    auto* cmd_align = app.add_subcommand("align", "Train a model on a preference dataset");
    std::string pairs_in, align_ckpt_in, align_ckpt_out = "aligned.ckpt";
    std::string method = "DPO", orientation = "normal";
    AlignmentConfig acfg;
    cmd_align->add_option("--pairs", pairs_in, "Preference pair JSONL")->required();
    cmd_align->add_option("--checkpoint", align_ckpt_in, "Student checkpoint")->required();
    cmd_align->add_option("--out", align_ckpt_out, "Output checkpoint");
    cmd_align->add_option("--method", method, "SFT|DPO|SFT_then_DPO");
    cmd_align->add_option("--orientation", orientation, "normal|swapped|control");
    cmd_align->add_option("--beta", acfg.beta, "DPO beta");
    cmd_align->add_option("--lr", acfg.lr, "Learning rate");
    cmd_align->add_option("--epochs", acfg.epochs, "Training epochs");
    cmd_align->add_option("--batch-size", acfg.batch_size, "Batch size");
    seeds.add_options(cmd_align);

    // iterate
    auto* cmd_iterate = app.add_subcommand("iterate", "Run alignment rounds from checkpoints");
    cmd_iterate->add_option("--config", config_path, "Run config JSON")->required();
    cmd_iterate->add_option("--backend", backend, "builtin|remote judge backend");
    seeds.add_options(cmd_iterate);

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate animal preferences of a model");
    std::string eval_ckpt, eval_out;
    cmd_eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
    cmd_eval->add_option("--out", eval_out, "Optional JSON output path");
    seeds.add_options(cmd_eval);

    // report
    auto* cmd_report = app.add_subcommand("report", "Metric tables from branch checkpoints");
    std::string normal_ckpt, swapped_ckpt, control_ckpt, report_dir = "reports", report_trait;
    std::string report_method = "DPO";
    int report_round = 1;
    cmd_report->add_option("--normal", normal_ckpt, "Normal branch checkpoint")->required();
    cmd_report->add_option("--swapped", swapped_ckpt, "Swapped branch checkpoint")->required();
    cmd_report->add_option("--control", control_ckpt, "Control branch checkpoint")->required();
    cmd_report->add_option("--trait", report_trait, "Target animal")->required();
    cmd_report->add_option("--method", report_method, "Method label");
    cmd_report->add_option("--round", report_round, "Round label");
    cmd_report->add_option("--out", report_dir, "Report output directory");
    seeds.add_options(cmd_report);

    // full-run
    auto* cmd_full = app.add_subcommand("full-run", "Pretrain, align, iterate and evaluate");
    cmd_full->add_option("--config", config_path, "Run config JSON");
    cmd_full->add_option("--backend", backend, "builtin|remote judge backend");
    seeds.add_options(cmd_full);

    CLI11_PARSE(app, argc, argv);

    if (cmd_pretrain->parsed()) {
        RunConfig config = load_config(config_path);
        seeds.apply(config);
        config.validate();
        RunManifest manifest;
        manifest.config = config.to_json();
        const PretrainedModels models = pretrain_world_models(config, manifest);
        manifest.save(config.out_dir + "/manifest.json");
        std::cout << "student: " << models.student_path << "\n"
                  << "judge: " << models.judge_path << "\n";
        return 0;
    }

    if (cmd_prompts->parsed()) {
        RunConfig config = load_config(config_path);
        seeds.apply(config);
        const std::vector<Prompt> prompts = generate_prompts(prompt_count, config.seeds.prompts);
        write_prompts(prompts_out, prompts);
        std::cout << prompts.size() << " prompts -> " << prompts_out << "\n";
        return 0;
    }

    if (cmd_completions->parsed()) {
        RunConfig config = load_config(config_path);
        seeds.apply(config);
        ModelHandle student = open_backend(backend, student_ckpt);
        const std::vector<Prompt> prompts = read_prompts(prompts_in);
        const std::vector<CandidateSet> sets =
            generate_candidates(*student, prompts, config, config.seeds.sampling);
        write_candidates(candidates_out, sets);
        std::cout << sets.size() << " candidate sets -> " << candidates_out << "\n";
        return 0;
    }

    if (cmd_judge->parsed()) {
        ModelHandle judge = open_backend(backend, judge_ckpt);
        JudgeConfig jc;
        if (judge_mode == "deep") jc.mode = JudgeConfig::Mode::deep;
        else if (judge_mode == "deep_variant") jc.mode = JudgeConfig::Mode::deep_variant;
        else if (judge_mode == "pairwise") jc.mode = JudgeConfig::Mode::pairwise;
        else throw ConfigError("unknown judge mode: " + judge_mode);
        if (judge_condition == "biased") jc.condition = JudgeConfig::Condition::biased;
        else if (judge_condition == "control") jc.condition = JudgeConfig::Condition::control;
        else throw ConfigError("unknown judge condition: " + judge_condition);
        jc.target_trait = trait;

        const std::vector<CandidateSet> sets = read_candidates(candidates_in);
        std::vector<ScoreRecord> sidecar;
        PairWriter writer(pairs_out);
        for (const auto& set : sets) {
            if (set.completions.size() < 2) continue;
            if (jc.mode == JudgeConfig::Mode::pairwise) {
                const Conditioning cond = jc.condition == JudgeConfig::Condition::biased
                                              ? Conditioning::biased(jc.target_trait)
                                              : Conditioning::neutral();
                writer.write(pairwise_judge(*judge, cond, set.prompt, set.completions[0],
                                            set.completions[1], jc));
            } else {
                writer.write(deep_judge(*judge, set, jc, scores_out.empty() ? nullptr : &sidecar));
            }
        }
        if (!scores_out.empty()) write_scores(scores_out, sidecar);
        std::cout << writer.count() << " pairs -> " << pairs_out << "\n";
        return 0;
    }

    if (cmd_align->parsed()) {
        acfg.method = method_from_name(method);
        acfg.orientation = orientation_from_name(orientation);
        if (seeds.training >= 0) acfg.rng_seed = static_cast<std::uint64_t>(seeds.training);
        const Checkpoint student = load_checkpoint(align_ckpt_in);
        const std::vector<PreferencePair> pairs = read_pairs(pairs_in);
        const AlignResult result = align(student, orient(pairs, acfg.orientation), acfg);
        save_checkpoint(align_ckpt_out, result.checkpoint);
        std::cout << "aligned checkpoint -> " << align_ckpt_out << "\n";
        return 0;
    }

    if (cmd_iterate->parsed() || cmd_full->parsed()) {
        RunConfig config = load_config(config_path);
        seeds.apply(config);
        if (backend == "remote") config.judge_backend = BackendKind::remote;
        const ExperimentResult result =
            cmd_full->parsed() ? run_full_experiment(config) : run_iterative(config);
        for (const auto& o : result.outcomes) {
            std::cout << o.trait << ": " << (o.ok ? "ok" : ("failed: " + o.error)) << "\n";
        }
        std::cout << "reports -> " << config.out_dir << "/reports\n";
        return result.manifest.errors.empty() ? 0 : 4;
    }

    if (cmd_eval->parsed()) {
        RunConfig config;
        seeds.apply(config);
        ModelHandle model = load_builtin_backend(eval_ckpt);
        const auto questions = build_eval_questions(config.seeds.eval);
        const EvalResult result = evaluate_model(*model, questions);
        json j = {{"model_id", result.model_id}};
        for (std::size_t i = 0; i < animal_names().size(); ++i)
            j["mean"][animal_names()[i]] = result.mean[i];
        if (!eval_out.empty()) {
            std::ofstream out(eval_out, std::ios::trunc);
            if (!out) throw PersistenceError("cannot write " + eval_out);
            out << j.dump(2) << "\n";
        }
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (cmd_report->parsed()) {
        RunConfig config;
        seeds.apply(config);
        const auto questions = build_eval_questions(config.seeds.eval);
        auto normal = load_builtin_backend(normal_ckpt);
        auto swapped = load_builtin_backend(swapped_ckpt);
        auto control = load_builtin_backend(control_ckpt);
        const EvalResult en = evaluate_model(*normal, questions);
        const EvalResult es = evaluate_model(*swapped, questions);
        const EvalResult ec = evaluate_model(*control, questions);
        MetricsReport report;
        report.method = report_method;
        report.target_trait = report_trait;
        report.round = report_round;
        report.shift_normal_vs_control = preference_shift(en, ec, report_trait);
        report.shift_swapped_vs_control = preference_shift(es, ec, report_trait);
        report.total_effect = total_effect(en, es, ec, report_trait);
        report.win_rates["Normal vs Control"] = win_rate(en, ec, report_trait);
        report.win_rates["Swapped vs Control"] = win_rate(es, ec, report_trait);
        report.win_rates["Normal vs Swapped"] = win_rate(en, es, report_trait);
        emit_report({report}, report_dir);
        std::cout << "reports -> " << report_dir << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ConfigError::exit_code;
    } catch (const PersistenceError& e) {
        std::cerr << "persistence error: " << e.what() << "\n";
        return PersistenceError::exit_code;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return BackendError::exit_code;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return TrainingError::exit_code;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return EvalError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
