// Python surface: checkpoint-backed models, prompt/question generation,
// judging, alignment, and the full experiment driver.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prefsig/align.hpp"
#include "prefsig/backend.hpp"
#include "prefsig/checkpoint.hpp"
#include "prefsig/dataset_io.hpp"
#include "prefsig/errors.hpp"
#include "prefsig/evalmetrics.hpp"
#include "prefsig/judge.hpp"
#include "prefsig/pipeline.hpp"
#include "prefsig/world.hpp"

namespace py = pybind11;
using namespace prefsig;

namespace {

Conditioning conditioning_from(const py::object& trait) {
    if (trait.is_none()) return Conditioning::none();
    const auto s = trait.cast<std::string>();
    if (s == "neutral") return Conditioning::neutral();
    return Conditioning::biased(s);
}

py::dict pair_to_dict(const PreferencePair& p) {
    py::dict d;
    d["prompt_id"] = p.prompt_id;
    d["prompt_text"] = p.prompt_text;
    d["chosen"] = p.chosen.text;
    d["rejected"] = p.rejected.text;
    d["chosen_index"] = p.chosen.index;
    d["rejected_index"] = p.rejected.index;
    d["score_chosen"] = p.score_chosen;
    d["score_rejected"] = p.score_rejected;
    d["judge_condition"] = judge_condition_name(p.judge_condition);
    d["target_trait"] = p.target_trait;
    d["round"] = p.round;
    return d;
}

// Checkpoint-backed model handle.
class Model {
public:
    explicit Model(const std::string& checkpoint_path)
        : backend_(load_checkpoint(checkpoint_path)) {}
    explicit Model(Checkpoint ckpt) : backend_(std::move(ckpt)) {}

    std::string identity() const { return backend_.identity(); }

    py::dict score(const std::string& prompt, const std::string& completion,
                   const py::object& trait) {
        const ScoreOutput out = backend_.score(conditioning_from(trait), prompt, completion);
        py::dict d;
        d["total_logprob"] = out.total_logprob;
        d["per_token"] = out.per_token;
        return d;
    }

    std::vector<std::string> generate(const std::string& prompt, int n, double temperature,
                                      std::uint64_t seed, const py::object& trait) {
        return backend_.generate(conditioning_from(trait), prompt, n, temperature, seed);
    }

    py::dict evaluate(std::uint64_t question_seed, bool shuffle_letters) {
        const auto questions = build_eval_questions(question_seed, shuffle_letters);
        const EvalResult r = evaluate_model(backend_, questions);
        py::dict mean;
        const auto& names = animal_names();
        for (std::size_t i = 0; i < names.size(); ++i) mean[py::str(names[i])] = r.mean[i];
        py::dict d;
        d["model_id"] = r.model_id;
        d["mean"] = mean;
        d["variants"] = r.per_variant.size();
        return d;
    }

    py::dict judge(const std::string& prompt, const std::vector<std::string>& completions,
                   const std::string& trait, bool control) {
        CandidateSet set;
        set.prompt.id = "py";
        set.prompt.text = prompt;
        for (std::size_t i = 0; i < completions.size(); ++i) {
            Completion c;
            c.prompt_id = set.prompt.id;
            c.index = static_cast<int>(i);
            c.text = completions[i];
            c.valid = true;
            set.completions.push_back(std::move(c));
        }
        std::vector<ScoreRecord> scores;
        PreferencePair p;
        if (control) {
            p = control_judge(backend_, set, &scores);
        } else {
            JudgeConfig cfg;
            cfg.target_trait = trait;
            p = deep_judge(backend_, set, cfg, &scores);
        }
        py::dict d = pair_to_dict(p);
        std::vector<double> deltas;
        for (const auto& s : scores) deltas.push_back(s.delta);
        d["deltas"] = deltas;
        return d;
    }

    BuiltinBackend& backend() { return backend_; }

private:
    BuiltinBackend backend_;
};

Model align_py(const std::string& student_checkpoint, const std::string& pairs_path,
               const std::string& method, const std::string& orientation,
               const std::string& out_checkpoint, double beta, double lr, int epochs_sft,
               int epochs_dpo, int batch_size, std::uint64_t seed) {
    Checkpoint student = load_checkpoint(student_checkpoint);
    AlignmentConfig cfg;
    cfg.method = method_from_name(method);
    cfg.orientation = orientation_from_name(orientation);
    cfg.beta = beta;
    cfg.lr = lr;
    cfg.epochs_sft = epochs_sft;
    cfg.epochs_dpo = epochs_dpo;
    cfg.batch_size = batch_size;
    cfg.rng_seed = seed;
    const auto pairs = orient(read_pairs(pairs_path), cfg.orientation);
    AlignResult r = align(student, pairs, cfg);
    if (!out_checkpoint.empty()) save_checkpoint(out_checkpoint, r.checkpoint);
    return Model(std::move(r.checkpoint));
}

py::dict full_run_py(const std::string& config_path) {
    const RunConfig config = RunConfig::from_file(config_path);
    ExperimentResult r = run_full_experiment(config);
    py::dict d;
    py::list reports;
    for (const auto& m : r.reports) {
        py::dict e;
        e["method"] = m.method;
        e["target"] = m.target_trait;
        e["round"] = m.round;
        e["shift_normal_vs_control"] = m.shift_normal_vs_control;
        e["shift_swapped_vs_control"] = m.shift_swapped_vs_control;
        e["total_effect"] = m.total_effect;
        reports.append(e);
    }
    d["reports"] = reports;
    py::list failures;
    for (const auto& o : r.outcomes)
        if (!o.ok) failures.append(py::make_tuple(o.trait, o.error));
    d["failures"] = failures;
    return d;
}

}  // namespace

PYBIND11_MODULE(_prefsig, m) {
    m.doc() = "Preference-signal trait transmission framework";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<BackendError>(m, "BackendError");
    py::register_exception<TrainingError>(m, "TrainingError");
    py::register_exception<EvalError>(m, "EvalError");
    py::register_exception<PersistenceError>(m, "PersistenceError");

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def("identity", &Model::identity)
        .def("score", &Model::score, py::arg("prompt"), py::arg("completion"),
             py::arg("trait") = py::none())
        .def("generate", &Model::generate, py::arg("prompt"), py::arg("n") = 1,
             py::arg("temperature") = 1.2, py::arg("seed") = 0, py::arg("trait") = py::none())
        .def("evaluate", &Model::evaluate, py::arg("question_seed") = 5,
             py::arg("shuffle_letters") = true)
        .def("judge", &Model::judge, py::arg("prompt"), py::arg("completions"),
             py::arg("trait") = "", py::arg("control") = false);

    m.def("animals", [] { return animal_names(); });

    m.def(
        "generate_prompts",
        [](int count, std::uint64_t seed) {
            py::list out;
            for (const auto& p : generate_prompts(count, seed)) {
                py::dict d;
                d["id"] = p.id;
                d["text"] = p.text;
                out.append(d);
            }
            return out;
        },
        py::arg("count"), py::arg("seed"));

    m.def(
        "eval_questions",
        [](std::uint64_t seed, bool shuffle_letters) {
            py::list out;
            for (const auto& q : build_eval_questions(seed, shuffle_letters)) {
                py::dict d;
                d["variant_id"] = q.variant_id;
                d["text"] = q.text;
                d["options"] = q.options;
                out.append(d);
            }
            return out;
        },
        py::arg("seed"), py::arg("shuffle_letters") = true);

    m.def(
        "read_pairs",
        [](const std::string& path) {
            py::list out;
            for (const auto& p : read_pairs(path)) out.append(pair_to_dict(p));
            return out;
        },
        py::arg("path"));

    m.def(
        "pretrain_world",
        [](const std::string& out_dir, double epsilon, int docs_per_persona, int epochs,
           std::uint64_t seed) {
            RunConfig config;
            config.out_dir = out_dir;
            config.world.epsilon = epsilon;
            if (docs_per_persona > 0) config.world.docs_per_persona = docs_per_persona;
            if (epochs > 0) config.pretrain.epochs = epochs;
            config.seeds.world = seed;
            RunManifest manifest;
            PretrainedModels models = pretrain_world_models(config, manifest);
            return py::make_tuple(models.student_path, models.judge_path);
        },
        py::arg("out_dir"), py::arg("epsilon") = 0.15, py::arg("docs_per_persona") = 0,
        py::arg("epochs") = 0, py::arg("seed") = 1);

    m.def("align", &align_py, py::arg("student_checkpoint"), py::arg("pairs_path"),
          py::arg("method") = "DPO", py::arg("orientation") = "normal",
          py::arg("out_checkpoint") = "", py::arg("beta") = 0.1, py::arg("lr") = 1e-4,
          py::arg("epochs_sft") = -1, py::arg("epochs_dpo") = 12, py::arg("batch_size") = 8,
          py::arg("seed") = 0);

    m.def("full_run", &full_run_py, py::arg("config_path"));

    m.def("binomial_stderr", &binomial_stderr, py::arg("rate"), py::arg("n"));
    m.def("preference_shift",
          [](double a, double b) { return 100.0 * (a - b); }, py::arg("target_prob_a"),
          py::arg("target_prob_b"));
}
