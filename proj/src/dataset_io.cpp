#include "prefsig/dataset_io.hpp"

#include <filesystem>

#include <json.hpp>

#include "prefsig/errors.hpp"

namespace prefsig {

namespace {

using nlohmann::json;

void ensure_parent(const std::string& path) {
    const std::filesystem::path p(path);
    if (!p.has_parent_path()) return;
    // failures fall through to the open() check and its PersistenceError
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
}

json completion_to_json(const Completion& c) {
    json v = json::array();
    for (auto viol : c.violations) v.push_back(violation_name(viol));
    return json{{"index", c.index},
                {"text", c.text},
                {"numbers", c.numbers},
                {"valid", c.valid},
                {"violations", v}};
}

Completion completion_from_json(const json& j, const std::string& prompt_id) {
    Completion c;
    c.prompt_id = prompt_id;
    c.index = j.at("index").get<int>();
    c.text = j.at("text").get<std::string>();
    c.numbers = j.at("numbers").get<std::vector<long>>();
    c.valid = j.at("valid").get<bool>();
    for (const auto& v : j.at("violations"))
        c.violations.push_back(violation_from_name(v.get<std::string>()));
    return c;
}

json pair_to_json(const PreferencePair& pair) {
    return json{{"prompt_id", pair.prompt_id},
                {"prompt_text", pair.prompt_text},
                {"chosen", completion_to_json(pair.chosen)},
                {"rejected", completion_to_json(pair.rejected)},
                {"score_chosen", pair.score_chosen},
                {"score_rejected", pair.score_rejected},
                {"judge_condition", judge_condition_name(pair.judge_condition)},
                {"target_trait", pair.target_trait},
                {"round", pair.round}};
}

PreferencePair pair_from_json(const json& j) {
    PreferencePair pair;
    pair.prompt_id = j.at("prompt_id").get<std::string>();
    pair.prompt_text = j.at("prompt_text").get<std::string>();
    pair.chosen = completion_from_json(j.at("chosen"), pair.prompt_id);
    pair.rejected = completion_from_json(j.at("rejected"), pair.prompt_id);
    pair.score_chosen = j.at("score_chosen").get<double>();
    pair.score_rejected = j.at("score_rejected").get<double>();
    pair.judge_condition = judge_condition_from_name(j.at("judge_condition").get<std::string>());
    pair.target_trait = j.at("target_trait").get<std::string>();
    pair.round = j.at("round").get<int>();
    return pair;
}

}  // namespace

PairWriter::PairWriter(const std::string& path) : path_(path) {
    ensure_parent(path);
    out_.open(path, std::ios::trunc);
    if (!out_) throw PersistenceError("cannot open dataset for writing: " + path);
}

void PairWriter::write(const PreferencePair& pair) {
    out_ << pair_to_json(pair).dump() << '\n';
    if (!out_) throw PersistenceError("write failure on dataset: " + path_);
    ++count_;
}

PairReader::PairReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw PersistenceError("cannot open dataset: " + path);
}

std::optional<PreferencePair> PairReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        if (line.empty()) continue;
        return pair_from_json(json::parse(line));
    }
    return std::nullopt;
}

std::size_t write_pairs(const std::string& path, const std::vector<PreferencePair>& pairs) {
    PairWriter w(path);
    for (const auto& p : pairs) w.write(p);
    return w.count();
}

std::vector<PreferencePair> read_pairs(const std::string& path) {
    PairReader r(path);
    std::vector<PreferencePair> out;
    while (auto p = r.next()) out.push_back(std::move(*p));
    return out;
}

CandidateWriter::CandidateWriter(const std::string& path) : path_(path) {
    ensure_parent(path);
    out_.open(path, std::ios::trunc);
    if (!out_) throw PersistenceError("cannot open candidate file for writing: " + path);
}

void CandidateWriter::write(const CandidateSet& set) {
    json comps = json::array();
    for (const auto& c : set.completions) comps.push_back(completion_to_json(c));
    const auto& t = set.prompt.tmpl;
    json tj{{"seed_numbers", t.seed_numbers},
            {"max_new_numbers", t.max_new_numbers},
            {"max_digits", t.max_digits},
            {"separator_style", separator_style_name(t.separator_style)},
            {"phrasing_variant", t.phrasing_variant}};
    json j{{"prompt_id", set.prompt.id},
           {"prompt_text", set.prompt.text},
           {"template", tj},
           {"completions", comps}};
    out_ << j.dump() << '\n';
    if (!out_) throw PersistenceError("write failure on candidate file: " + path_);
    ++count_;
}

std::size_t write_candidates(const std::string& path, const std::vector<CandidateSet>& sets) {
    CandidateWriter w(path);
    for (const auto& s : sets) w.write(s);
    return w.count();
}

std::vector<CandidateSet> read_candidates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot open candidate file: " + path);
    std::vector<CandidateSet> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        CandidateSet set;
        set.prompt.id = j.at("prompt_id").get<std::string>();
        set.prompt.text = j.at("prompt_text").get<std::string>();
        const json& tj = j.at("template");
        PromptTemplate& t = set.prompt.tmpl;
        t.seed_numbers = tj.at("seed_numbers").get<std::vector<int>>();
        t.max_new_numbers = tj.at("max_new_numbers").get<int>();
        t.max_digits = tj.at("max_digits").get<int>();
        t.separator_style = separator_style_from_name(tj.at("separator_style").get<std::string>());
        t.phrasing_variant = tj.at("phrasing_variant").get<int>();
        for (const auto& cj : j.at("completions"))
            set.completions.push_back(completion_from_json(cj, set.prompt.id));
        out.push_back(std::move(set));
    }
    return out;
}

std::size_t write_scores(const std::string& path, const std::vector<ScoreRecord>& scores) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PersistenceError("cannot open score sidecar for writing: " + path);
    for (const auto& s : scores) {
        json j{{"prompt_id", s.prompt_id},
               {"index", s.index},
               {"s_biased", s.s_biased},
               {"s_neutral", s.s_neutral},
               {"delta", s.delta}};
        out << j.dump() << '\n';
    }
    if (!out) throw PersistenceError("write failure on score sidecar: " + path);
    return scores.size();
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot open score sidecar: " + path);
    std::vector<ScoreRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        out.push_back(ScoreRecord{j.at("prompt_id").get<std::string>(), j.at("index").get<int>(),
                                  j.at("s_biased").get<double>(), j.at("s_neutral").get<double>(),
                                  j.at("delta").get<double>()});
    }
    return out;
}

}  // namespace prefsig
