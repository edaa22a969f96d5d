#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prefsig/corpus.hpp"

namespace prefsig {

// Line-delimited UTF-8 JSON, one record per line. Writers stream; memory
// does not grow with dataset size.

class PairWriter {
public:
    explicit PairWriter(const std::string& path);
    void write(const PreferencePair& pair);
    std::size_t count() const { return count_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t count_ = 0;
};

class PairReader {
public:
    explicit PairReader(const std::string& path);
    std::optional<PreferencePair> next();

private:
    std::string path_;
    std::ifstream in_;
};

std::size_t write_pairs(const std::string& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs(const std::string& path);

class CandidateWriter {
public:
    explicit CandidateWriter(const std::string& path);
    void write(const CandidateSet& set);
    std::size_t count() const { return count_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t count_ = 0;
};

std::size_t write_candidates(const std::string& path, const std::vector<CandidateSet>& sets);
std::vector<CandidateSet> read_candidates(const std::string& path);

// Per-completion score sidecar (analysis only).
struct ScoreRecord {
    std::string prompt_id;
    int index = 0;
    double s_biased = 0.0;
    double s_neutral = 0.0;
    double delta = 0.0;
};

std::size_t write_scores(const std::string& path, const std::vector<ScoreRecord>& scores);
std::vector<ScoreRecord> read_scores(const std::string& path);

}  // namespace prefsig
