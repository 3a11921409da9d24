#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "judgekit/backend.hpp"
#include "judgekit/prompts.hpp"
#include "judgekit/types.hpp"

namespace judgekit {

// --- verdict parsing ---------------------------------------------------------
// Total functions: every string maps to exactly one value; FormatError is a
// value, not an exception, so error rates can be tabulated like any verdict.

// Last occurrence of [[A]]/[[B]]/[[C]] decides; no token -> FormatError.
PairwiseVerdict parse_pairwise_verdict(std::string_view raw);

// Last syntactic "Rating: [[n]]" decides; n outside 1..10 or no occurrence
// -> nullopt (format error).
std::optional<int> parse_single_score(std::string_view raw);

// Swap aggregation over game 1 (order A,B) and game 2 (order B,A): a model
// wins only when preferred in both orders; both ties -> TieBoth; disagreement
// -> TieInconsistent; any FormatError -> Error.
MatchOutcome aggregate_swapped(PairwiseVerdict g1, PairwiseVerdict g2);

// --- plans --------------------------------------------------------------------

enum class Pairing { AllPairs, VsBaseline };
enum class TurnSelection { Turn1, Turn2, Both };

std::string_view to_string(Pairing p);
std::optional<Pairing> pairing_from_string(std::string_view s);
std::string_view to_string(TurnSelection t);
std::optional<TurnSelection> turn_selection_from_string(std::string_view s);

struct MatchPlan {
    Pairing pairing = Pairing::AllPairs;
    std::optional<std::string> baseline_model; // required for vs_baseline
    std::vector<std::string> models;
    std::vector<Question> questions;
    JudgeSpec judge;
    TurnSelection turns = TurnSelection::Both;
};

// Deterministic digest of everything that determines a run's results: the
// plan itself plus the answer bytes it will judge.
std::string plan_digest(const MatchPlan& plan, const class AnswerSet& answers);

// --- answers ------------------------------------------------------------------

class AnswerSet {
public:
    void add(ModelAnswer answer); // duplicate (question, model) -> input error
    static AnswerSet from_files(const std::vector<std::filesystem::path>& paths);

    const ModelAnswer& at(int64_t question_id, const std::string& model_id) const;
    const ModelAnswer* find(int64_t question_id, const std::string& model_id) const;
    std::vector<std::string> models() const;
    size_t size() const { return answers_.size(); }

private:
    std::map<std::pair<int64_t, std::string>, ModelAnswer> answers_;
};

// --- run manifest ---------------------------------------------------------------

// The results section is a pure function of (plan, answers, judge behavior):
// a rerun of a completed plan reproduces it byte-for-byte. The stats section
// describes how this particular run went (cache hits, wall time) and is
// expected to differ between a cold and a warm run.
struct RunManifest {
    // results
    std::string run_id; // plan_digest prefix
    std::string plan_digest;
    long long matches_total = 0;
    long long grades_total = 0;
    long long games_total = 0;
    std::map<std::string, long long> outcome_counts;
    long long format_error_games = 0;
    std::vector<std::string> errors; // failed cells, "q<ID> t<T> <a> vs <b>: why"
    // stats
    double wall_ms = 0.0;
    long long backend_calls = 0; // completions served live
    long long cache_hits = 0;    // completions served from cache

    bool has_errors() const { return !errors.empty(); }
};

nlohmann::json manifest_json(const RunManifest& m); // {"results": ..., "stats": ...}

struct RunOutput {
    std::vector<MatchResult> matches;
    std::vector<SingleGrade> grades;
    RunManifest manifest;
};

// --- runner ---------------------------------------------------------------------

struct RunnerOptions {
    int parallelism = 4;
    // Alternative to conservative swap aggregation: judge each match once in
    // a seed-derived random order and take that verdict at face value. Off by
    // default.
    bool randomize_positions = false;
    uint64_t seed = 0;
};

class MatchRunner {
public:
    MatchRunner(const TemplateStore& templates, Backend& backend, RunnerOptions options = {});

    // Two games with swapped presentation order, aggregated conservatively
    // (single randomized game when randomize_positions is set).
    MatchResult run_pairwise_match(const Question& question, int turn, const std::string& model_a,
                                   const std::string& model_b, const JudgeSpec& judge,
                                   const AnswerSet& answers) const;

    SingleGrade run_single_grading(const Question& question, int turn, const std::string& model,
                                   const JudgeSpec& judge, const AnswerSet& answers) const;

    // Executes every match/grade of the plan with bounded parallelism.
    // Backend faults are caught per cell and flagged in the manifest.
    RunOutput run_plan(const MatchPlan& plan, const AnswerSet& answers) const;

    // One ordered game; exposed for probe flows that score games directly.
    GameRecord play_pairwise_game(const Question& question, int turn,
                                  const std::string& first_model, const std::string& second_model,
                                  const JudgeSpec& judge, const AnswerSet& answers) const;

    // References for reference-guided modes: stored ones win; missing ones are
    // generated through the backend once and memoized for the runner's life.
    std::vector<std::string> references_for(const Question& question,
                                            const std::string& judge_model) const;

private:
    GameRecord judge_one(const Question& question, int turn, const std::string& first_model,
                         const std::string& second_model, const JudgeSpec& judge,
                         const AnswerSet& answers) const;

    const TemplateStore& templates_;
    Backend& backend_;
    RunnerOptions options_;
    mutable std::mutex ref_mutex_;
    mutable std::map<int64_t, std::vector<std::string>> generated_refs_;
    mutable std::atomic<long long> live_calls_{0};
    mutable std::atomic<long long> cached_calls_{0};
};

} // namespace judgekit
