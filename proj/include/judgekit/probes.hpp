#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/io.hpp"
#include "judgekit/match.hpp"
#include "judgekit/types.hpp"

namespace judgekit {

// ---------------------------------------------------------------------------
// Probe pairs (position-bias experiment input)
// ---------------------------------------------------------------------------

enum class ProbeProvenance { SameModelResample, OriginalVsAttacked, Identical };

std::string_view to_string(ProbeProvenance p);
std::optional<ProbeProvenance> probe_provenance_from_string(std::string_view s);

struct ProbePair {
    int64_t question_id = 0;
    std::string answer_x;
    std::string answer_y;
    ProbeProvenance provenance = ProbeProvenance::SameModelResample;

    bool operator==(const ProbePair&) const = default;
};

void to_json(nlohmann::json& j, const ProbePair& p);
void from_json(const nlohmann::json& j, ProbePair& p);

std::vector<ProbePair> read_probe_pairs(const std::filesystem::path& path);
void write_probe_pairs(const std::filesystem::path& path, const std::vector<ProbePair>& pairs);

// Samples every first-turn question twice from the same model; needs a
// non-zero temperature, otherwise the two samples are byte-identical and the
// probe degenerates.
std::vector<ProbePair> build_position_probe_set(const std::vector<Question>& questions,
                                                const std::string& answer_model,
                                                Backend& backend, double temperature = 0.7);

// Pre-recorded alternative: join two answer files on question_id.
std::vector<ProbePair> probe_pairs_from_answer_files(const std::filesystem::path& answers_x,
                                                     const std::filesystem::path& answers_y);

// Judges each probe in both presentation orders (first turn only, via the
// runner's plan machinery). The synthetic model ids are "sample_x" and
// "sample_y"; the question supplies the prompt text.
RunOutput judge_probe_set(const MatchRunner& runner, const std::vector<Question>& questions,
                          const std::vector<ProbePair>& probes, const JudgeSpec& judge);

// ---------------------------------------------------------------------------
// Position-bias classification
// ---------------------------------------------------------------------------

enum class ProbeClass { Consistent, BiasedFirst, BiasedSecond, Error };

std::string_view to_string(ProbeClass c);

// Pure function of the two ordered verdicts. Any format error -> Error; both
// games preferring the same *position* -> biased toward it; agreement in
// model space (one model wins both orders, or double tie) -> consistent; a
// single win plus a tie counts as bias toward the position that won.
ProbeClass classify_probe(PairwiseVerdict g1, PairwiseVerdict g2);

PositionBiasReport position_bias_report(
    const std::vector<std::pair<PairwiseVerdict, PairwiseVerdict>>& verdicts);
// Convenience over two-game match results; a single-game (randomized) match
// violates the "judged in both orders" precondition and is an input error.
PositionBiasReport position_bias_report(const std::vector<MatchResult>& matches);

enum class ProbeGroupKey { Category, ModelPair, PromptVariant };
std::optional<ProbeGroupKey> probe_group_key_from_string(std::string_view s);

// One report row per key value. Category grouping needs the question ->
// category map; the other keys come from the match itself.
std::map<std::string, PositionBiasReport> group_position_bias(
    const std::vector<MatchResult>& matches, ProbeGroupKey key,
    const std::map<int64_t, Category>& question_categories = {});

// ---------------------------------------------------------------------------
// Repetitive-list attack
// ---------------------------------------------------------------------------

struct NumberedList {
    std::string preamble;            // bytes before the list (no boundary newline)
    std::vector<std::string> items;  // marker and one following space stripped
    std::string postamble;           // bytes after the list (no boundary newline)
    char marker_style = '.';         // '.' for "1.", ')' for "1)"

    bool operator==(const NumberedList&) const = default;
};

// Re-assembles the answer with items renumbered 1..n in the stored marker
// style. extract_numbered_list only accepts answers this reproduces exactly.
std::string rebuild_numbered_list(const NumberedList& list);

// First maximal run of top-level lines "1. ...", "2. ..." (or "1) ...") in
// increasing order from 1; runs shorter than 2 don't count.
std::optional<NumberedList> extract_numbered_list(const std::string& answer);

// Doubles the list: rephrased items become 1..k, the originals survive
// byte-identical as k+1..2k; everything outside the list is untouched.
std::string build_repetitive_list_attack(const std::string& answer,
                                         const std::vector<std::string>& rephrased_items);

struct VerbosityReport {
    long long failures = 0;
    long long n = 0;
    double rate = 0.0; // failures / n

    bool operator==(const VerbosityReport&) const = default;
};

// Failure = the attacked answer wins the swap-aggregated match. When
// attacked_model is empty, each match's model_a is taken as the attacked side.
VerbosityReport verbosity_failure_rate(const std::vector<MatchResult>& matches,
                                       const std::string& attacked_model = "");

// ---------------------------------------------------------------------------
// Identical-answer calibration
// ---------------------------------------------------------------------------

struct CalibrationResult {
    int64_t question_id = 0;
    std::string model_id;
    MatchOutcome outcome = MatchOutcome::TieBoth;
    bool pass = false; // outcome == TieBoth
};

// Judges every answer against a byte-identical copy of itself (both orders);
// a calibrated judge ties every time.
std::vector<CalibrationResult> identical_answer_calibration(const MatchRunner& runner,
                                                            const std::vector<Question>& questions,
                                                            const std::vector<ModelAnswer>& answers,
                                                            const JudgeSpec& judge, int turn = 1);

// ---------------------------------------------------------------------------
// Math/reasoning failure harness
// ---------------------------------------------------------------------------

struct MathFailureRow {
    long long failures = 0;
    long long games = 0;
};

// A failure is a single game whose verdict endorses a model annotated as
// incorrect; ties and format errors are not failures. Every judged model must
// be annotated.
MathFailureRow math_failure_count(const std::vector<MatchResult>& matches,
                                  const std::vector<Annotation>& annotations);

// Runs the (model_a, model_b) pair over the question set under each requested
// judge mode and scores the games. Reference mode generates the judge's own
// solution for questions lacking one.
std::map<JudgeMode, MathFailureRow> math_failure_harness(
    const MatchRunner& runner, const std::vector<Question>& questions, const AnswerSet& answers,
    const std::string& model_a, const std::string& model_b, const std::string& judge_model,
    const std::vector<JudgeMode>& modes, const std::vector<Annotation>& annotations,
    std::vector<MatchResult>* all_matches = nullptr);

void to_json(nlohmann::json& j, const VerbosityReport& r);
void to_json(nlohmann::json& j, const CalibrationResult& r);
void to_json(nlohmann::json& j, const MathFailureRow& r);

} // namespace judgekit
