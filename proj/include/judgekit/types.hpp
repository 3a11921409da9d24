#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace judgekit {

// All types here are plain value objects: copy freely, share across threads by
// copying. Nothing in this header owns a connection, a lock, or a file handle.

// ---------------------------------------------------------------------------
// Questions and answers
// ---------------------------------------------------------------------------

enum class Category {
    Writing,
    Roleplay,
    Extraction,
    Reasoning,
    Math,
    Coding,
    Stem,
    Humanities,
};

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);
std::vector<Category> all_categories();

struct Question {
    int64_t question_id = 0;
    Category category = Category::Writing;
    // 1 or 2 user prompts. turns[1] is the follow-up in a two-turn benchmark.
    std::vector<std::string> turns;
    // Optional per-turn reference answers (math/reasoning questions mostly).
    std::optional<std::vector<std::string>> reference;
    // Unrecognized JSON fields from the source file, preserved on round-trip.
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Question&) const = default;
};

struct GenParams {
    double temperature = 0.0;
    // Epoch seconds of generation. Comes from the response cache when the
    // request was served from cache, so rerun outputs are byte-stable.
    double timestamp = 0.0;

    bool operator==(const GenParams&) const = default;
};

struct ModelAnswer {
    int64_t question_id = 0;
    std::string model_id;
    // One assistant reply per question turn.
    std::vector<std::string> turns;
    GenParams gen_params;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const ModelAnswer&) const = default;
};

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

enum class JudgeMode {
    Pairwise,
    Single,
    PairwiseReference,
    SingleReference,
    PairwiseMultiturn,
    SingleMultiturn,
    PairwiseCot,
};

std::string_view to_string(JudgeMode m);
std::optional<JudgeMode> judge_mode_from_string(std::string_view s);

enum class PromptVariant { Default, Rename, Score, Short };

std::string_view to_string(PromptVariant v);
std::optional<PromptVariant> prompt_variant_from_string(std::string_view s);

// A three-way preference. Used both for raw human votes and for judge votes
// after swap-aggregation collapses the two orderings.
enum class Vote { A, B, Tie };

std::string_view to_string(Vote v);
std::optional<Vote> vote_from_string(std::string_view s);

struct FewshotExemplar {
    std::string question;
    std::string answer_a;
    std::string answer_b;
    Vote verdict = Vote::Tie;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const FewshotExemplar&) const = default;
};

struct JudgeSpec {
    std::string judge_model;
    JudgeMode mode = JudgeMode::Pairwise;
    PromptVariant prompt_variant = PromptVariant::Default;
    // Empty = zero-shot. Exemplars are serialized into the prompt before the
    // target pair, sorted A-wins / B-wins / ties for a stable byte layout.
    std::vector<FewshotExemplar> fewshot_exemplars;
    double temperature = 0.0;

    bool operator==(const JudgeSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Game and match outcomes
// ---------------------------------------------------------------------------

// Verdict of a single ordered game, in position space: "FirstWins" means the
// answer shown first was preferred, whichever model that was.
enum class PairwiseVerdict { FirstWins, SecondWins, Tie, FormatError };

std::string_view to_string(PairwiseVerdict v);
std::optional<PairwiseVerdict> pairwise_verdict_from_string(std::string_view s);

// One judge call. `order` holds the model ids as presented (two entries for a
// pairwise game, one for single-answer grading).
struct GameRecord {
    int64_t question_id = 0;
    int turn_index = 1; // 1-based
    std::vector<std::string> order;
    std::string raw_judgment;
    PairwiseVerdict verdict = PairwiseVerdict::FormatError;
    std::optional<int> score; // single grading only; nullopt = format error
    JudgeSpec judge;
    std::string cache_key;

    bool operator==(const GameRecord&) const = default;
};

// Outcome of a swap-aggregated match in model space. TieInconsistent means the
// two orderings disagreed (position bias); TieBoth means the judge tied twice.
enum class MatchOutcome { WinA, WinB, TieBoth, TieInconsistent, Error };

std::string_view to_string(MatchOutcome o);
std::optional<MatchOutcome> match_outcome_from_string(std::string_view s);

// Serializes as the flat judgment schema: {question_id, turn, model_a,
// model_b, judge_model, mode, variant, g1_winner, g2_winner, outcome, g1_raw,
// g2_raw}. Winner labels are in model space ("A" = model_a won that game).
struct MatchResult {
    int64_t question_id = 0;
    int turn_index = 1;
    std::string model_a;
    std::string model_b;
    MatchOutcome outcome = MatchOutcome::Error;
    GameRecord game1; // presented as (model_a, model_b)
    GameRecord game2; // presented as (model_b, model_a); empty order when the
                      // match was played once with randomized positions
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const MatchResult&) const = default;
};

// Serializes as {question_id, turn, model, judge_model, mode, score, raw}.
struct SingleGrade {
    int64_t question_id = 0;
    int turn_index = 1;
    std::string model_id;
    std::optional<int> score; // 1..10; nullopt = format error
    std::string raw_judgment;
    JudgeSpec judge;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const SingleGrade&) const = default;
};

// ---------------------------------------------------------------------------
// Votes and agreement
// ---------------------------------------------------------------------------

// One individual's preference on one (question, turn, model pair) cell.
// judge_type groups individuals ("human", "g4-pair", ...); judge_id tells
// individuals of the same type apart (author id, or run id for LLM judges).
struct VoteRecord {
    int64_t question_id = 0;
    int turn_index = 1;
    std::string model_a;
    std::string model_b;
    std::string judge_type;
    std::string judge_id;
    Vote vote = Vote::Tie;
    // True when the source label was "both bad": collapsed to Tie for math,
    // kept countable for reporting.
    bool both_bad = false;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const VoteRecord&) const = default;
};

enum class AgreementSetup { S1, S2 }; // S1 = ties count, S2 = non-tie votes only

std::string_view to_string(AgreementSetup s);
std::optional<AgreementSetup> agreement_setup_from_string(std::string_view s);

struct AgreementReport {
    std::string judge_type_x;
    std::string judge_type_y;
    AgreementSetup setup = AgreementSetup::S1;
    double agreement = 0.0;
    // Exact value as a reduced fraction; `agreement` is num/den rounded.
    long long agreement_num = 0;
    long long agreement_den = 1;
    // Number of comparison pairs that contributed (the average's denominator).
    long long vote_count = 0;
    // Overlapping (question, turn, model-pair) cells and the raw votes inside.
    long long cell_count = 0;
    long long raw_vote_count = 0;
    double random_baseline = 1.0 / 3.0; // 1/3 for S1, 1/2 for S2

    bool operator==(const AgreementReport&) const = default;
};

struct PositionBiasReport {
    long long n_probes = 0;
    long long n_consistent = 0;
    long long n_biased_first = 0;
    long long n_biased_second = 0;
    long long n_error = 0;
    double consistency_pct = 0.0;
    double biased_first_pct = 0.0;
    double biased_second_pct = 0.0;
    double error_pct = 0.0;

    bool operator==(const PositionBiasReport&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string kind; // e.g. "duplicate_question_id", "turn_count_mismatch"
    int64_t question_id = 0;
    std::string model_id;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }

    bool operator==(const ValidationReport&) const = default;
};

ValidationReport validate_question_set(const std::vector<Question>& questions);
ValidationReport validate_answers(const std::vector<ModelAnswer>& answers,
                                  const std::vector<Question>& questions);

// ---------------------------------------------------------------------------
// JSON round-trip (ADL hooks for nlohmann::json)
// ---------------------------------------------------------------------------
// from_json(to_json(x)) == x for every type above. Unknown input fields land
// in `extra` where the type has one and are re-emitted by to_json.

void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);
void to_json(nlohmann::json& j, const GenParams& p);
void from_json(const nlohmann::json& j, GenParams& p);
void to_json(nlohmann::json& j, const ModelAnswer& a);
void from_json(const nlohmann::json& j, ModelAnswer& a);
void to_json(nlohmann::json& j, const FewshotExemplar& e);
void from_json(const nlohmann::json& j, FewshotExemplar& e);
void to_json(nlohmann::json& j, const JudgeSpec& s);
void from_json(const nlohmann::json& j, JudgeSpec& s);
void to_json(nlohmann::json& j, const GameRecord& g);
void from_json(const nlohmann::json& j, GameRecord& g);
void to_json(nlohmann::json& j, const MatchResult& m);
void from_json(const nlohmann::json& j, MatchResult& m);
void to_json(nlohmann::json& j, const SingleGrade& g);
void from_json(const nlohmann::json& j, SingleGrade& g);
void to_json(nlohmann::json& j, const VoteRecord& v);
void from_json(const nlohmann::json& j, VoteRecord& v);
void to_json(nlohmann::json& j, const AgreementReport& r);
void from_json(const nlohmann::json& j, AgreementReport& r);
void to_json(nlohmann::json& j, const PositionBiasReport& r);
void from_json(const nlohmann::json& j, PositionBiasReport& r);
void to_json(nlohmann::json& j, const Violation& v);
void from_json(const nlohmann::json& j, Violation& v);

} // namespace judgekit
