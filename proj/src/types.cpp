#include "judgekit/types.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "judgekit/errors.hpp"

namespace judgekit {

// ---------------------------------------------------------------------------
// enum <-> string
// ---------------------------------------------------------------------------

namespace {

template <typename E>
struct NamePair {
    E value;
    std::string_view name;
};

constexpr NamePair<Category> kCategories[] = {
    {Category::Writing, "writing"},       {Category::Roleplay, "roleplay"},
    {Category::Extraction, "extraction"}, {Category::Reasoning, "reasoning"},
    {Category::Math, "math"},             {Category::Coding, "coding"},
    {Category::Stem, "stem"},             {Category::Humanities, "humanities"},
};

constexpr NamePair<JudgeMode> kJudgeModes[] = {
    {JudgeMode::Pairwise, "pairwise"},
    {JudgeMode::Single, "single"},
    {JudgeMode::PairwiseReference, "pairwise_reference"},
    {JudgeMode::SingleReference, "single_reference"},
    {JudgeMode::PairwiseMultiturn, "pairwise_multiturn"},
    {JudgeMode::SingleMultiturn, "single_multiturn"},
    {JudgeMode::PairwiseCot, "pairwise_cot"},
};

constexpr NamePair<PromptVariant> kPromptVariants[] = {
    {PromptVariant::Default, "default"},
    {PromptVariant::Rename, "rename"},
    {PromptVariant::Score, "score"},
    {PromptVariant::Short, "short"},
};

constexpr NamePair<Vote> kVotes[] = {
    {Vote::A, "A"},
    {Vote::B, "B"},
    {Vote::Tie, "tie"},
};

constexpr NamePair<PairwiseVerdict> kVerdicts[] = {
    {PairwiseVerdict::FirstWins, "first_wins"},
    {PairwiseVerdict::SecondWins, "second_wins"},
    {PairwiseVerdict::Tie, "tie"},
    {PairwiseVerdict::FormatError, "format_error"},
};

constexpr NamePair<MatchOutcome> kOutcomes[] = {
    {MatchOutcome::WinA, "win_a"},
    {MatchOutcome::WinB, "win_b"},
    {MatchOutcome::TieBoth, "tie_both"},
    {MatchOutcome::TieInconsistent, "tie_inconsistent"},
    {MatchOutcome::Error, "error"},
};

constexpr NamePair<AgreementSetup> kSetups[] = {
    {AgreementSetup::S1, "s1"},
    {AgreementSetup::S2, "s2"},
};

template <typename E, size_t N>
std::string_view name_of(const NamePair<E> (&table)[N], E value) {
    for (const auto& p : table)
        if (p.value == value) return p.name;
    return "?";
}

template <typename E, size_t N>
std::optional<E> value_of(const NamePair<E> (&table)[N], std::string_view name) {
    for (const auto& p : table)
        if (p.name == name) return p.value;
    return std::nullopt;
}

} // namespace

std::string_view to_string(Category c) { return name_of(kCategories, c); }
std::optional<Category> category_from_string(std::string_view s) { return value_of(kCategories, s); }

std::vector<Category> all_categories() {
    std::vector<Category> out;
    for (const auto& p : kCategories) out.push_back(p.value);
    return out;
}

std::string_view to_string(JudgeMode m) { return name_of(kJudgeModes, m); }
std::optional<JudgeMode> judge_mode_from_string(std::string_view s) { return value_of(kJudgeModes, s); }

std::string_view to_string(PromptVariant v) { return name_of(kPromptVariants, v); }
std::optional<PromptVariant> prompt_variant_from_string(std::string_view s) {
    return value_of(kPromptVariants, s);
}

std::string_view to_string(Vote v) { return name_of(kVotes, v); }
std::optional<Vote> vote_from_string(std::string_view s) { return value_of(kVotes, s); }

std::string_view to_string(PairwiseVerdict v) { return name_of(kVerdicts, v); }
std::optional<PairwiseVerdict> pairwise_verdict_from_string(std::string_view s) {
    return value_of(kVerdicts, s);
}

std::string_view to_string(MatchOutcome o) { return name_of(kOutcomes, o); }
std::optional<MatchOutcome> match_outcome_from_string(std::string_view s) {
    return value_of(kOutcomes, s);
}

std::string_view to_string(AgreementSetup s) { return name_of(kSetups, s); }
std::optional<AgreementSetup> agreement_setup_from_string(std::string_view s) {
    return value_of(kSetups, s);
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

ValidationReport validate_question_set(const std::vector<Question>& questions) {
    ValidationReport report;
    std::set<int64_t> seen;
    for (const auto& q : questions) {
        if (!seen.insert(q.question_id).second)
            report.violations.push_back({"duplicate_question_id", q.question_id, "", ""});
        if (q.turns.empty() || q.turns.size() > 2)
            report.violations.push_back({"bad_turn_count", q.question_id, "",
                                         "expected 1 or 2 turns, got " + std::to_string(q.turns.size())});
        for (size_t i = 0; i < q.turns.size(); ++i)
            if (q.turns[i].empty())
                report.violations.push_back(
                    {"empty_turn", q.question_id, "", "turn " + std::to_string(i + 1)});
        if (q.reference && q.reference->size() != q.turns.size())
            report.violations.push_back({"reference_turn_mismatch", q.question_id, "",
                                         std::to_string(q.reference->size()) + " references for " +
                                             std::to_string(q.turns.size()) + " turns"});
    }
    return report;
}

ValidationReport validate_answers(const std::vector<ModelAnswer>& answers,
                                  const std::vector<Question>& questions) {
    ValidationReport report;
    std::set<std::pair<int64_t, std::string>> seen;
    std::set<int64_t> known;
    std::vector<std::pair<int64_t, size_t>> turn_counts;
    for (const auto& q : questions) {
        known.insert(q.question_id);
        turn_counts.emplace_back(q.question_id, q.turns.size());
    }
    for (const auto& a : answers) {
        if (!seen.insert({a.question_id, a.model_id}).second)
            report.violations.push_back({"duplicate_answer", a.question_id, a.model_id, ""});
        if (!known.count(a.question_id)) {
            report.violations.push_back({"unknown_question_id", a.question_id, a.model_id, ""});
            continue;
        }
        auto it = std::find_if(turn_counts.begin(), turn_counts.end(),
                               [&](const auto& p) { return p.first == a.question_id; });
        if (it != turn_counts.end() && a.turns.size() != it->second)
            report.violations.push_back({"turn_count_mismatch", a.question_id, a.model_id,
                                         std::to_string(a.turns.size()) + " answer turns for " +
                                             std::to_string(it->second) + " question turns"});
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON codecs
// ---------------------------------------------------------------------------
// Pattern: to_json starts from `extra` (so unknown inbound keys are re-emitted)
// and overwrites the recognized keys; from_json pulls the recognized keys out
// and leaves the rest in `extra`.

namespace {

nlohmann::json take_extra(nlohmann::json j, std::initializer_list<const char*> known) {
    if (!j.is_object()) return nlohmann::json::object();
    for (const char* k : known) j.erase(k);
    return j;
}

template <typename E>
E enum_from(const nlohmann::json& j, const char* key, std::optional<E> (*parse)(std::string_view)) {
    const std::string s = j.at(key).get<std::string>();
    auto v = parse(s);
    if (!v) throw ParseError(std::string("unrecognized ") + key + " value: " + s);
    return *v;
}

} // namespace

void to_json(nlohmann::json& j, const Question& q) {
    j = q.extra.is_object() ? q.extra : nlohmann::json::object();
    j["question_id"] = q.question_id;
    j["category"] = to_string(q.category);
    j["turns"] = q.turns;
    if (q.reference) j["reference"] = *q.reference;
}

void from_json(const nlohmann::json& j, Question& q) {
    q.question_id = j.at("question_id").get<int64_t>();
    q.category = enum_from(j, "category", &category_from_string);
    q.turns = j.at("turns").get<std::vector<std::string>>();
    if (j.contains("reference") && !j["reference"].is_null())
        q.reference = j["reference"].get<std::vector<std::string>>();
    else
        q.reference.reset();
    q.extra = take_extra(j, {"question_id", "category", "turns", "reference"});
}

void to_json(nlohmann::json& j, const GenParams& p) {
    j = nlohmann::json{{"temperature", p.temperature}, {"timestamp", p.timestamp}};
}

void from_json(const nlohmann::json& j, GenParams& p) {
    p.temperature = j.value("temperature", 0.0);
    p.timestamp = j.value("timestamp", 0.0);
}

void to_json(nlohmann::json& j, const ModelAnswer& a) {
    j = a.extra.is_object() ? a.extra : nlohmann::json::object();
    j["question_id"] = a.question_id;
    j["model_id"] = a.model_id;
    j["turns"] = a.turns;
    j["gen_params"] = a.gen_params;
}

void from_json(const nlohmann::json& j, ModelAnswer& a) {
    a.question_id = j.at("question_id").get<int64_t>();
    a.model_id = j.at("model_id").get<std::string>();
    a.turns = j.at("turns").get<std::vector<std::string>>();
    a.gen_params = j.value("gen_params", GenParams{});
    a.extra = take_extra(j, {"question_id", "model_id", "turns", "gen_params"});
}

void to_json(nlohmann::json& j, const FewshotExemplar& e) {
    j = e.extra.is_object() ? e.extra : nlohmann::json::object();
    j["question"] = e.question;
    j["answer_a"] = e.answer_a;
    j["answer_b"] = e.answer_b;
    j["verdict"] = to_string(e.verdict);
}

void from_json(const nlohmann::json& j, FewshotExemplar& e) {
    e.question = j.at("question").get<std::string>();
    e.answer_a = j.at("answer_a").get<std::string>();
    e.answer_b = j.at("answer_b").get<std::string>();
    e.verdict = enum_from(j, "verdict", &vote_from_string);
    e.extra = take_extra(j, {"question", "answer_a", "answer_b", "verdict"});
}

void to_json(nlohmann::json& j, const JudgeSpec& s) {
    j = nlohmann::json{{"judge_model", s.judge_model},
                       {"mode", to_string(s.mode)},
                       {"variant", to_string(s.prompt_variant)},
                       {"temperature", s.temperature}};
    if (!s.fewshot_exemplars.empty()) j["fewshot_exemplars"] = s.fewshot_exemplars;
}

void from_json(const nlohmann::json& j, JudgeSpec& s) {
    s.judge_model = j.at("judge_model").get<std::string>();
    s.mode = enum_from(j, "mode", &judge_mode_from_string);
    s.prompt_variant = enum_from(j, "variant", &prompt_variant_from_string);
    s.temperature = j.value("temperature", 0.0);
    if (j.contains("fewshot_exemplars"))
        s.fewshot_exemplars = j["fewshot_exemplars"].get<std::vector<FewshotExemplar>>();
    else
        s.fewshot_exemplars.clear();
}

void to_json(nlohmann::json& j, const GameRecord& g) {
    j = nlohmann::json{{"question_id", g.question_id},
                       {"turn", g.turn_index},
                       {"order", g.order},
                       {"raw_judgment", g.raw_judgment},
                       {"verdict", to_string(g.verdict)},
                       {"judge", g.judge},
                       {"cache_key", g.cache_key}};
    if (g.score) j["score"] = *g.score;
}

void from_json(const nlohmann::json& j, GameRecord& g) {
    g.question_id = j.at("question_id").get<int64_t>();
    g.turn_index = j.value("turn", 1);
    g.order = j.at("order").get<std::vector<std::string>>();
    g.raw_judgment = j.value("raw_judgment", "");
    g.verdict = enum_from(j, "verdict", &pairwise_verdict_from_string);
    if (j.contains("score") && !j["score"].is_null())
        g.score = j["score"].get<int>();
    else
        g.score.reset();
    g.judge = j.at("judge").get<JudgeSpec>();
    g.cache_key = j.value("cache_key", "");
}

namespace {

// Winner labels are in model space: game 1 is presented (model_a, model_b),
// game 2 swapped. "A" always means model_a won that game.
std::string winner_label(PairwiseVerdict v, bool game2) {
    switch (v) {
        case PairwiseVerdict::FirstWins: return game2 ? "B" : "A";
        case PairwiseVerdict::SecondWins: return game2 ? "A" : "B";
        case PairwiseVerdict::Tie: return "tie";
        case PairwiseVerdict::FormatError: return "error";
    }
    return "error";
}

PairwiseVerdict verdict_from_label(const std::string& label, bool game2) {
    if (label == "A") return game2 ? PairwiseVerdict::SecondWins : PairwiseVerdict::FirstWins;
    if (label == "B") return game2 ? PairwiseVerdict::FirstWins : PairwiseVerdict::SecondWins;
    if (label == "tie") return PairwiseVerdict::Tie;
    if (label == "error") return PairwiseVerdict::FormatError;
    throw ParseError("unrecognized winner label: " + label);
}

} // namespace

void to_json(nlohmann::json& j, const MatchResult& m) {
    j = m.extra.is_object() ? m.extra : nlohmann::json::object();
    j["question_id"] = m.question_id;
    j["turn"] = m.turn_index;
    j["model_a"] = m.model_a;
    j["model_b"] = m.model_b;
    const JudgeSpec& judge = m.game1.judge;
    j["judge_model"] = judge.judge_model;
    j["mode"] = to_string(judge.mode);
    j["variant"] = to_string(judge.prompt_variant);
    j["outcome"] = to_string(m.outcome);
    // A randomized single game may have been presented (model_b, model_a);
    // the label is in model space either way.
    const bool g1_swapped = !m.game1.order.empty() && m.game1.order[0] != m.model_a;
    j["g1_winner"] = winner_label(m.game1.verdict, g1_swapped);
    j["g1_raw"] = m.game1.raw_judgment;
    if (m.game2.order.empty()) {
        // single randomized game: record the order actually presented
        j["g2_winner"] = nullptr;
        j["g2_raw"] = nullptr;
        if (!m.game1.order.empty()) j["g1_order"] = m.game1.order;
    } else {
        j["g2_winner"] = winner_label(m.game2.verdict, true);
        j["g2_raw"] = m.game2.raw_judgment;
    }
}

void from_json(const nlohmann::json& j, MatchResult& m) {
    m.question_id = j.at("question_id").get<int64_t>();
    m.turn_index = j.value("turn", 1);
    m.model_a = j.at("model_a").get<std::string>();
    m.model_b = j.at("model_b").get<std::string>();
    m.outcome = enum_from(j, "outcome", &match_outcome_from_string);

    JudgeSpec judge;
    judge.judge_model = j.value("judge_model", "");
    judge.mode = j.contains("mode") ? enum_from(j, "mode", &judge_mode_from_string)
                                    : JudgeMode::Pairwise;
    judge.prompt_variant = j.contains("variant")
                               ? enum_from(j, "variant", &prompt_variant_from_string)
                               : PromptVariant::Default;

    m.game1 = GameRecord{};
    m.game1.question_id = m.question_id;
    m.game1.turn_index = m.turn_index;
    m.game1.judge = judge;
    if (j.contains("g1_order") && !j["g1_order"].is_null())
        m.game1.order = j["g1_order"].get<std::vector<std::string>>();
    else
        m.game1.order = {m.model_a, m.model_b};
    m.game1.raw_judgment = j.value("g1_raw", "");
    m.game1.verdict = verdict_from_label(j.at("g1_winner").get<std::string>(),
                                         m.game1.order[0] != m.model_a);

    m.game2 = GameRecord{};
    m.game2.question_id = m.question_id;
    m.game2.turn_index = m.turn_index;
    m.game2.judge = judge;
    if (j.contains("g2_winner") && !j["g2_winner"].is_null()) {
        m.game2.order = {m.model_b, m.model_a};
        if (j.contains("g2_raw") && !j["g2_raw"].is_null())
            m.game2.raw_judgment = j["g2_raw"].get<std::string>();
        m.game2.verdict = verdict_from_label(j["g2_winner"].get<std::string>(), true);
    }
    m.extra = take_extra(j, {"question_id", "turn", "model_a", "model_b", "judge_model", "mode",
                             "variant", "outcome", "g1_winner", "g1_raw", "g2_winner", "g2_raw",
                             "g1_order"});
}

void to_json(nlohmann::json& j, const SingleGrade& g) {
    j = g.extra.is_object() ? g.extra : nlohmann::json::object();
    j["question_id"] = g.question_id;
    j["turn"] = g.turn_index;
    j["model"] = g.model_id;
    j["judge_model"] = g.judge.judge_model;
    j["mode"] = to_string(g.judge.mode);
    j["score"] = g.score ? nlohmann::json(*g.score) : nlohmann::json(nullptr);
    j["raw"] = g.raw_judgment;
}

void from_json(const nlohmann::json& j, SingleGrade& g) {
    g.question_id = j.at("question_id").get<int64_t>();
    g.turn_index = j.value("turn", 1);
    g.model_id = j.at("model").get<std::string>();
    if (j.contains("score") && !j["score"].is_null())
        g.score = j["score"].get<int>();
    else
        g.score.reset();
    g.raw_judgment = j.value("raw", "");
    g.judge = JudgeSpec{};
    g.judge.judge_model = j.value("judge_model", "");
    g.judge.mode = j.contains("mode") ? enum_from(j, "mode", &judge_mode_from_string)
                                      : JudgeMode::Single;
    g.extra = take_extra(j, {"question_id", "turn", "model", "judge_model", "mode", "score",
                             "raw"});
}

void to_json(nlohmann::json& j, const VoteRecord& v) {
    j = v.extra.is_object() ? v.extra : nlohmann::json::object();
    j["question_id"] = v.question_id;
    j["turn"] = v.turn_index;
    j["model_a"] = v.model_a;
    j["model_b"] = v.model_b;
    j["judge_type"] = v.judge_type;
    j["judge_id"] = v.judge_id;
    j["vote"] = to_string(v.vote);
    if (v.both_bad) j["both_bad"] = true;
}

void from_json(const nlohmann::json& j, VoteRecord& v) {
    v.question_id = j.at("question_id").get<int64_t>();
    v.turn_index = j.value("turn", 1);
    v.model_a = j.at("model_a").get<std::string>();
    v.model_b = j.at("model_b").get<std::string>();
    v.judge_type = j.at("judge_type").get<std::string>();
    v.judge_id = j.value("judge_id", "");
    v.vote = enum_from(j, "vote", &vote_from_string);
    v.both_bad = j.value("both_bad", false);
    v.extra = take_extra(j, {"question_id", "turn", "model_a", "model_b", "judge_type",
                             "judge_id", "vote", "both_bad"});
}

void to_json(nlohmann::json& j, const AgreementReport& r) {
    j = nlohmann::json{{"judge_type_x", r.judge_type_x},
                       {"judge_type_y", r.judge_type_y},
                       {"setup", to_string(r.setup)},
                       {"agreement", r.agreement},
                       {"agreement_num", r.agreement_num},
                       {"agreement_den", r.agreement_den},
                       {"vote_count", r.vote_count},
                       {"cell_count", r.cell_count},
                       {"raw_vote_count", r.raw_vote_count},
                       {"random_baseline", r.random_baseline}};
}

void from_json(const nlohmann::json& j, AgreementReport& r) {
    r.judge_type_x = j.at("judge_type_x").get<std::string>();
    r.judge_type_y = j.at("judge_type_y").get<std::string>();
    r.setup = enum_from(j, "setup", &agreement_setup_from_string);
    r.agreement = j.at("agreement").get<double>();
    r.agreement_num = j.value("agreement_num", 0LL);
    r.agreement_den = j.value("agreement_den", 1LL);
    r.vote_count = j.value("vote_count", 0LL);
    r.cell_count = j.value("cell_count", 0LL);
    r.raw_vote_count = j.value("raw_vote_count", 0LL);
    r.random_baseline = j.value("random_baseline", 1.0 / 3.0);
}

void to_json(nlohmann::json& j, const PositionBiasReport& r) {
    j = nlohmann::json{{"n_probes", r.n_probes},
                       {"n_consistent", r.n_consistent},
                       {"n_biased_first", r.n_biased_first},
                       {"n_biased_second", r.n_biased_second},
                       {"n_error", r.n_error},
                       {"consistency_pct", r.consistency_pct},
                       {"biased_first_pct", r.biased_first_pct},
                       {"biased_second_pct", r.biased_second_pct},
                       {"error_pct", r.error_pct}};
}

void from_json(const nlohmann::json& j, PositionBiasReport& r) {
    r.n_probes = j.at("n_probes").get<long long>();
    r.n_consistent = j.at("n_consistent").get<long long>();
    r.n_biased_first = j.at("n_biased_first").get<long long>();
    r.n_biased_second = j.at("n_biased_second").get<long long>();
    r.n_error = j.at("n_error").get<long long>();
    r.consistency_pct = j.at("consistency_pct").get<double>();
    r.biased_first_pct = j.at("biased_first_pct").get<double>();
    r.biased_second_pct = j.at("biased_second_pct").get<double>();
    r.error_pct = j.at("error_pct").get<double>();
}

void to_json(nlohmann::json& j, const Violation& v) {
    j = nlohmann::json{{"kind", v.kind},
                       {"question_id", v.question_id},
                       {"model_id", v.model_id},
                       {"detail", v.detail}};
}

void from_json(const nlohmann::json& j, Violation& v) {
    v.kind = j.at("kind").get<std::string>();
    v.question_id = j.value("question_id", int64_t{0});
    v.model_id = j.value("model_id", "");
    v.detail = j.value("detail", "");
}

} // namespace judgekit
