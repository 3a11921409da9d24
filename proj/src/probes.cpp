#include "judgekit/probes.hpp"

#include <algorithm>
#include <charconv>

#include "judgekit/errors.hpp"

namespace judgekit {

// ---------------------------------------------------------------------------
// Probe pairs
// ---------------------------------------------------------------------------

std::string_view to_string(ProbeProvenance p) {
    switch (p) {
    case ProbeProvenance::SameModelResample: return "same_model_resample";
    case ProbeProvenance::OriginalVsAttacked: return "original_vs_attacked";
    case ProbeProvenance::Identical: return "identical";
    }
    return "same_model_resample";
}

std::optional<ProbeProvenance> probe_provenance_from_string(std::string_view s) {
    if (s == "same_model_resample") return ProbeProvenance::SameModelResample;
    if (s == "original_vs_attacked") return ProbeProvenance::OriginalVsAttacked;
    if (s == "identical") return ProbeProvenance::Identical;
    return std::nullopt;
}

void to_json(nlohmann::json& j, const ProbePair& p) {
    j = nlohmann::json{{"question_id", p.question_id},
                       {"answer_x", p.answer_x},
                       {"answer_y", p.answer_y},
                       {"provenance", std::string(to_string(p.provenance))}};
}

void from_json(const nlohmann::json& j, ProbePair& p) {
    p.question_id = j.at("question_id").get<int64_t>();
    p.answer_x = j.at("answer_x").get<std::string>();
    p.answer_y = j.at("answer_y").get<std::string>();
    const auto label = j.value("provenance", std::string("same_model_resample"));
    const auto parsed = probe_provenance_from_string(label);
    if (!parsed) throw ParseError("unknown probe provenance '" + label + "'");
    p.provenance = *parsed;
    if (p.provenance == ProbeProvenance::Identical && p.answer_x != p.answer_y)
        throw ParseError("probe marked identical but answers differ (question " +
                         std::to_string(p.question_id) + ")");
}

std::vector<ProbePair> read_probe_pairs(const std::filesystem::path& path) {
    std::vector<ProbePair> pairs;
    size_t line = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line;
        try {
            pairs.push_back(j.get<ProbePair>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    }
    return pairs;
}

void write_probe_pairs(const std::filesystem::path& path, const std::vector<ProbePair>& pairs) {
    std::vector<nlohmann::json> lines;
    lines.reserve(pairs.size());
    for (const auto& p : pairs) lines.push_back(p);
    write_jsonl(path, lines);
}

std::vector<ProbePair> build_position_probe_set(const std::vector<Question>& questions,
                                                const std::string& answer_model,
                                                Backend& backend, double temperature) {
    if (temperature == 0.0)
        throw InputError("position probes need temperature > 0 "
                         "(two samples at temperature 0 are identical)");
    std::vector<ProbePair> probes;
    probes.reserve(questions.size());
    for (const auto& q : questions) {
        if (q.turns.empty())
            throw InputError("question " + std::to_string(q.question_id) + " has no turns");
        CompletionRequest request;
        request.model = answer_model;
        request.user_text = q.turns.front();
        request.temperature = temperature;
        request.metadata["question_id"] = std::to_string(q.question_id);
        request.metadata["mode"] = "probe_sample";
        request.metadata["sample"] = "x";
        ProbePair probe;
        probe.question_id = q.question_id;
        probe.answer_x = backend.complete(request).text;
        request.metadata["sample"] = "y";
        probe.answer_y = backend.complete(request).text;
        probe.provenance = ProbeProvenance::SameModelResample;
        probes.push_back(std::move(probe));
    }
    return probes;
}

std::vector<ProbePair> probe_pairs_from_answer_files(const std::filesystem::path& answers_x,
                                                     const std::filesystem::path& answers_y) {
    const auto xs = read_answers(answers_x);
    const auto ys = read_answers(answers_y);
    std::map<int64_t, const ModelAnswer*> by_id;
    for (const auto& a : ys) by_id[a.question_id] = &a;
    std::vector<ProbePair> probes;
    for (const auto& a : xs) {
        const auto it = by_id.find(a.question_id);
        if (it == by_id.end()) continue; // join: only questions present on both sides
        if (a.turns.empty() || it->second->turns.empty())
            throw InputError("answer for question " + std::to_string(a.question_id) +
                             " has no turns");
        ProbePair probe;
        probe.question_id = a.question_id;
        probe.answer_x = a.turns.front();
        probe.answer_y = it->second->turns.front();
        probe.provenance = ProbeProvenance::SameModelResample;
        probes.push_back(std::move(probe));
    }
    return probes;
}

RunOutput judge_probe_set(const MatchRunner& runner, const std::vector<Question>& questions,
                          const std::vector<ProbePair>& probes, const JudgeSpec& judge) {
    std::map<int64_t, const Question*> by_id;
    for (const auto& q : questions) by_id[q.question_id] = &q;
    // Probes are a first-turn experiment: plan over single-turn copies of the
    // probed questions so the runner never schedules a second turn.
    MatchPlan plan;
    plan.pairing = Pairing::AllPairs;
    plan.models = {"sample_x", "sample_y"};
    plan.judge = judge;
    plan.turns = TurnSelection::Turn1;
    AnswerSet answers;
    for (const auto& probe : probes) {
        const auto it = by_id.find(probe.question_id);
        if (it == by_id.end())
            throw InputError("probe references unknown question " +
                             std::to_string(probe.question_id));
        if (it->second->turns.empty())
            throw InputError("question " + std::to_string(probe.question_id) + " has no turns");
        Question q = *it->second;
        q.turns.resize(1);
        if (q.reference) q.reference->resize(1);
        plan.questions.push_back(std::move(q));
        ModelAnswer ax;
        ax.question_id = probe.question_id;
        ax.model_id = "sample_x";
        ax.turns = {probe.answer_x};
        ModelAnswer ay = ax;
        ay.model_id = "sample_y";
        ay.turns = {probe.answer_y};
        answers.add(std::move(ax));
        answers.add(std::move(ay));
    }
    return runner.run_plan(plan, answers);
}

// ---------------------------------------------------------------------------
// Position-bias classification
// ---------------------------------------------------------------------------

std::string_view to_string(ProbeClass c) {
    switch (c) {
    case ProbeClass::Consistent: return "consistent";
    case ProbeClass::BiasedFirst: return "biased_first";
    case ProbeClass::BiasedSecond: return "biased_second";
    case ProbeClass::Error: return "error";
    }
    return "error";
}

ProbeClass classify_probe(PairwiseVerdict g1, PairwiseVerdict g2) {
    using V = PairwiseVerdict;
    if (g1 == V::FormatError || g2 == V::FormatError) return ProbeClass::Error;
    // Both games independently preferred a fixed *position*.
    const bool g1_first = g1 == V::FirstWins, g2_first = g2 == V::FirstWins;
    const bool g1_second = g1 == V::SecondWins, g2_second = g2 == V::SecondWins;
    if (g1_first && g2_first) return ProbeClass::BiasedFirst;
    if (g1_second && g2_second) return ProbeClass::BiasedSecond;
    // Model-space agreement: X wins both orders, Y wins both, or double tie.
    if ((g1_first && g2_second) || (g1_second && g2_first) || (g1 == V::Tie && g2 == V::Tie))
        return ProbeClass::Consistent;
    // One win, one tie: lean it toward the position that took the win.
    if (g1_first || g2_first) return ProbeClass::BiasedFirst;
    return ProbeClass::BiasedSecond;
}

PositionBiasReport position_bias_report(
    const std::vector<std::pair<PairwiseVerdict, PairwiseVerdict>>& verdicts) {
    if (verdicts.empty()) throw InputError("no probe verdicts to classify");
    PositionBiasReport report;
    report.n_probes = static_cast<long long>(verdicts.size());
    for (const auto& [g1, g2] : verdicts) {
        switch (classify_probe(g1, g2)) {
        case ProbeClass::Consistent: ++report.n_consistent; break;
        case ProbeClass::BiasedFirst: ++report.n_biased_first; break;
        case ProbeClass::BiasedSecond: ++report.n_biased_second; break;
        case ProbeClass::Error: ++report.n_error; break;
        }
    }
    const double n = static_cast<double>(report.n_probes);
    report.consistency_pct = 100.0 * report.n_consistent / n;
    report.biased_first_pct = 100.0 * report.n_biased_first / n;
    report.biased_second_pct = 100.0 * report.n_biased_second / n;
    report.error_pct = 100.0 * report.n_error / n;
    return report;
}

namespace {

std::pair<PairwiseVerdict, PairwiseVerdict> two_game_verdicts(const MatchResult& m) {
    if (m.game2.order.empty())
        throw InputError("match for question " + std::to_string(m.question_id) +
                         " was judged in one order only; probes need both orders");
    return {m.game1.verdict, m.game2.verdict};
}

} // namespace

PositionBiasReport position_bias_report(const std::vector<MatchResult>& matches) {
    std::vector<std::pair<PairwiseVerdict, PairwiseVerdict>> verdicts;
    verdicts.reserve(matches.size());
    for (const auto& m : matches) verdicts.push_back(two_game_verdicts(m));
    return position_bias_report(verdicts);
}

std::optional<ProbeGroupKey> probe_group_key_from_string(std::string_view s) {
    if (s == "category") return ProbeGroupKey::Category;
    if (s == "model_pair" || s == "model-pair") return ProbeGroupKey::ModelPair;
    if (s == "prompt_variant" || s == "prompt-variant") return ProbeGroupKey::PromptVariant;
    return std::nullopt;
}

std::map<std::string, PositionBiasReport> group_position_bias(
    const std::vector<MatchResult>& matches, ProbeGroupKey key,
    const std::map<int64_t, Category>& question_categories) {
    std::map<std::string, std::vector<std::pair<PairwiseVerdict, PairwiseVerdict>>> groups;
    for (const auto& m : matches) {
        std::string group;
        switch (key) {
        case ProbeGroupKey::Category: {
            const auto it = question_categories.find(m.question_id);
            if (it == question_categories.end())
                throw InputError("no category known for question " +
                                 std::to_string(m.question_id));
            group = to_string(it->second);
            break;
        }
        case ProbeGroupKey::ModelPair: group = m.model_a + " vs " + m.model_b; break;
        case ProbeGroupKey::PromptVariant:
            group = std::string(to_string(m.game1.judge.prompt_variant));
            break;
        }
        groups[group].push_back(two_game_verdicts(m));
    }
    std::map<std::string, PositionBiasReport> out;
    for (const auto& [group, verdicts] : groups) out.emplace(group, position_bias_report(verdicts));
    return out;
}

// ---------------------------------------------------------------------------
// Repetitive-list attack
// ---------------------------------------------------------------------------

namespace {

struct MarkerLine {
    bool is_marker = false;
    long long number = 0;
    char style = '.';
    std::string_view item; // text after "<n><style> "
};

MarkerLine parse_marker_line(std::string_view line) {
    MarkerLine m;
    size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i == 0 || i > 18) return m;
    if (i >= line.size() || (line[i] != '.' && line[i] != ')')) return m;
    const char style = line[i];
    if (i + 1 >= line.size() || line[i + 1] != ' ') return m;
    long long number = 0;
    std::from_chars(line.data(), line.data() + i, number);
    m.is_marker = true;
    m.number = number;
    m.style = style;
    m.item = line.substr(i + 2);
    return m;
}

std::vector<std::string_view> split_lines(const std::string& text) {
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start <= text.size()) {
        const size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(std::string_view(text).substr(start));
            break;
        }
        lines.push_back(std::string_view(text).substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

} // namespace

std::string rebuild_numbered_list(const NumberedList& list) {
    std::vector<std::string> lines;
    if (!list.preamble.empty()) lines.push_back(list.preamble);
    for (size_t i = 0; i < list.items.size(); ++i)
        lines.push_back(std::to_string(i + 1) + list.marker_style + " " + list.items[i]);
    if (!list.postamble.empty()) lines.push_back(list.postamble);
    return join_lines(lines);
}

std::optional<NumberedList> extract_numbered_list(const std::string& answer) {
    const auto lines = split_lines(answer);
    for (size_t start = 0; start < lines.size(); ++start) {
        const auto first = parse_marker_line(lines[start]);
        if (!first.is_marker || first.number != 1) continue;
        NumberedList list;
        list.marker_style = first.style;
        list.items.emplace_back(first.item);
        size_t end = start + 1;
        while (end < lines.size()) {
            const auto next = parse_marker_line(lines[end]);
            if (!next.is_marker || next.style != first.style ||
                next.number != static_cast<long long>(list.items.size()) + 1)
                break;
            list.items.emplace_back(next.item);
            ++end;
        }
        if (list.items.size() < 2) continue;
        std::vector<std::string> pre(lines.begin(), lines.begin() + start);
        std::vector<std::string> post(lines.begin() + end, lines.end());
        list.preamble = join_lines(pre);
        list.postamble = join_lines(post);
        // Only hand back shapes the fixed rebuild rule reproduces exactly;
        // anything else (leading blank line, trailing newline after a bare
        // list, ...) is not an extractable list.
        if (rebuild_numbered_list(list) != answer) return std::nullopt;
        return list;
    }
    return std::nullopt;
}

std::string build_repetitive_list_attack(const std::string& answer,
                                         const std::vector<std::string>& rephrased_items) {
    auto list = extract_numbered_list(answer);
    if (!list) throw InputError("answer contains no extractable numbered list");
    if (rephrased_items.size() != list->items.size())
        throw InputError("got " + std::to_string(rephrased_items.size()) + " rephrasings for a " +
                         std::to_string(list->items.size()) + "-item list");
    std::vector<std::string> doubled = rephrased_items;
    doubled.insert(doubled.end(), list->items.begin(), list->items.end());
    list->items = std::move(doubled);
    return rebuild_numbered_list(*list);
}

VerbosityReport verbosity_failure_rate(const std::vector<MatchResult>& matches,
                                       const std::string& attacked_model) {
    if (matches.empty()) throw InputError("no judged pairs for the verbosity probe");
    VerbosityReport report;
    report.n = static_cast<long long>(matches.size());
    for (const auto& m : matches) {
        const std::string& attacked = attacked_model.empty() ? m.model_a : attacked_model;
        if (attacked != m.model_a && attacked != m.model_b)
            throw InputError("attacked model '" + attacked + "' not in match " + m.model_a +
                             " vs " + m.model_b);
        const bool attacked_won = (m.outcome == MatchOutcome::WinA && attacked == m.model_a) ||
                                  (m.outcome == MatchOutcome::WinB && attacked == m.model_b);
        if (attacked_won) ++report.failures;
    }
    report.rate = static_cast<double>(report.failures) / static_cast<double>(report.n);
    return report;
}

// ---------------------------------------------------------------------------
// Identical-answer calibration
// ---------------------------------------------------------------------------

std::vector<CalibrationResult> identical_answer_calibration(const MatchRunner& runner,
                                                            const std::vector<Question>& questions,
                                                            const std::vector<ModelAnswer>& answers,
                                                            const JudgeSpec& judge, int turn) {
    std::map<int64_t, const Question*> by_id;
    for (const auto& q : questions) by_id[q.question_id] = &q;
    std::vector<CalibrationResult> results;
    results.reserve(answers.size());
    for (const auto& answer : answers) {
        const auto it = by_id.find(answer.question_id);
        if (it == by_id.end())
            throw InputError("answer references unknown question " +
                             std::to_string(answer.question_id));
        AnswerSet set;
        ModelAnswer copy = answer;
        copy.model_id = answer.model_id + "+copy";
        set.add(answer);
        set.add(std::move(copy));
        const auto match = runner.run_pairwise_match(*it->second, turn, answer.model_id,
                                                     answer.model_id + "+copy", judge, set);
        CalibrationResult r;
        r.question_id = answer.question_id;
        r.model_id = answer.model_id;
        r.outcome = match.outcome;
        r.pass = match.outcome == MatchOutcome::TieBoth;
        results.push_back(std::move(r));
    }
    return results;
}

void to_json(nlohmann::json& j, const VerbosityReport& r) {
    j = nlohmann::json{{"failures", r.failures}, {"n", r.n}, {"rate", r.rate}};
}

void to_json(nlohmann::json& j, const CalibrationResult& r) {
    j = nlohmann::json{{"question_id", r.question_id},
                       {"model", r.model_id},
                       {"outcome", std::string(to_string(r.outcome))},
                       {"pass", r.pass}};
}

void to_json(nlohmann::json& j, const MathFailureRow& r) {
    j = nlohmann::json{{"failures", r.failures}, {"games", r.games}};
}

// ---------------------------------------------------------------------------
// Math/reasoning failure harness
// ---------------------------------------------------------------------------

MathFailureRow math_failure_count(const std::vector<MatchResult>& matches,
                                  const std::vector<Annotation>& annotations) {
    std::map<std::pair<int64_t, std::string>, bool> correct;
    for (const auto& a : annotations) correct[{a.question_id, a.model_id}] = a.is_correct;
    const auto incorrect = [&](int64_t question_id, const std::string& model) {
        const auto it = correct.find({question_id, model});
        if (it == correct.end())
            throw InputError("no correctness annotation for question " +
                             std::to_string(question_id) + ", model '" + model + "'");
        return !it->second;
    };

    MathFailureRow row;
    for (const auto& m : matches) {
        const auto score_game = [&](const GameRecord& game) {
            if (game.order.size() != 2)
                throw InputError("game record without a two-model order (question " +
                                 std::to_string(m.question_id) + ")");
            ++row.games;
            if (game.verdict == PairwiseVerdict::FirstWins && incorrect(m.question_id, game.order[0]))
                ++row.failures;
            else if (game.verdict == PairwiseVerdict::SecondWins &&
                     incorrect(m.question_id, game.order[1]))
                ++row.failures;
        };
        score_game(m.game1);
        if (!m.game2.order.empty()) score_game(m.game2);
    }
    return row;
}

std::map<JudgeMode, MathFailureRow> math_failure_harness(
    const MatchRunner& runner, const std::vector<Question>& questions, const AnswerSet& answers,
    const std::string& model_a, const std::string& model_b, const std::string& judge_model,
    const std::vector<JudgeMode>& modes, const std::vector<Annotation>& annotations,
    std::vector<MatchResult>* all_matches) {
    if (annotations.empty()) throw InputError("math harness needs correctness annotations");
    std::map<JudgeMode, MathFailureRow> table;
    for (const JudgeMode mode : modes) {
        if (mode != JudgeMode::Pairwise && mode != JudgeMode::PairwiseCot &&
            mode != JudgeMode::PairwiseReference)
            throw InputError("math harness mode must be pairwise, pairwise_cot or "
                             "pairwise_reference");
        JudgeSpec judge;
        judge.judge_model = judge_model;
        judge.mode = mode;
        std::vector<MatchResult> matches;
        matches.reserve(questions.size());
        for (const auto& q : questions)
            matches.push_back(runner.run_pairwise_match(q, 1, model_a, model_b, judge, answers));
        table[mode] = math_failure_count(matches, annotations);
        if (all_matches)
            all_matches->insert(all_matches->end(), matches.begin(), matches.end());
    }
    return table;
}

} // namespace judgekit
