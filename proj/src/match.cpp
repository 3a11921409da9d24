#include "judgekit/match.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <thread>

#include "judgekit/digest.hpp"
#include "judgekit/errors.hpp"
#include "judgekit/io.hpp"

namespace judgekit {

// ---------------------------------------------------------------------------
// verdict parsing
// ---------------------------------------------------------------------------

PairwiseVerdict parse_pairwise_verdict(std::string_view raw) {
    struct Token {
        std::string_view text;
        PairwiseVerdict verdict;
    };
    static constexpr Token tokens[] = {
        {"[[A]]", PairwiseVerdict::FirstWins},
        {"[[B]]", PairwiseVerdict::SecondWins},
        {"[[C]]", PairwiseVerdict::Tie},
    };
    size_t best = std::string_view::npos;
    PairwiseVerdict verdict = PairwiseVerdict::FormatError;
    for (const auto& t : tokens) {
        size_t pos = raw.rfind(t.text);
        if (pos != std::string_view::npos && (best == std::string_view::npos || pos > best)) {
            best = pos;
            verdict = t.verdict;
        }
    }
    return verdict;
}

std::optional<int> parse_single_score(std::string_view raw) {
    constexpr std::string_view pattern = "Rating: [[";
    std::optional<int> last;
    size_t pos = 0;
    while ((pos = raw.find(pattern, pos)) != std::string_view::npos) {
        size_t d = pos + pattern.size();
        size_t e = d;
        while (e < raw.size() && std::isdigit(static_cast<unsigned char>(raw[e]))) ++e;
        // ratings are 1..10, so a syntactic match has 1-2 digits then "]]"
        if (e > d && e - d <= 2 && e + 1 < raw.size() && raw[e] == ']' && raw[e + 1] == ']')
            last = std::stoi(std::string(raw.substr(d, e - d)));
        ++pos;
    }
    if (!last || *last < 1 || *last > 10) return std::nullopt;
    return last;
}

MatchOutcome aggregate_swapped(PairwiseVerdict g1, PairwiseVerdict g2) {
    if (g1 == PairwiseVerdict::FormatError || g2 == PairwiseVerdict::FormatError)
        return MatchOutcome::Error;
    // Map both games into model space: game 1 presented (A,B), game 2 (B,A).
    auto to_model = [](PairwiseVerdict v, bool swapped) -> int { // 0=A, 1=B, 2=tie
        if (v == PairwiseVerdict::Tie) return 2;
        bool first = v == PairwiseVerdict::FirstWins;
        if (swapped) first = !first;
        return first ? 0 : 1;
    };
    const int m1 = to_model(g1, false);
    const int m2 = to_model(g2, true);
    if (m1 == 0 && m2 == 0) return MatchOutcome::WinA;
    if (m1 == 1 && m2 == 1) return MatchOutcome::WinB;
    if (m1 == 2 && m2 == 2) return MatchOutcome::TieBoth;
    return MatchOutcome::TieInconsistent;
}

// ---------------------------------------------------------------------------
// plans / answers
// ---------------------------------------------------------------------------

std::string_view to_string(Pairing p) {
    return p == Pairing::AllPairs ? "all-pairs" : "vs-baseline";
}

std::optional<Pairing> pairing_from_string(std::string_view s) {
    if (s == "all-pairs" || s == "all_pairs") return Pairing::AllPairs;
    if (s == "vs-baseline" || s == "vs_baseline") return Pairing::VsBaseline;
    return std::nullopt;
}

std::string_view to_string(TurnSelection t) {
    switch (t) {
        case TurnSelection::Turn1: return "turn1";
        case TurnSelection::Turn2: return "turn2";
        case TurnSelection::Both: return "both";
    }
    return "?";
}

std::optional<TurnSelection> turn_selection_from_string(std::string_view s) {
    if (s == "turn1") return TurnSelection::Turn1;
    if (s == "turn2") return TurnSelection::Turn2;
    if (s == "both") return TurnSelection::Both;
    return std::nullopt;
}

void AnswerSet::add(ModelAnswer answer) {
    auto key = std::make_pair(answer.question_id, answer.model_id);
    if (!answers_.emplace(std::move(key), std::move(answer)).second)
        throw InputError("duplicate answer for question " + std::to_string(key.first) +
                         " by model " + key.second);
}

AnswerSet AnswerSet::from_files(const std::vector<std::filesystem::path>& paths) {
    AnswerSet set;
    for (const auto& p : paths)
        for (auto& a : read_answers(p)) set.add(std::move(a));
    return set;
}

const ModelAnswer* AnswerSet::find(int64_t question_id, const std::string& model_id) const {
    auto it = answers_.find({question_id, model_id});
    return it == answers_.end() ? nullptr : &it->second;
}

const ModelAnswer& AnswerSet::at(int64_t question_id, const std::string& model_id) const {
    if (const ModelAnswer* a = find(question_id, model_id)) return *a;
    throw InputError("no answer for question " + std::to_string(question_id) + " by model " +
                     model_id);
}

std::vector<std::string> AnswerSet::models() const {
    std::vector<std::string> out;
    for (const auto& [key, a] : answers_)
        if (std::find(out.begin(), out.end(), key.second) == out.end()) out.push_back(key.second);
    std::sort(out.begin(), out.end());
    return out;
}

std::string plan_digest(const MatchPlan& plan, const AnswerSet& answers) {
    nlohmann::json j;
    j["pairing"] = to_string(plan.pairing);
    j["baseline"] = plan.baseline_model.value_or("");
    j["models"] = plan.models;
    j["turns"] = to_string(plan.turns);
    j["judge"] = plan.judge;
    auto questions = nlohmann::json::array();
    for (const auto& q : plan.questions) {
        nlohmann::json qj = q;
        questions.push_back({{"id", q.question_id}, {"sha", sha256_hex(qj.dump())}});
    }
    j["questions"] = std::move(questions);
    auto answer_shas = nlohmann::json::array();
    for (const auto& q : plan.questions)
        for (const auto& m : plan.models)
            if (const ModelAnswer* a = answers.find(q.question_id, m)) {
                nlohmann::json aj = *a;
                answer_shas.push_back(
                    {{"q", q.question_id}, {"m", m}, {"sha", sha256_hex(aj.dump())}});
            }
    j["answers"] = std::move(answer_shas);
    return sha256_hex(j.dump());
}

nlohmann::json manifest_json(const RunManifest& m) {
    nlohmann::json results{{"run_id", m.run_id},
                           {"plan_digest", m.plan_digest},
                           {"matches_total", m.matches_total},
                           {"grades_total", m.grades_total},
                           {"games_total", m.games_total},
                           {"outcome_counts", m.outcome_counts},
                           {"format_error_games", m.format_error_games},
                           {"errors", m.errors}};
    nlohmann::json stats{{"wall_ms", m.wall_ms},
                         {"backend_calls", m.backend_calls},
                         {"cache_hits", m.cache_hits}};
    return nlohmann::json{{"results", std::move(results)}, {"stats", std::move(stats)}};
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

namespace {

bool is_single_mode(JudgeMode mode) {
    return mode == JudgeMode::Single || mode == JudgeMode::SingleReference ||
           mode == JudgeMode::SingleMultiturn;
}

std::string joined_turns(const ModelAnswer& a, int upto) {
    std::string out;
    for (int i = 0; i < upto && size_t(i) < a.turns.size(); ++i) {
        if (i) out += "\n";
        out += a.turns[i];
    }
    return out;
}

// Tasks run on a small worker pool; each task must catch its own exceptions.
void parallel_for(size_t n, int parallelism, const std::function<void(size_t)>& fn) {
    size_t workers = std::min<size_t>(std::max(parallelism, 1), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace

MatchRunner::MatchRunner(const TemplateStore& templates, Backend& backend, RunnerOptions options)
    : templates_(templates), backend_(backend), options_(options) {}

std::vector<std::string> MatchRunner::references_for(const Question& question,
                                                     const std::string& judge_model) const {
    if (question.reference && question.reference->size() == question.turns.size()) {
        bool complete = true;
        for (const auto& r : *question.reference)
            if (r.empty()) complete = false;
        if (complete) return *question.reference;
    }
    std::lock_guard lock(ref_mutex_);
    auto it = generated_refs_.find(question.question_id);
    if (it != generated_refs_.end()) return it->second;
    Question copy = question;
    ensure_references(backend_, copy, judge_model);
    generated_refs_[question.question_id] = *copy.reference;
    return *copy.reference;
}

GameRecord MatchRunner::judge_one(const Question& question, int turn,
                                  const std::string& first_model,
                                  const std::string& second_model, const JudgeSpec& judge,
                                  const AnswerSet& answers) const {
    const ModelAnswer& first = answers.at(question.question_id, first_model);
    const ModelAnswer& second = answers.at(question.question_id, second_model);
    const TemplateRole role = role_for(judge.mode, turn);
    const PromptVariant variant = judge.prompt_variant;

    RenderedPrompt prompt;
    switch (role) {
        case TemplateRole::Pairwise:
            prompt = render_pairwise(templates_.resolve(role, variant), question, turn, first,
                                     second, variant);
            break;
        case TemplateRole::PairwiseReference: {
            auto refs = references_for(question, judge.judge_model);
            prompt = render_pairwise(templates_.resolve(role, variant), question, turn, first,
                                     second, variant, refs.at(size_t(turn - 1)));
            break;
        }
        case TemplateRole::PairwiseCot:
            prompt = render_cot(templates_.resolve(role, variant), question, turn, first, second);
            break;
        case TemplateRole::PairwiseMultiturn:
            prompt = render_multiturn_pairwise(templates_.resolve(role, variant), question, first,
                                               second, turn);
            break;
        default:
            throw InputError("pairwise game requested for single-answer mode " +
                             std::string(to_string(judge.mode)));
    }
    if (!judge.fewshot_exemplars.empty()) prompt = insert_fewshot(prompt, judge.fewshot_exemplars);

    CompletionRequest request;
    request.system_text = prompt.system_text;
    request.user_text = prompt.user_text;
    request.model = judge.judge_model;
    request.temperature = judge.temperature;
    request.metadata["question_id"] = std::to_string(question.question_id);
    request.metadata["turn"] = std::to_string(turn);
    request.metadata["mode"] = std::string(to_string(judge.mode));
    request.metadata["variant"] = std::string(to_string(variant));
    request.metadata["order_first"] = first_model;
    request.metadata["order_second"] = second_model;
    request.metadata["answer_first"] = role == TemplateRole::PairwiseMultiturn
                                           ? joined_turns(first, turn)
                                           : first.turns.at(size_t(turn - 1));
    request.metadata["answer_second"] = role == TemplateRole::PairwiseMultiturn
                                            ? joined_turns(second, turn)
                                            : second.turns.at(size_t(turn - 1));

    CompletionResult result = backend_.complete(request);
    result.from_cache ? ++cached_calls_ : ++live_calls_;

    GameRecord game;
    game.question_id = question.question_id;
    game.turn_index = turn;
    game.order = {first_model, second_model};
    game.raw_judgment = result.text;
    game.verdict = parse_pairwise_verdict(result.text);
    game.judge = judge;
    game.cache_key = cache_key(request);
    return game;
}

GameRecord MatchRunner::play_pairwise_game(const Question& question, int turn,
                                           const std::string& first_model,
                                           const std::string& second_model,
                                           const JudgeSpec& judge,
                                           const AnswerSet& answers) const {
    return judge_one(question, turn, first_model, second_model, judge, answers);
}

MatchResult MatchRunner::run_pairwise_match(const Question& question, int turn,
                                            const std::string& model_a,
                                            const std::string& model_b, const JudgeSpec& judge,
                                            const AnswerSet& answers) const {
    if (is_single_mode(judge.mode))
        throw InputError("run_pairwise_match called with single-answer mode " +
                         std::string(to_string(judge.mode)));
    MatchResult result;
    result.question_id = question.question_id;
    result.turn_index = turn;
    result.model_a = model_a;
    result.model_b = model_b;

    if (options_.randomize_positions) {
        // One game in a seed-derived order, verdict taken at face value.
        const std::string h =
            sha256_fields({std::to_string(options_.seed), std::to_string(question.question_id),
                           std::to_string(turn), model_a, model_b});
        const bool a_first = (h[0] % 2) == 0;
        GameRecord game = judge_one(question, turn, a_first ? model_a : model_b,
                                    a_first ? model_b : model_a, judge, answers);
        result.game1 = game;
        switch (game.verdict) {
            case PairwiseVerdict::FormatError: result.outcome = MatchOutcome::Error; break;
            case PairwiseVerdict::Tie: result.outcome = MatchOutcome::TieBoth; break;
            case PairwiseVerdict::FirstWins:
                result.outcome = game.order[0] == model_a ? MatchOutcome::WinA : MatchOutcome::WinB;
                break;
            case PairwiseVerdict::SecondWins:
                result.outcome = game.order[1] == model_a ? MatchOutcome::WinA : MatchOutcome::WinB;
                break;
        }
        return result;
    }

    result.game1 = judge_one(question, turn, model_a, model_b, judge, answers);
    result.game2 = judge_one(question, turn, model_b, model_a, judge, answers);
    result.outcome = aggregate_swapped(result.game1.verdict, result.game2.verdict);
    return result;
}

SingleGrade MatchRunner::run_single_grading(const Question& question, int turn,
                                            const std::string& model, const JudgeSpec& judge,
                                            const AnswerSet& answers) const {
    if (!is_single_mode(judge.mode))
        throw InputError("run_single_grading called with pairwise mode " +
                         std::string(to_string(judge.mode)));
    if (!judge.fewshot_exemplars.empty())
        throw InputError("few-shot exemplars are pairwise-only");

    const ModelAnswer& answer = answers.at(question.question_id, model);
    const TemplateRole role = role_for(judge.mode, turn);
    const PromptVariant variant = judge.prompt_variant;

    RenderedPrompt prompt;
    switch (role) {
        case TemplateRole::Single:
            prompt = render_single(templates_.resolve(role, variant), question, turn, answer);
            break;
        case TemplateRole::SingleReference: {
            auto refs = references_for(question, judge.judge_model);
            prompt = render_single(templates_.resolve(role, variant), question, turn, answer,
                                   refs.at(size_t(turn - 1)));
            break;
        }
        case TemplateRole::SingleMultiturn:
            prompt = render_multiturn_single(templates_.resolve(role, variant), question, answer,
                                             turn);
            break;
        case TemplateRole::SingleMultiturnReference: {
            auto refs = references_for(question, judge.judge_model);
            prompt = render_multiturn_single(templates_.resolve(role, variant), question, answer,
                                             turn, &refs);
            break;
        }
        default:
            throw InputError("single grading requested for pairwise mode " +
                             std::string(to_string(judge.mode)));
    }

    CompletionRequest request;
    request.system_text = prompt.system_text;
    request.user_text = prompt.user_text;
    request.model = judge.judge_model;
    request.temperature = judge.temperature;
    request.metadata["question_id"] = std::to_string(question.question_id);
    request.metadata["turn"] = std::to_string(turn);
    request.metadata["mode"] = std::string(to_string(judge.mode));
    request.metadata["variant"] = std::string(to_string(variant));
    request.metadata["graded_model"] = model;
    request.metadata["order_first"] = model;
    request.metadata["answer_first"] = role == TemplateRole::Single ||
                                               role == TemplateRole::SingleReference
                                           ? answer.turns.at(size_t(turn - 1))
                                           : joined_turns(answer, turn);

    CompletionResult result = backend_.complete(request);
    result.from_cache ? ++cached_calls_ : ++live_calls_;

    SingleGrade grade;
    grade.question_id = question.question_id;
    grade.turn_index = turn;
    grade.model_id = model;
    grade.score = parse_single_score(result.text);
    grade.raw_judgment = result.text;
    grade.judge = judge;
    return grade;
}

RunOutput MatchRunner::run_plan(const MatchPlan& plan, const AnswerSet& answers) const {
    const bool single = is_single_mode(plan.judge.mode);

    // ---- upfront validation: fail before the first backend call
    if (plan.models.empty()) throw InputError("plan has no models");
    if (!single && plan.models.size() < 2 && plan.pairing == Pairing::AllPairs)
        throw InputError("pairwise plan needs at least two models");
    if (plan.pairing == Pairing::VsBaseline) {
        if (!plan.baseline_model) throw InputError("vs-baseline pairing needs a baseline model");
        if (std::find(plan.models.begin(), plan.models.end(), *plan.baseline_model) ==
            plan.models.end())
            throw InputError("baseline model " + *plan.baseline_model + " is not in the plan");
    }
    if (plan.judge.mode == JudgeMode::PairwiseCot)
        for (const auto& q : plan.questions)
            if (q.category != Category::Math && q.category != Category::Reasoning)
                throw InputError("pairwise_cot plan includes non-math/reasoning question " +
                                 std::to_string(q.question_id));
    std::vector<std::string> missing;
    for (const auto& q : plan.questions)
        for (const auto& m : plan.models)
            if (!answers.find(q.question_id, m))
                missing.push_back("q" + std::to_string(q.question_id) + "/" + m);
    if (!missing.empty()) {
        std::string detail = missing[0];
        for (size_t i = 1; i < missing.size() && i < 5; ++i) detail += ", " + missing[i];
        throw InputError("missing answers for " + std::to_string(missing.size()) +
                         " cell(s): " + detail);
    }

    // ---- task list (deterministic order)
    struct Task {
        const Question* question;
        int turn;
        std::string model_a, model_b; // model_b empty for single grading
    };
    std::vector<Task> tasks;
    auto turns_of = [&](const Question& q) {
        std::vector<int> turns;
        if (plan.turns != TurnSelection::Turn2) turns.push_back(1);
        if (plan.turns != TurnSelection::Turn1 && q.turns.size() >= 2) turns.push_back(2);
        return turns;
    };
    for (const auto& q : plan.questions) {
        for (int turn : turns_of(q)) {
            if (single) {
                for (const auto& m : plan.models) tasks.push_back({&q, turn, m, ""});
            } else if (plan.pairing == Pairing::AllPairs) {
                for (size_t i = 0; i < plan.models.size(); ++i)
                    for (size_t j = i + 1; j < plan.models.size(); ++j)
                        tasks.push_back({&q, turn, plan.models[i], plan.models[j]});
            } else {
                for (const auto& m : plan.models)
                    if (m != *plan.baseline_model)
                        tasks.push_back({&q, turn, m, *plan.baseline_model});
            }
        }
    }

    RunOutput out;
    out.manifest.plan_digest = plan_digest(plan, answers);
    out.manifest.run_id = out.manifest.plan_digest.substr(0, 12);

    const long long live_before = live_calls_.load();
    const long long cached_before = cached_calls_.load();
    const auto started = std::chrono::steady_clock::now();

    std::vector<MatchResult> matches(single ? 0 : tasks.size());
    std::vector<SingleGrade> grades(single ? tasks.size() : 0);
    std::vector<std::string> cell_errors(tasks.size());

    parallel_for(tasks.size(), options_.parallelism, [&](size_t i) {
        const Task& task = tasks[i];
        try {
            if (single) {
                grades[i] = run_single_grading(*task.question, task.turn, task.model_a, plan.judge,
                                               answers);
            } else {
                matches[i] = run_pairwise_match(*task.question, task.turn, task.model_a,
                                                task.model_b, plan.judge, answers);
            }
        } catch (const Error& e) {
            std::string label = "q" + std::to_string(task.question->question_id) + " t" +
                                std::to_string(task.turn) + " " + task.model_a;
            if (!task.model_b.empty()) label += " vs " + task.model_b;
            cell_errors[i] = label + ": " + e.what();
            if (single) {
                grades[i].question_id = task.question->question_id;
                grades[i].turn_index = task.turn;
                grades[i].model_id = task.model_a;
                grades[i].judge = plan.judge;
            } else {
                matches[i].question_id = task.question->question_id;
                matches[i].turn_index = task.turn;
                matches[i].model_a = task.model_a;
                matches[i].model_b = task.model_b;
                matches[i].outcome = MatchOutcome::Error;
            }
        }
    });

    out.manifest.wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    out.manifest.backend_calls = live_calls_.load() - live_before;
    out.manifest.cache_hits = cached_calls_.load() - cached_before;

    for (const auto& e : cell_errors)
        if (!e.empty()) out.manifest.errors.push_back(e);
    if (single) {
        out.grades = std::move(grades);
        out.manifest.grades_total = (long long)out.grades.size();
        out.manifest.games_total = (long long)out.grades.size();
        for (const auto& g : out.grades)
            if (!g.score) ++out.manifest.format_error_games;
    } else {
        out.matches = std::move(matches);
        out.manifest.matches_total = (long long)out.matches.size();
        for (const auto& m : out.matches) {
            ++out.manifest.outcome_counts[std::string(to_string(m.outcome))];
            for (const GameRecord* g : {&m.game1, &m.game2}) {
                if (g->order.empty()) continue;
                ++out.manifest.games_total;
                if (g->verdict == PairwiseVerdict::FormatError) ++out.manifest.format_error_games;
            }
        }
    }
    return out;
}

} // namespace judgekit
