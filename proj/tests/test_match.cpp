#include <doctest.h>

#include <map>

#include "judgekit/errors.hpp"
#include "judgekit/match.hpp"

using namespace judgekit;

namespace {

Question two_turn_question(int64_t id, Category cat = Category::Writing) {
    Question q;
    q.question_id = id;
    q.category = cat;
    q.turns = {"Question " + std::to_string(id) + " turn one",
               "Question " + std::to_string(id) + " turn two"};
    return q;
}

ModelAnswer answer_for(int64_t qid, const std::string& model, const std::string& tag) {
    ModelAnswer a;
    a.question_id = qid;
    a.model_id = model;
    a.turns = {tag + " turn1 by " + model, tag + " turn2 by " + model};
    return a;
}

AnswerSet answers_for(const std::vector<Question>& questions,
                      const std::vector<std::string>& models) {
    AnswerSet set;
    for (const auto& q : questions)
        for (const auto& m : models) set.add(answer_for(q.question_id, m, "ans"));
    return set;
}

} // namespace

TEST_CASE("pairwise verdict parsing takes the last verdict token") {
    CHECK(parse_pairwise_verdict("after deliberation: [[A]]") == PairwiseVerdict::FirstWins);
    CHECK(parse_pairwise_verdict("[[B]]") == PairwiseVerdict::SecondWins);
    CHECK(parse_pairwise_verdict("it's a tie [[C]]") == PairwiseVerdict::Tie);
    // self-corrections: the last occurrence decides
    CHECK(parse_pairwise_verdict("[[A]] ... wait, actually [[B]]") ==
          PairwiseVerdict::SecondWins);
    CHECK(parse_pairwise_verdict("[[C]] no, [[C]], hmm, final: [[A]]") ==
          PairwiseVerdict::FirstWins);
    CHECK(parse_pairwise_verdict("no verdict token at all") == PairwiseVerdict::FormatError);
    CHECK(parse_pairwise_verdict("") == PairwiseVerdict::FormatError);
    CHECK(parse_pairwise_verdict("[A] [B] [C]") == PairwiseVerdict::FormatError);
}

TEST_CASE("single score parsing is strict about the rating syntax") {
    CHECK(parse_single_score("Rating: [[7]]") == 7);
    CHECK(parse_single_score("Rating: [[10]]") == 10);
    CHECK(parse_single_score("good answer. Rating: [[1]]") == 1);
    // last syntactic occurrence wins
    CHECK(parse_single_score("Rating: [[3]] revised Rating: [[9]]") == 9);
    // out-of-range or malformed -> format error
    CHECK_FALSE(parse_single_score("Rating: [[0]]"));
    CHECK_FALSE(parse_single_score("Rating: [[11]]"));
    CHECK_FALSE(parse_single_score("Rating: [[]]"));
    CHECK_FALSE(parse_single_score("Rating: [[7]"));
    CHECK_FALSE(parse_single_score("Rating: 7"));
    CHECK_FALSE(parse_single_score("I give it a 7"));
    CHECK_FALSE(parse_single_score(""));
    // a malformed trailing rating does not erase an earlier valid one
    CHECK(parse_single_score("Rating: [[8]] then Rating: [[999]]") == 8);
}

TEST_CASE("swap aggregation truth table: all 16 verdict combinations") {
    using V = PairwiseVerdict;
    using O = MatchOutcome;
    const std::map<std::pair<V, V>, O> expected = {
        {{V::FirstWins, V::FirstWins}, O::TieInconsistent},
        {{V::FirstWins, V::SecondWins}, O::WinA},
        {{V::FirstWins, V::Tie}, O::TieInconsistent},
        {{V::FirstWins, V::FormatError}, O::Error},
        {{V::SecondWins, V::FirstWins}, O::WinB},
        {{V::SecondWins, V::SecondWins}, O::TieInconsistent},
        {{V::SecondWins, V::Tie}, O::TieInconsistent},
        {{V::SecondWins, V::FormatError}, O::Error},
        {{V::Tie, V::FirstWins}, O::TieInconsistent},
        {{V::Tie, V::SecondWins}, O::TieInconsistent},
        {{V::Tie, V::Tie}, O::TieBoth},
        {{V::Tie, V::FormatError}, O::Error},
        {{V::FormatError, V::FirstWins}, O::Error},
        {{V::FormatError, V::SecondWins}, O::Error},
        {{V::FormatError, V::Tie}, O::Error},
        {{V::FormatError, V::FormatError}, O::Error},
    };
    REQUIRE(expected.size() == 16);
    for (const auto& [combo, outcome] : expected)
        CHECK_MESSAGE(aggregate_swapped(combo.first, combo.second) == outcome, "g1=",
                      to_string(combo.first), " g2=", to_string(combo.second));
}

TEST_CASE("swap aggregation is symmetric under model relabeling") {
    // Relabeling A<->B turns (g1, g2) into (g2, g1) and mirrors the outcome.
    auto mirror = [](MatchOutcome o) {
        if (o == MatchOutcome::WinA) return MatchOutcome::WinB;
        if (o == MatchOutcome::WinB) return MatchOutcome::WinA;
        return o;
    };
    const PairwiseVerdict all[] = {PairwiseVerdict::FirstWins, PairwiseVerdict::SecondWins,
                                   PairwiseVerdict::Tie, PairwiseVerdict::FormatError};
    for (PairwiseVerdict g1 : all)
        for (PairwiseVerdict g2 : all)
            CHECK(aggregate_swapped(g2, g1) == mirror(aggregate_swapped(g1, g2)));
}

TEST_CASE("answer set rejects duplicates and lists models sorted") {
    AnswerSet set;
    set.add(answer_for(1, "zeta", "x"));
    set.add(answer_for(1, "alpha", "x"));
    set.add(answer_for(2, "alpha", "x"));
    CHECK_THROWS_AS(set.add(answer_for(1, "alpha", "again")), InputError);
    CHECK(set.models() == std::vector<std::string>{"alpha", "zeta"});
    CHECK(set.size() == 3);
    CHECK(set.at(1, "alpha").model_id == "alpha");
    CHECK(set.find(3, "alpha") == nullptr);
    CHECK_THROWS_AS(set.at(3, "alpha"), InputError);
}

TEST_CASE("plan digest tracks every judging-relevant input") {
    std::vector<Question> questions = {two_turn_question(1), two_turn_question(2)};
    AnswerSet answers = answers_for(questions, {"m1", "m2"});
    MatchPlan plan;
    plan.models = {"m1", "m2"};
    plan.questions = questions;
    plan.judge.judge_model = "judge-1";

    const std::string base = plan_digest(plan, answers);
    CHECK(base == plan_digest(plan, answers)); // deterministic

    MatchPlan other = plan;
    other.judge.prompt_variant = PromptVariant::Rename;
    CHECK(plan_digest(other, answers) != base);

    other = plan;
    other.turns = TurnSelection::Turn1;
    CHECK(plan_digest(other, answers) != base);

    AnswerSet edited;
    for (const auto& q : questions)
        for (const std::string& m : {std::string("m1"), std::string("m2")})
            edited.add(answer_for(q.question_id, m, m == "m1" ? "edited" : "ans"));
    CHECK(plan_digest(plan, edited) != base);
}

TEST_CASE("pairwise match runs both orders and aggregates conservatively") {
    std::vector<Question> questions = {two_turn_question(1)};
    AnswerSet answers = answers_for(questions, {"m1", "m2"});

    // A judge that always prefers the first position is exposed as inconsistent.
    ScriptedBackend biased({}, "", ScriptedPolicy::FirstWins);
    MatchRunner runner(TemplateStore::builtin(), biased);
    JudgeSpec judge;
    judge.judge_model = "judge-1";

    MatchResult m = runner.run_pairwise_match(questions[0], 1, "m1", "m2", judge, answers);
    CHECK(m.game1.order == std::vector<std::string>{"m1", "m2"});
    CHECK(m.game2.order == std::vector<std::string>{"m2", "m1"});
    CHECK(m.game1.verdict == PairwiseVerdict::FirstWins);
    CHECK(m.game2.verdict == PairwiseVerdict::FirstWins);
    CHECK(m.outcome == MatchOutcome::TieInconsistent);
    CHECK_FALSE(m.game1.cache_key.empty());
    CHECK(m.game1.cache_key != m.game2.cache_key);

    // A length-preferring judge is consistent when answers differ in length.
    AnswerSet uneven;
    ModelAnswer longer = answer_for(1, "m1", "a much longer and more detailed");
    ModelAnswer shorter = answer_for(1, "m2", "short");
    uneven.add(longer);
    uneven.add(shorter);
    ScriptedBackend by_length({}, "", ScriptedPolicy::PreferLonger);
    MatchRunner consistent(TemplateStore::builtin(), by_length);
    MatchResult win = consistent.run_pairwise_match(questions[0], 1, "m1", "m2", judge, uneven);
    CHECK(win.outcome == MatchOutcome::WinA);
    MatchResult loss = consistent.run_pairwise_match(questions[0], 1, "m2", "m1", judge, uneven);
    CHECK(loss.outcome == MatchOutcome::WinB);
}

TEST_CASE("single grading parses the rating and flags format errors") {
    std::vector<Question> questions = {two_turn_question(1)};
    AnswerSet answers = answers_for(questions, {"m1"});
    JudgeSpec judge;
    judge.judge_model = "judge-1";
    judge.mode = JudgeMode::Single;

    ScriptedBackend grader({}, "", ScriptedPolicy::GradeLength);
    MatchRunner runner(TemplateStore::builtin(), grader);
    SingleGrade g = runner.run_single_grading(questions[0], 1, "m1", judge, answers);
    REQUIRE(g.score);
    CHECK(*g.score >= 1);
    CHECK(*g.score <= 10);

    ScriptedBackend mute({}, "no rating here");
    MatchRunner bad(TemplateStore::builtin(), mute);
    SingleGrade none = bad.run_single_grading(questions[0], 1, "m1", judge, answers);
    CHECK_FALSE(none.score);

    // mode mismatches are refused
    JudgeSpec pairwise_judge;
    pairwise_judge.mode = JudgeMode::Pairwise;
    CHECK_THROWS_AS(bad.run_single_grading(questions[0], 1, "m1", pairwise_judge, answers),
                    InputError);
    CHECK_THROWS_AS(bad.run_pairwise_match(questions[0], 1, "m1", "m1", judge, answers),
                    InputError);
}

TEST_CASE("run_plan schedules all pairs over all turns") {
    std::vector<Question> questions = {two_turn_question(1), two_turn_question(2)};
    AnswerSet answers = answers_for(questions, {"m1", "m2", "m3"});
    ScriptedBackend tie({}, "", ScriptedPolicy::Tie);
    MatchRunner runner(TemplateStore::builtin(), tie, {.parallelism = 3});

    MatchPlan plan;
    plan.models = {"m1", "m2", "m3"};
    plan.questions = questions;
    plan.judge.judge_model = "judge-1";

    RunOutput out = runner.run_plan(plan, answers);
    // C(3,2)=3 pairs x 2 questions x 2 turns
    CHECK(out.matches.size() == 12);
    CHECK(out.manifest.matches_total == 12);
    CHECK(out.manifest.games_total == 24);
    CHECK(out.manifest.outcome_counts.at("tie_both") == 12);
    CHECK(out.manifest.format_error_games == 0);
    CHECK(out.manifest.backend_calls == 24);
    CHECK_FALSE(out.manifest.has_errors());
    CHECK(out.manifest.run_id == out.manifest.plan_digest.substr(0, 12));

    // deterministic task order: first match is q1 t1 m1-vs-m2
    CHECK(out.matches[0].question_id == 1);
    CHECK(out.matches[0].turn_index == 1);
    CHECK(out.matches[0].model_a == "m1");
    CHECK(out.matches[0].model_b == "m2");

    // turn selection narrows the schedule
    plan.turns = TurnSelection::Turn1;
    CHECK(runner.run_plan(plan, answers).matches.size() == 6);
    plan.turns = TurnSelection::Turn2;
    CHECK(runner.run_plan(plan, answers).matches.size() == 6);
}

TEST_CASE("run_plan vs-baseline pairs everyone against the baseline") {
    std::vector<Question> questions = {two_turn_question(1)};
    AnswerSet answers = answers_for(questions, {"m1", "m2", "base"});
    ScriptedBackend tie({}, "", ScriptedPolicy::Tie);
    MatchRunner runner(TemplateStore::builtin(), tie);

    MatchPlan plan;
    plan.pairing = Pairing::VsBaseline;
    plan.baseline_model = "base";
    plan.models = {"m1", "m2", "base"};
    plan.questions = questions;
    plan.judge.judge_model = "judge-1";

    RunOutput out = runner.run_plan(plan, answers);
    CHECK(out.matches.size() == 4); // 2 challengers x 2 turns
    for (const auto& m : out.matches) CHECK(m.model_b == "base");

    plan.baseline_model.reset();
    CHECK_THROWS_AS(runner.run_plan(plan, answers), InputError);
    plan.baseline_model = "stranger";
    CHECK_THROWS_AS(runner.run_plan(plan, answers), InputError);
}

TEST_CASE("run_plan validates inputs before any backend call") {
    std::vector<Question> questions = {two_turn_question(1)};
    AnswerSet answers = answers_for(questions, {"m1"});
    ScriptedBackend tie({}, "", ScriptedPolicy::Tie);
    MatchRunner runner(TemplateStore::builtin(), tie);

    MatchPlan plan;
    plan.models = {"m1", "missing-model"};
    plan.questions = questions;
    plan.judge.judge_model = "judge-1";
    CHECK_THROWS_WITH_AS(runner.run_plan(plan, answers),
                         doctest::Contains("missing answers"), InputError);

    plan.models = {};
    CHECK_THROWS_AS(runner.run_plan(plan, answers), InputError);

    // chain-of-thought plans are restricted to math/reasoning questions
    MatchPlan cot;
    cot.models = {"m1", "m2"};
    cot.questions = {two_turn_question(7, Category::Writing)};
    cot.judge.mode = JudgeMode::PairwiseCot;
    AnswerSet cot_answers = answers_for(cot.questions, {"m1", "m2"});
    CHECK_THROWS_AS(runner.run_plan(cot, cot_answers), InputError);
}

TEST_CASE("run_plan records per-cell failures instead of aborting") {
    std::vector<Question> questions = {two_turn_question(1)};
    AnswerSet answers = answers_for(questions, {"m1", "m2"});
    // A backend with only a turn-1 rule: turn-2 games throw inside the run.
    ScriptedRule turn1;
    turn1.turn = 1;
    turn1.response = "verdict [[C]]";
    ScriptedBackend partial({turn1});
    MatchRunner runner(TemplateStore::builtin(), partial);

    MatchPlan plan;
    plan.models = {"m1", "m2"};
    plan.questions = questions;
    plan.judge.judge_model = "judge-1";

    RunOutput out = runner.run_plan(plan, answers);
    CHECK(out.matches.size() == 2);
    CHECK(out.manifest.has_errors());
    REQUIRE(out.manifest.errors.size() == 1);
    CHECK(out.manifest.errors[0].find("q1 t2 m1 vs m2") != std::string::npos);
    CHECK(out.matches[1].outcome == MatchOutcome::Error);
    CHECK(out.manifest.outcome_counts.at("error") == 1);
}

TEST_CASE("randomized single-game mode takes the verdict at face value") {
    std::vector<Question> questions;
    for (int i = 1; i <= 40; ++i) questions.push_back(two_turn_question(i));
    AnswerSet answers = answers_for(questions, {"m1", "m2"});
    ScriptedBackend first({}, "", ScriptedPolicy::FirstWins);
    RunnerOptions options;
    options.randomize_positions = true;
    options.seed = 11;
    MatchRunner runner(TemplateStore::builtin(), first, options);
    JudgeSpec judge;
    judge.judge_model = "judge-1";

    int a_wins = 0, b_wins = 0;
    for (const auto& q : questions) {
        MatchResult m = runner.run_pairwise_match(q, 1, "m1", "m2", judge, answers);
        CHECK(m.game2.order.empty()); // single game only
        REQUIRE(m.game1.order.size() == 2);
        // face value: whoever was shown first wins under this judge
        if (m.outcome == MatchOutcome::WinA) {
            CHECK(m.game1.order[0] == "m1");
            ++a_wins;
        } else if (m.outcome == MatchOutcome::WinB) {
            CHECK(m.game1.order[0] == "m2");
            ++b_wins;
        }
        // absolutely deterministic for a fixed seed
        MatchResult again = runner.run_pairwise_match(q, 1, "m1", "m2", judge, answers);
        CHECK(again.game1.order == m.game1.order);
        CHECK(again.outcome == m.outcome);
    }
    CHECK(a_wins + b_wins == 40);
    // the seed-derived coin actually flips both ways over 40 questions
    CHECK(a_wins > 0);
    CHECK(b_wins > 0);
}

TEST_CASE("manifest json splits reproducible results from run stats") {
    RunManifest m;
    m.run_id = "abc";
    m.plan_digest = "abcdef";
    m.matches_total = 3;
    m.outcome_counts["win_a"] = 3;
    m.wall_ms = 12.5;
    m.backend_calls = 6;
    nlohmann::json j = manifest_json(m);
    CHECK(j["results"]["run_id"] == "abc");
    CHECK(j["results"]["matches_total"] == 3);
    CHECK(j["results"]["outcome_counts"]["win_a"] == 3);
    CHECK(j["stats"]["backend_calls"] == 6);
    CHECK_FALSE(j["results"].contains("wall_ms"));
    CHECK(j["stats"].contains("wall_ms"));
}
