#include <doctest.h>

#include <filesystem>
#include <map>
#include <random>

#include "judgekit/errors.hpp"
#include "judgekit/probes.hpp"

using namespace judgekit;

namespace {

Question question_with_turns(int64_t id, Category cat = Category::Writing) {
    Question q;
    q.question_id = id;
    q.category = cat;
    q.turns = {"Question " + std::to_string(id) + " turn one",
               "Question " + std::to_string(id) + " turn two"};
    return q;
}

ModelAnswer answer_of(int64_t qid, const std::string& model, const std::string& text) {
    ModelAnswer a;
    a.question_id = qid;
    a.model_id = model;
    a.turns = {text};
    return a;
}

MatchResult two_game_match(int64_t qid, const std::string& a, const std::string& b,
                           PairwiseVerdict g1, PairwiseVerdict g2, MatchOutcome outcome) {
    MatchResult m;
    m.question_id = qid;
    m.turn_index = 1;
    m.model_a = a;
    m.model_b = b;
    m.game1.order = {a, b};
    m.game1.verdict = g1;
    m.game2.order = {b, a};
    m.game2.verdict = g2;
    m.outcome = outcome;
    return m;
}

std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("judgekit_probe_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("probe provenance labels round-trip") {
    for (ProbeProvenance p : {ProbeProvenance::SameModelResample,
                              ProbeProvenance::OriginalVsAttacked, ProbeProvenance::Identical})
        CHECK(probe_provenance_from_string(to_string(p)) == p);
    CHECK_FALSE(probe_provenance_from_string("mystery"));
}

TEST_CASE("probe pair json codec enforces the identical invariant") {
    ProbePair p;
    p.question_id = 42;
    p.answer_x = "alpha";
    p.answer_y = "beta";
    p.provenance = ProbeProvenance::OriginalVsAttacked;
    nlohmann::json j = p;
    CHECK(j.at("provenance") == "original_vs_attacked");
    CHECK(j.get<ProbePair>() == p);

    nlohmann::json bad = {{"question_id", 1},
                          {"answer_x", "a"},
                          {"answer_y", "b"},
                          {"provenance", "identical"}};
    CHECK_THROWS_AS(bad.get<ProbePair>(), ParseError);
    bad["answer_y"] = "a";
    CHECK(bad.get<ProbePair>().provenance == ProbeProvenance::Identical);
    bad["provenance"] = "nonsense";
    CHECK_THROWS_AS(bad.get<ProbePair>(), ParseError);
}

TEST_CASE("probe pair files round-trip and report the failing line") {
    const auto dir = fresh_dir("files");
    const auto path = dir / "probes.jsonl";
    std::vector<ProbePair> pairs(2);
    pairs[0].question_id = 1;
    pairs[0].answer_x = "x1";
    pairs[0].answer_y = "y1";
    pairs[1].question_id = 2;
    pairs[1].answer_x = "same";
    pairs[1].answer_y = "same";
    pairs[1].provenance = ProbeProvenance::Identical;
    write_probe_pairs(path, pairs);
    CHECK(read_probe_pairs(path) == pairs);

    const auto bad = dir / "bad.jsonl";
    write_file_if_changed(bad,
                          R"({"question_id":1,"answer_x":"x","answer_y":"y",)"
                          R"("provenance":"same_model_resample"})"
                          "\n"
                          R"({"question_id":2,"answer_x":"x","answer_y":"y",)"
                          R"("provenance":"wat"})"
                          "\n");
    CHECK_THROWS_WITH_AS(read_probe_pairs(bad), doctest::Contains(":2:"), ParseError);
}

TEST_CASE("probe classification: all 16 verdict combinations") {
    using V = PairwiseVerdict;
    using C = ProbeClass;
    const std::map<std::pair<V, V>, C> expected = {
        {{V::FirstWins, V::FirstWins}, C::BiasedFirst},
        {{V::FirstWins, V::SecondWins}, C::Consistent},
        {{V::FirstWins, V::Tie}, C::BiasedFirst},
        {{V::FirstWins, V::FormatError}, C::Error},
        {{V::SecondWins, V::FirstWins}, C::Consistent},
        {{V::SecondWins, V::SecondWins}, C::BiasedSecond},
        {{V::SecondWins, V::Tie}, C::BiasedSecond},
        {{V::SecondWins, V::FormatError}, C::Error},
        {{V::Tie, V::FirstWins}, C::BiasedFirst},
        {{V::Tie, V::SecondWins}, C::BiasedSecond},
        {{V::Tie, V::Tie}, C::Consistent},
        {{V::Tie, V::FormatError}, C::Error},
        {{V::FormatError, V::FirstWins}, C::Error},
        {{V::FormatError, V::SecondWins}, C::Error},
        {{V::FormatError, V::Tie}, C::Error},
        {{V::FormatError, V::FormatError}, C::Error},
    };
    REQUIRE(expected.size() == 16);
    for (const auto& [combo, cls] : expected)
        CHECK_MESSAGE(classify_probe(combo.first, combo.second) == cls, "g1=",
                      to_string(combo.first), " g2=", to_string(combo.second));
}

TEST_CASE("position-bias report tallies classes into percentages") {
    using V = PairwiseVerdict;
    std::vector<std::pair<V, V>> verdicts = {
        {V::FirstWins, V::SecondWins}, {V::SecondWins, V::FirstWins},
        {V::Tie, V::Tie},              {V::Tie, V::Tie},
        {V::FirstWins, V::FirstWins},  {V::FirstWins, V::Tie},
        {V::Tie, V::SecondWins},       {V::FormatError, V::Tie},
    };
    PositionBiasReport report = position_bias_report(verdicts);
    CHECK(report.n_probes == 8);
    CHECK(report.n_consistent == 4);
    CHECK(report.n_biased_first == 2);
    CHECK(report.n_biased_second == 1);
    CHECK(report.n_error == 1);
    CHECK(report.consistency_pct == doctest::Approx(50.0));
    CHECK(report.biased_first_pct == doctest::Approx(25.0));
    CHECK(report.biased_second_pct == doctest::Approx(12.5));
    CHECK(report.error_pct == doctest::Approx(12.5));
    // the four buckets always partition the probes
    CHECK(report.consistency_pct + report.biased_first_pct + report.biased_second_pct +
              report.error_pct ==
          doctest::Approx(100.0));

    CHECK_THROWS_AS(position_bias_report(std::vector<std::pair<V, V>>{}), InputError);

    // the match overload refuses single-game (randomized) matches
    MatchResult single = two_game_match(1, "x", "y", V::Tie, V::Tie, MatchOutcome::TieBoth);
    single.game2.order.clear();
    CHECK_THROWS_AS(position_bias_report(std::vector<MatchResult>{single}), InputError);
}

TEST_CASE("grouped position-bias reports split by pair, category and variant") {
    using V = PairwiseVerdict;
    std::vector<MatchResult> ms = {
        two_game_match(1, "m1", "m2", V::FirstWins, V::FirstWins, MatchOutcome::TieInconsistent),
        two_game_match(2, "m1", "m2", V::FirstWins, V::SecondWins, MatchOutcome::WinA),
        two_game_match(3, "m1", "m3", V::Tie, V::Tie, MatchOutcome::TieBoth),
    };
    ms[2].game1.judge.prompt_variant = PromptVariant::Rename;

    auto by_pair = group_position_bias(ms, ProbeGroupKey::ModelPair);
    REQUIRE(by_pair.size() == 2);
    CHECK(by_pair.at("m1 vs m2").n_probes == 2);
    CHECK(by_pair.at("m1 vs m2").n_biased_first == 1);
    CHECK(by_pair.at("m1 vs m3").consistency_pct == doctest::Approx(100.0));

    std::map<int64_t, Category> cats = {
        {1, Category::Writing}, {2, Category::Math}, {3, Category::Math}};
    auto by_cat = group_position_bias(ms, ProbeGroupKey::Category, cats);
    CHECK(by_cat.at("writing").n_probes == 1);
    CHECK(by_cat.at("math").n_probes == 2);
    cats.erase(3);
    CHECK_THROWS_AS(group_position_bias(ms, ProbeGroupKey::Category, cats), InputError);

    auto by_variant = group_position_bias(ms, ProbeGroupKey::PromptVariant);
    CHECK(by_variant.at("default").n_probes == 2);
    CHECK(by_variant.at("rename").n_probes == 1);

    CHECK(probe_group_key_from_string("model-pair") == ProbeGroupKey::ModelPair);
    CHECK(probe_group_key_from_string("prompt_variant") == ProbeGroupKey::PromptVariant);
    CHECK_FALSE(probe_group_key_from_string("color"));
}

TEST_CASE("numbered list extraction finds the first real run") {
    const std::string answer = "Here are some tips:\n"
                               "1. pack light\n"
                               "2. drink water\n"
                               "3. sleep early\n"
                               "Hope this helps!";
    auto list = extract_numbered_list(answer);
    REQUIRE(list);
    CHECK(list->preamble == "Here are some tips:");
    CHECK(list->items == std::vector<std::string>{"pack light", "drink water", "sleep early"});
    CHECK(list->postamble == "Hope this helps!");
    CHECK(list->marker_style == '.');
    CHECK(rebuild_numbered_list(*list) == answer);

    // parenthesis markers work the same way
    auto paren = extract_numbered_list("1) alpha\n2) beta");
    REQUIRE(paren);
    CHECK(paren->marker_style == ')');
    CHECK(paren->preamble.empty());
    CHECK(paren->postamble.empty());

    // a false start doesn't hide a later run
    auto later = extract_numbered_list("1. lone line\nprose\n1. x\n2. y");
    REQUIRE(later);
    CHECK(later->preamble == "1. lone line\nprose");
    CHECK(later->items == std::vector<std::string>{"x", "y"});
}

TEST_CASE("numbered list extraction rejects non-list shapes") {
    CHECK_FALSE(extract_numbered_list("no list at all"));
    CHECK_FALSE(extract_numbered_list(""));
    // decimals are not markers
    CHECK_FALSE(extract_numbered_list("1.5 miles\n2.5 miles"));
    // runs must have at least two items
    CHECK_FALSE(extract_numbered_list("1. only item\nthen prose"));
    // numbering must start at one and be contiguous in a single style
    CHECK_FALSE(extract_numbered_list("2. b\n3. c"));
    CHECK_FALSE(extract_numbered_list("1. a\n3. c"));
    CHECK_FALSE(extract_numbered_list("1. a\n2) b"));
    // shapes the renumbering rebuild cannot reproduce are refused
    CHECK_FALSE(extract_numbered_list("1. a\n2. b\n"));  // trailing newline
    CHECK_FALSE(extract_numbered_list("\n1. a\n2. b")); // leading blank line
    // marker must be followed by a space
    CHECK_FALSE(extract_numbered_list("1.a\n2.b"));
}

TEST_CASE("numbered list extraction is lossless on generated lists") {
    std::mt19937_64 rng(314159);
    const auto word = [&](int len) {
        std::string w;
        for (int i = 0; i < len; ++i) w += char('a' + rng() % 26);
        return w;
    };
    for (int round = 0; round < 500; ++round) {
        NumberedList list;
        list.marker_style = (rng() % 2) ? '.' : ')';
        const int pre_lines = int(rng() % 3);
        for (int i = 0; i < pre_lines; ++i) {
            if (!list.preamble.empty()) list.preamble += '\n';
            list.preamble += word(1 + int(rng() % 8));
        }
        const int post_lines = int(rng() % 3);
        for (int i = 0; i < post_lines; ++i) {
            if (!list.postamble.empty()) list.postamble += '\n';
            list.postamble += word(1 + int(rng() % 8));
        }
        const int k = 2 + int(rng() % 5);
        for (int i = 0; i < k; ++i) list.items.push_back(word(int(rng() % 10)));
        const std::string text = rebuild_numbered_list(list);
        auto back = extract_numbered_list(text);
        REQUIRE(back);
        CHECK(*back == list);
        CHECK(rebuild_numbered_list(*back) == text);
    }
}

TEST_CASE("repetitive-list attack doubles the list and keeps originals verbatim") {
    const std::string answer = "Top reasons:\n"
                               "1. it is fast\n"
                               "2. it is cheap\n"
                               "3. it is safe\n"
                               "That is all.";
    const std::vector<std::string> rephrased = {"speed is high", "cost is low",
                                                "safety is good"};
    const std::string attacked = build_repetitive_list_attack(answer, rephrased);
    auto list = extract_numbered_list(attacked);
    REQUIRE(list);
    REQUIRE(list->items.size() == 6);
    CHECK(list->preamble == "Top reasons:");
    CHECK(list->postamble == "That is all.");
    for (int i = 0; i < 3; ++i) CHECK(list->items[i] == rephrased[i]);
    CHECK(list->items[3] == "it is fast");
    CHECK(list->items[4] == "it is cheap");
    CHECK(list->items[5] == "it is safe");
    CHECK(attacked.find("4. it is fast") != std::string::npos);
    CHECK(attacked.find("6. it is safe") != std::string::npos);

    CHECK_THROWS_WITH_AS(build_repetitive_list_attack(answer, {"one", "two"}),
                         doctest::Contains("2 rephrasings for a 3-item list"), InputError);
    CHECK_THROWS_AS(build_repetitive_list_attack("just prose", rephrased), InputError);
}

TEST_CASE("repetitive-list attack invariants hold for every list size") {
    std::mt19937_64 rng(271828);
    const auto word = [&](int len) {
        std::string w;
        for (int i = 0; i < len; ++i) w += char('a' + rng() % 26);
        return w;
    };
    for (int k = 2; k <= 10; ++k) {
        NumberedList original;
        original.preamble = "Checklist " + word(4) + ":";
        original.postamble = "Done " + word(4) + ".";
        for (int i = 0; i < k; ++i) original.items.push_back(word(3 + int(rng() % 8)));
        std::vector<std::string> rephrased;
        for (int i = 0; i < k; ++i) rephrased.push_back("put differently " + word(5));

        const std::string attacked =
            build_repetitive_list_attack(rebuild_numbered_list(original), rephrased);
        auto doubled = extract_numbered_list(attacked);
        REQUIRE(doubled);
        REQUIRE(doubled->items.size() == size_t(2 * k));
        for (int i = 0; i < k; ++i) {
            CHECK(doubled->items[i] == rephrased[i]);
            CHECK(doubled->items[k + i] == original.items[i]); // byte-identical originals
        }
        CHECK(doubled->preamble == original.preamble);
        CHECK(doubled->postamble == original.postamble);
        CHECK(doubled->marker_style == original.marker_style);
    }
}

TEST_CASE("verbosity failure rate counts wins for the attacked side") {
    using V = PairwiseVerdict;
    std::vector<MatchResult> ms = {
        // attacked model listed as model_a by default
        two_game_match(1, "attacked", "orig", V::FirstWins, V::SecondWins, MatchOutcome::WinA),
        two_game_match(2, "attacked", "orig", V::SecondWins, V::FirstWins, MatchOutcome::WinB),
        two_game_match(3, "attacked", "orig", V::Tie, V::Tie, MatchOutcome::TieBoth),
        two_game_match(4, "attacked", "orig", V::FirstWins, V::FirstWins,
                       MatchOutcome::TieInconsistent),
    };
    VerbosityReport report = verbosity_failure_rate(ms);
    CHECK(report.failures == 1);
    CHECK(report.n == 4);
    CHECK(report.rate == doctest::Approx(0.25));

    // naming the attacked model explicitly works from either seat
    std::vector<MatchResult> flipped = {
        two_game_match(1, "orig", "attacked", V::SecondWins, V::FirstWins, MatchOutcome::WinB)};
    CHECK(verbosity_failure_rate(flipped, "attacked").failures == 1);
    CHECK(verbosity_failure_rate(flipped, "orig").failures == 0);
    CHECK_THROWS_AS(verbosity_failure_rate(flipped, "stranger"), InputError);
    CHECK_THROWS_AS(verbosity_failure_rate({}), InputError);
}

TEST_CASE("identical-answer calibration passes fair judges and fails biased ones") {
    std::vector<Question> questions = {question_with_turns(1), question_with_turns(2)};
    std::vector<ModelAnswer> answers = {answer_of(1, "m1", "the answer to one"),
                                        answer_of(2, "m1", "the answer to two")};
    JudgeSpec judge;
    judge.judge_model = "judge-1";

    ScriptedBackend fair({}, "", ScriptedPolicy::Tie);
    MatchRunner fair_runner(TemplateStore::builtin(), fair);
    auto results = identical_answer_calibration(fair_runner, questions, answers, judge);
    REQUIRE(results.size() == 2);
    for (const auto& r : results) {
        CHECK(r.outcome == MatchOutcome::TieBoth);
        CHECK(r.pass);
        CHECK(r.model_id == "m1");
    }

    // a longer-is-better judge cannot be caught this way: copies tie
    ScriptedBackend by_length({}, "", ScriptedPolicy::PreferLonger);
    MatchRunner length_runner(TemplateStore::builtin(), by_length);
    for (const auto& r : identical_answer_calibration(length_runner, questions, answers, judge))
        CHECK(r.pass);

    // an always-first judge fails every probe as inconsistent
    ScriptedBackend biased({}, "", ScriptedPolicy::FirstWins);
    MatchRunner biased_runner(TemplateStore::builtin(), biased);
    for (const auto& r : identical_answer_calibration(biased_runner, questions, answers, judge)) {
        CHECK(r.outcome == MatchOutcome::TieInconsistent);
        CHECK_FALSE(r.pass);
    }

    std::vector<ModelAnswer> orphan = {answer_of(9, "m1", "no such question")};
    CHECK_THROWS_AS(identical_answer_calibration(fair_runner, questions, orphan, judge),
                    InputError);
}

TEST_CASE("probe sets sample twice per question and judge both orders") {
    std::vector<Question> questions = {question_with_turns(1), question_with_turns(2)};
    ScriptedBackend echo({}, "", ScriptedPolicy::EchoQuestion);
    CHECK_THROWS_AS(build_position_probe_set(questions, "sampler", echo, 0.0), InputError);

    auto probes = build_position_probe_set(questions, "sampler", echo, 0.7);
    REQUIRE(probes.size() == 2);
    CHECK(probes[0].question_id == 1);
    CHECK(probes[0].provenance == ProbeProvenance::SameModelResample);
    CHECK(probes[0].answer_x.find("Question 1 turn one") != std::string::npos);

    ScriptedBackend first({}, "", ScriptedPolicy::FirstWins);
    MatchRunner runner(TemplateStore::builtin(), first);
    JudgeSpec judge;
    judge.judge_model = "judge-1";
    RunOutput out = judge_probe_set(runner, questions, probes, judge);
    REQUIRE(out.matches.size() == 2); // one first-turn match per probe
    for (const auto& m : out.matches) {
        CHECK(m.model_a == "sample_x");
        CHECK(m.model_b == "sample_y");
        CHECK(m.turn_index == 1);
        CHECK_FALSE(m.game2.order.empty());
    }
    PositionBiasReport report = position_bias_report(out.matches);
    CHECK(report.biased_first_pct == doctest::Approx(100.0));
    CHECK(report.consistency_pct == doctest::Approx(0.0));

    std::vector<ProbePair> orphan(1);
    orphan[0].question_id = 99;
    CHECK_THROWS_AS(judge_probe_set(runner, questions, orphan, judge), InputError);
}

TEST_CASE("probe pairs can be joined from two answer files") {
    const auto dir = fresh_dir("join");
    std::vector<ModelAnswer> xs = {answer_of(1, "m", "x one"), answer_of(2, "m", "x two"),
                                   answer_of(3, "m", "x three")};
    std::vector<ModelAnswer> ys = {answer_of(1, "m", "y one"), answer_of(3, "m", "y three"),
                                   answer_of(4, "m", "y four")};
    write_answers(dir / "x.jsonl", xs);
    write_answers(dir / "y.jsonl", ys);
    auto probes = probe_pairs_from_answer_files(dir / "x.jsonl", dir / "y.jsonl");
    REQUIRE(probes.size() == 2); // ids 1 and 3 exist on both sides
    CHECK(probes[0].question_id == 1);
    CHECK(probes[0].answer_x == "x one");
    CHECK(probes[0].answer_y == "y one");
    CHECK(probes[1].question_id == 3);
}

TEST_CASE("math failure counting scores each game against the annotations") {
    using V = PairwiseVerdict;
    std::vector<Annotation> notes = {{1, "right", true},  {1, "wrong", false},
                                     {2, "right", true},  {2, "wrong", false},
                                     {3, "right", true},  {3, "wrong", false}};
    std::vector<MatchResult> ms = {
        // endorses the incorrect model in game1 only
        two_game_match(1, "right", "wrong", V::SecondWins, V::Tie, MatchOutcome::TieInconsistent),
        // endorses the correct model twice: no failures
        two_game_match(2, "right", "wrong", V::FirstWins, V::SecondWins, MatchOutcome::WinA),
        // format errors are not failures but still count as games
        two_game_match(3, "right", "wrong", V::FormatError, V::FormatError, MatchOutcome::Error),
    };
    MathFailureRow row = math_failure_count(ms, notes);
    CHECK(row.failures == 1);
    CHECK(row.games == 6);

    // single-game matches contribute one game
    std::vector<MatchResult> single = {
        two_game_match(1, "right", "wrong", V::SecondWins, V::Tie, MatchOutcome::WinB)};
    single[0].game2.order.clear();
    MathFailureRow one = math_failure_count(single, notes);
    CHECK(one.failures == 1);
    CHECK(one.games == 1);

    CHECK_THROWS_WITH_AS(math_failure_count(ms, {{1, "right", true}}),
                         doctest::Contains("no correctness annotation"), InputError);
}

TEST_CASE("math failure harness runs the pair under each judge mode") {
    std::vector<Question> questions;
    AnswerSet answers;
    std::vector<Annotation> notes;
    for (int q = 1; q <= 3; ++q) {
        questions.push_back(question_with_turns(q, Category::Math));
        ModelAnswer right = answer_of(q, "right", "42");
        ModelAnswer wrong = answer_of(q, "wrong", "a very long and confidently wrong derivation");
        right.turns.push_back("second turn");
        wrong.turns.push_back("second turn");
        answers.add(right);
        answers.add(wrong);
        notes.push_back({q, "right", true});
        notes.push_back({q, "wrong", false});
    }

    // longer answers win: the judge endorses the wrong model in every game
    ScriptedBackend by_length({}, "", ScriptedPolicy::PreferLonger);
    MatchRunner runner(TemplateStore::builtin(), by_length);
    std::vector<MatchResult> all;
    auto table = math_failure_harness(runner, questions, answers, "right", "wrong", "judge-1",
                                      {JudgeMode::Pairwise, JudgeMode::PairwiseCot}, notes, &all);
    REQUIRE(table.size() == 2);
    CHECK(table.at(JudgeMode::Pairwise).failures == 6);
    CHECK(table.at(JudgeMode::Pairwise).games == 6);
    CHECK(table.at(JudgeMode::PairwiseCot).failures == 6);
    CHECK(all.size() == 6);

    CHECK_THROWS_AS(math_failure_harness(runner, questions, answers, "right", "wrong", "judge-1",
                                         {JudgeMode::Single}, notes),
                    InputError);
    CHECK_THROWS_AS(math_failure_harness(runner, questions, answers, "right", "wrong", "judge-1",
                                         {JudgeMode::Pairwise}, {}),
                    InputError);
}
