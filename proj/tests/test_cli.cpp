#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "judgekit/io.hpp"
#include "judgekit/probes.hpp"

using namespace judgekit;

namespace {

struct CmdResult {
    int code = -1;
    std::string output; // stdout and stderr combined
};

std::string bin_path() {
    const char* bin = std::getenv("JUDGEKIT_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "JUDGEKIT_BIN must point at the judgekit binary");
    return bin;
}

std::string data_dir() {
    const char* dir = std::getenv("JUDGEKIT_DATA");
    REQUIRE_MESSAGE(dir != nullptr, "JUDGEKIT_DATA must point at the bundled data directory");
    return dir;
}

CmdResult run_cli(const std::string& args) {
    const std::string cmd = bin_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("judgekit_cli_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(in), "missing file: ", path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Answers for every bundled sample question, with a fixed per-model prefix so
// lexicographic judges order them predictably (alpha < beta everywhere).
void write_sample_answers(const std::filesystem::path& path, const std::string& model) {
    std::vector<ModelAnswer> answers;
    for (int q = 1; q <= 8; ++q) {
        ModelAnswer a;
        a.question_id = q;
        a.model_id = model;
        a.turns = {model + " reply to question " + std::to_string(q) + " turn 1",
                   model + " reply to question " + std::to_string(q) + " turn 2"};
        answers.push_back(std::move(a));
    }
    write_answers(path, answers);
}

std::string q(const std::filesystem::path& p) { return p.string(); }

} // namespace

TEST_CASE("help prints and bad invocations exit with the usage code") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("--help").output.find("judgekit") != std::string::npos);
    CHECK(run_cli("").code == 2);                  // a subcommand is required
    CHECK(run_cli("frobnicate").code == 2);        // unknown subcommand
    CHECK(run_cli("judge --no-such-flag").code == 2);
    CHECK(run_cli("judge").code == 2);             // missing required options
}

TEST_CASE("usage errors from option interplay exit 2 with a message") {
    const std::string data = data_dir();
    CmdResult one_type =
        run_cli("agreement --votes " + data + "/sample/votes_d3.jsonl --types human");
    CHECK(one_type.code == 2);
    CHECK(one_type.output.find("usage error") != std::string::npos);

    CHECK(run_cli("agreement --types a,b").code == 2); // no input at all
    CHECK(run_cli("winrate").code == 2);               // neither matches nor votes
    CHECK(run_cli("winrate --votes x.jsonl").code == 2); // --votes without --type

    const auto dir = fresh_dir("usage");
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    const std::string base = "judge --scripted " + data + "/scripted/tie_judge.jsonl" +
                             " --questions " + data + "/sample/questions.jsonl" + " --answers " +
                             q(dir / "alpha.jsonl") + " --out " + q(dir / "out.jsonl");
    CHECK(run_cli(base + " --pairing vs-baseline").code == 2); // baseline missing
    CHECK(run_cli(base + " --mode mystery").code == 2);
    CHECK(run_cli(base + " --turns turn9").code == 2);
}

TEST_CASE("data errors exit 1 with an error message") {
    CmdResult missing = run_cli("agreement --votes /nonexistent/votes.jsonl --types a,b");
    CHECK(missing.code == 1);
    CHECK(missing.output.find("error:") != std::string::npos);

    const auto dir = fresh_dir("dataerr");
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    CmdResult no_questions =
        run_cli("judge --scripted " + data_dir() + "/scripted/tie_judge.jsonl --questions " +
                q(dir / "nope.jsonl") + " --answers " + q(dir / "alpha.jsonl") + " --out " +
                q(dir / "out.jsonl"));
    CHECK(no_questions.code == 1);
}

TEST_CASE("judge pipeline writes matches, a manifest, and a summary line") {
    const auto dir = fresh_dir("judge");
    const std::string data = data_dir();
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    write_sample_answers(dir / "beta.jsonl", "beta");

    CmdResult r = run_cli("judge --scripted " + data + "/scripted/tie_judge.jsonl" +
                          " --questions " + data + "/sample/questions.jsonl" + " --answers " +
                          q(dir / "alpha.jsonl") + "," + q(dir / "beta.jsonl") + " --out " +
                          q(dir / "matches.jsonl"));
    CHECK(r.code == 0);
    CHECK(r.output.find("16 matches, 0 grades, 32 games") != std::string::npos);
    CHECK(r.output.find("outcomes: tie_both=16") != std::string::npos);

    const auto matches = read_matches(dir / "matches.jsonl");
    REQUIRE(matches.size() == 16);
    for (const auto& m : matches) CHECK(m.outcome == MatchOutcome::TieBoth);

    const auto manifest = nlohmann::json::parse(slurp(dir / "matches.jsonl.manifest.json"));
    CHECK(manifest.at("results").at("matches_total") == 16);
    CHECK(manifest.at("results").at("games_total") == 32);
    CHECK(manifest.at("stats").at("backend_calls") == 32);

    // narrowing to one turn halves the schedule
    CmdResult turn1 = run_cli("judge --scripted " + data + "/scripted/tie_judge.jsonl" +
                              " --questions " + data + "/sample/questions.jsonl" + " --answers " +
                              q(dir / "alpha.jsonl") + "," + q(dir / "beta.jsonl") +
                              " --turns turn1 --out " + q(dir / "t1.jsonl"));
    CHECK(turn1.output.find("8 matches, 0 grades, 16 games") != std::string::npos);
}

TEST_CASE("cached reruns hit the backend zero times and leave identical bytes") {
    const auto dir = fresh_dir("cache");
    const std::string data = data_dir();
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    write_sample_answers(dir / "beta.jsonl", "beta");
    const std::string cmd = "judge --scripted " + data + "/scripted/lex_judge.jsonl" +
                            " --questions " + data + "/sample/questions.jsonl" + " --answers " +
                            q(dir / "alpha.jsonl") + "," + q(dir / "beta.jsonl") + " --cache " +
                            q(dir / "cache.jsonl") + " --out " + q(dir / "matches.jsonl");

    CHECK(run_cli(cmd).code == 0);
    const std::string first_bytes = slurp(dir / "matches.jsonl");
    const auto first_manifest = nlohmann::json::parse(slurp(dir / "matches.jsonl.manifest.json"));
    CHECK(first_manifest.at("stats").at("backend_calls") == 32);
    CHECK(first_manifest.at("stats").at("cache_hits") == 0);

    CHECK(run_cli(cmd).code == 0);
    CHECK(slurp(dir / "matches.jsonl") == first_bytes);
    const auto rerun_manifest = nlohmann::json::parse(slurp(dir / "matches.jsonl.manifest.json"));
    CHECK(rerun_manifest.at("stats").at("backend_calls") == 0);
    CHECK(rerun_manifest.at("stats").at("cache_hits") == 32);
    CHECK(rerun_manifest.at("results") == first_manifest.at("results"));

    // alpha answers sort before beta: the lexicographic judge gives alpha a sweep
    const auto matches = read_matches(dir / "matches.jsonl");
    for (const auto& m : matches) {
        CHECK(m.model_a == "alpha");
        CHECK(m.outcome == MatchOutcome::WinA);
    }
}

TEST_CASE("agreement on the bundled worked-example votes prints 0.667") {
    const std::string votes = data_dir() + "/sample/votes_d3.jsonl";
    CmdResult s2 = run_cli("agreement --votes " + votes + " --types g4-pair,human --setup s2");
    CHECK(s2.code == 0);
    CHECK(s2.output == "agreement g4-pair vs human (s2): 0.667 (= 2/3) over 3 vote pairs in "
                       "1 cells\nrandom baseline: 0.500\n");

    CmdResult s1 = run_cli("agreement --votes " + votes + " --types g4-pair,human --setup s1");
    CHECK(s1.output == "agreement g4-pair vs human (s1): 0.667 (= 2/3) over 3 vote pairs in "
                       "1 cells\nrandom baseline: 0.333\n");

    CmdResult hh = run_cli("agreement --votes " + votes + " --types human,human --setup s1");
    CHECK(hh.output.find("0.333 (= 1/3) over 3 vote pairs") != std::string::npos);

    // majority vote of [A, A, B] is A, matching the judge's A
    CmdResult maj =
        run_cli("agreement --votes " + votes + " --types g4-pair,human --setup s2 --majority");
    CHECK(maj.output == "agreement g4-pair vs human-majority (s2): 1.000 (= 1/1) over 1 vote "
                        "pairs in 1 cells\nrandom baseline: 0.500\n");

    CHECK(run_cli("agreement --votes " + votes + " --types g4-pair,human --setup s9").code == 2);
}

TEST_CASE("winrate renders per-opponent and average rows from matches") {
    const auto dir = fresh_dir("winrate");
    const std::string data = data_dir();
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    write_sample_answers(dir / "beta.jsonl", "beta");
    REQUIRE(run_cli("judge --scripted " + data + "/scripted/lex_judge.jsonl" + " --questions " +
                    data + "/sample/questions.jsonl" + " --answers " + q(dir / "alpha.jsonl") +
                    "," + q(dir / "beta.jsonl") + " --out " + q(dir / "matches.jsonl"))
                .code == 0);

    CmdResult win = run_cli("winrate --matches " + q(dir / "matches.jsonl") + " --model alpha");
    CHECK(win.code == 0);
    CHECK(win.output.find("| alpha | beta | 100.0 |") != std::string::npos);
    CHECK(win.output.find("| alpha | (average) | 100.0 | 16 | 0 | 0 |") != std::string::npos);

    CmdResult both = run_cli("winrate --matches " + q(dir / "matches.jsonl") +
                             " --by-category --questions " + data + "/sample/questions.jsonl" +
                             " --model beta --out " + q(dir / "win.json"));
    CHECK(both.code == 0);
    CHECK(both.output.find("| beta / writing | alpha | 0.0 |") != std::string::npos);
    const auto bundle = nlohmann::json::parse(slurp(dir / "win.json"));
    CHECK(bundle.at("kind") == "winrate");
    CHECK(bundle.at("rows").size() == 8); // one row per category

    CHECK(run_cli("winrate --matches " + q(dir / "matches.jsonl") + " --by-category").code == 2);
}

TEST_CASE("score grades answers and prints a bench-score table") {
    const auto dir = fresh_dir("score");
    const std::string data = data_dir();
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    CmdResult r = run_cli("score --scripted " + data + "/scripted/grader.jsonl --questions " +
                          data + "/sample/questions.jsonl --answers " + q(dir / "alpha.jsonl") +
                          " --out " + q(dir / "grades.jsonl") + " --bundle " +
                          q(dir / "bench.json"));
    CHECK(r.code == 0);
    CHECK(r.output.find("| Model | Score | Turn 1 | Turn 2 | Valid grades | Format errors |") !=
          std::string::npos);
    CHECK(r.output.find("| alpha | ") != std::string::npos);

    const auto grades = read_grades(dir / "grades.jsonl");
    REQUIRE(grades.size() == 16); // 8 questions x 2 turns
    for (const auto& g : grades) {
        REQUIRE(g.score.has_value());
        CHECK(*g.score >= 1);
        CHECK(*g.score <= 10);
    }
    const auto bundle = nlohmann::json::parse(slurp(dir / "bench.json"));
    CHECK(bundle.at("rows").at(0).at("valid_grades") == 16);
    CHECK(bundle.at("rows").at(0).at("format_errors") == 0);

    CHECK(run_cli("score --mode pairwise --questions q --answers a").code == 2);
}

TEST_CASE("probe-position classifies scripted judges from a probe file") {
    const auto dir = fresh_dir("pos");
    const std::string data = data_dir();
    std::vector<ProbePair> probes(2);
    probes[0].question_id = 1;
    probes[0].answer_x = "apple pie recipe with steps";
    probes[0].answer_y = "zebra crossing rules explained";
    probes[1].question_id = 2;
    probes[1].answer_x = "innkeeper welcome speech";
    probes[1].answer_y = "weathered traveler tale";
    write_probe_pairs(dir / "probes.jsonl", probes);

    const std::string base = " --questions " + data + "/sample/questions.jsonl --probes " +
                             q(dir / "probes.jsonl");
    CmdResult biased = run_cli("probe-position --scripted " + data +
                               "/scripted/first_judge.jsonl" + base + " --out " +
                               q(dir / "bias.json"));
    CHECK(biased.code == 0);
    CHECK(biased.output.find("| all | 0.0 | 100.0 | 0.0 | 0.0 |") != std::string::npos);

    CmdResult fair = run_cli("probe-position --scripted " + data + "/scripted/tie_judge.jsonl" +
                             base);
    CHECK(fair.output.find("| all | 100.0 | 0.0 | 0.0 | 0.0 |") != std::string::npos);

    // lexicographic judge prefers the same answer in both orders: consistent
    CmdResult lex = run_cli("probe-position --scripted " + data + "/scripted/lex_judge.jsonl" +
                            base + " --group-by category");
    CHECK(lex.output.find("| writing | 100.0 | 0.0 | 0.0 | 0.0 |") != std::string::npos);
    CHECK(lex.output.find("| roleplay | 100.0 | 0.0 | 0.0 | 0.0 |") != std::string::npos);

    // exactly one probe source may be given
    CHECK(run_cli("probe-position --scripted " + data + "/scripted/tie_judge.jsonl" + base +
                  " --answer-model sampler")
              .code == 2);
    CHECK(run_cli("probe-position --scripted " + data + "/scripted/tie_judge.jsonl --questions " +
                  data + "/sample/questions.jsonl")
              .code == 2);
}

TEST_CASE("probe-verbosity reports the attacked side's win rate") {
    const auto dir = fresh_dir("verb");
    const std::string data = data_dir();

    std::vector<ModelAnswer> answers(3);
    answers[0].question_id = 1;
    answers[0].model_id = "lister";
    answers[0].turns = {"Top tips:\n1. pack light\n2. drink water\n3. rest well\nEnjoy!"};
    answers[1].question_id = 2;
    answers[1].model_id = "lister";
    answers[1].turns = {"1. stay in character\n2. keep it brief"};
    answers[2].question_id = 3;
    answers[2].model_id = "lister";
    answers[2].turns = {"Lima, Oslo and Doha."}; // no numbered list: skipped
    write_answers(dir / "answers.jsonl", answers);

    std::ofstream rephrase(dir / "rephrase.jsonl");
    rephrase
        << R"({"question_id":1,"items":["travel with little luggage","stay hydrated","sleep enough"]})"
        << "\n"
        << R"({"question_id":2,"items":["never break character","answer concisely"]})" << "\n";
    rephrase.close();

    const std::string base = " --questions " + data + "/sample/questions.jsonl --answers " +
                             q(dir / "answers.jsonl") + " --rephrasings " +
                             q(dir / "rephrase.jsonl");
    CmdResult fair = run_cli("probe-verbosity --scripted " + data + "/scripted/tie_judge.jsonl" +
                             base + " --attacked-out " + q(dir / "attacked.jsonl"));
    CHECK(fair.code == 0);
    CHECK(fair.output ==
          "failure rate: 0/2 (0.0%) [1 answers without a numbered list skipped]\n");

    const auto attacked = read_answers(dir / "attacked.jsonl");
    REQUIRE(attacked.size() == 2);
    auto doubled = extract_numbered_list(attacked[0].turns.front());
    REQUIRE(doubled);
    CHECK(doubled->items.size() == 6);
    CHECK(doubled->items[3] == "pack light"); // originals survive verbatim

    CmdResult biased = run_cli("probe-verbosity --scripted " + data +
                               "/scripted/longer_judge.jsonl" + base);
    CHECK(biased.output ==
          "failure rate: 2/2 (100.0%) [1 answers without a numbered list skipped]\n");
}

TEST_CASE("probe-math scores judge modes against correctness annotations") {
    const auto dir = fresh_dir("math");
    const std::string data = data_dir();

    std::ofstream qfile(dir / "questions.jsonl");
    qfile << R"({"category":"math","question_id":101,"turns":["What is 6 x 7?"]})" << "\n"
          << R"({"category":"math","question_id":102,"turns":["What is 100 / 4?"]})" << "\n";
    qfile.close();

    std::vector<ModelAnswer> answers;
    for (int64_t qid : {101, 102}) {
        ModelAnswer right;
        right.question_id = qid;
        right.model_id = "right";
        right.turns = {qid == 101 ? "42" : "25"};
        ModelAnswer wrong;
        wrong.question_id = qid;
        wrong.model_id = "wrong";
        wrong.turns = {"a long and confidently wrong derivation that sounds plausible"};
        answers.push_back(right);
        answers.push_back(wrong);
    }
    write_answers(dir / "answers.jsonl", answers);

    std::vector<Annotation> notes = {{101, "right", true},
                                     {101, "wrong", false},
                                     {102, "right", true},
                                     {102, "wrong", false}};
    write_annotations(dir / "notes.jsonl", notes);

    CmdResult r = run_cli("probe-math --scripted " + data + "/scripted/longer_judge.jsonl" +
                          " --questions " + q(dir / "questions.jsonl") + " --answers " +
                          q(dir / "answers.jsonl") + " --annotations " + q(dir / "notes.jsonl") +
                          " --modes default --out " + q(dir / "math.json"));
    CHECK(r.code == 0);
    CHECK(r.output.find("| default | 4/4 | 100.0 |") != std::string::npos);
    const auto bundle = nlohmann::json::parse(slurp(dir / "math.json"));
    CHECK(bundle.at("kind") == "math_failures");

    CHECK(run_cli("probe-math --scripted x --questions q --answers a --annotations n "
                  "--modes sideways")
              .code == 2);
}

TEST_CASE("report renders a saved bundle in both formats") {
    const auto dir = fresh_dir("report");
    const std::string data = data_dir();
    std::vector<ProbePair> probes(1);
    probes[0].question_id = 1;
    probes[0].answer_x = "first sample";
    probes[0].answer_y = "second sample";
    write_probe_pairs(dir / "probes.jsonl", probes);
    REQUIRE(run_cli("probe-position --scripted " + data + "/scripted/tie_judge.jsonl" +
                    " --questions " + data + "/sample/questions.jsonl --probes " +
                    q(dir / "probes.jsonl") + " --out " + q(dir / "bias.json"))
                .code == 0);

    CmdResult csv = run_cli("report --in " + q(dir / "bias.json") + " --format csv");
    CHECK(csv.code == 0);
    CHECK(csv.output ==
          "Group,Consistency (%),Biased toward first (%),Biased toward second (%),Error (%)\n"
          "all,100.0,0.0,0.0,0.0\n");

    CmdResult md = run_cli("report --in " + q(dir / "bias.json") + " --format markdown --out " +
                           q(dir / "bias.md"));
    CHECK(md.code == 0);
    CHECK(slurp(dir / "bias.md").find("| all | 100.0 |") != std::string::npos);

    // rendering is stable: a second run leaves the file untouched
    const auto stamp = std::filesystem::last_write_time(dir / "bias.md");
    CHECK(run_cli("report --in " + q(dir / "bias.json") + " --format markdown --out " +
                  q(dir / "bias.md"))
              .code == 0);
    CHECK(std::filesystem::last_write_time(dir / "bias.md") == stamp);

    CHECK(run_cli("report --in " + q(dir / "bias.json") + " --format html").code == 2);
    CHECK(run_cli("report --in " + q(dir / "nope.json")).code == 1);
}

TEST_CASE("strict mode turns failed cells into a nonzero exit") {
    const auto dir = fresh_dir("strict");
    const std::string data = data_dir();
    write_sample_answers(dir / "alpha.jsonl", "alpha");
    write_sample_answers(dir / "beta.jsonl", "beta");

    // This script only covers turn-1 requests; turn-2 cells fail.
    std::ofstream script(dir / "partial.jsonl");
    script << R"({"response": "[[C]]", "match": {"turn": 1}})" << "\n";
    script.close();

    const std::string base = "judge --scripted " + q(dir / "partial.jsonl") + " --questions " +
                             data + "/sample/questions.jsonl --answers " +
                             q(dir / "alpha.jsonl") + "," + q(dir / "beta.jsonl") + " --out " +
                             q(dir / "matches.jsonl");
    CmdResult lax = run_cli(base);
    CHECK(lax.code == 0);
    CHECK(lax.output.find("cell failed:") != std::string::npos);
    CHECK(lax.output.find("error=8") != std::string::npos);

    CHECK(run_cli(base + " --strict").code == 1);
}

TEST_CASE("gen-answers samples every turn through the backend") {
    const auto dir = fresh_dir("gen");
    const std::string data = data_dir();
    CmdResult r = run_cli("gen-answers --scripted " + data + "/scripted/echo_model.jsonl" +
                          " --model echo-bot --questions " + data + "/sample/questions.jsonl" +
                          " --out " + q(dir / "echo.jsonl"));
    CHECK(r.code == 0);
    CHECK(r.output.find("wrote 8 answers for echo-bot") != std::string::npos);
    const auto answers = read_answers(dir / "echo.jsonl");
    REQUIRE(answers.size() == 8);
    for (const auto& a : answers) {
        REQUIRE(a.turns.size() == 2); // both question turns answered
        CHECK(a.model_id == "echo-bot");
        CHECK_FALSE(a.turns[0].empty());
    }
    // the echo policy replies with the question text itself
    CHECK(answers[0].turns[0].find("travel blog") != std::string::npos);
}
