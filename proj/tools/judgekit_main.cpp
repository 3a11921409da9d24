#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "judgekit/analytics.hpp"
#include "judgekit/backend.hpp"
#include "judgekit/config.hpp"
#include "judgekit/errors.hpp"
#include "judgekit/io.hpp"
#include "judgekit/match.hpp"
#include "judgekit/probes.hpp"
#include "judgekit/prompts.hpp"
#include "judgekit/report.hpp"

using namespace judgekit;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct CommonOpts {
    std::string scripted;  // scripted backend playback file
    std::string config;    // backend config (key = value)
    std::string cache;     // completion cache JSONL
    std::string templates; // template directory overriding builtins
    int parallelism = 0;   // 0: take the config / default value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--scripted", opts.scripted,
                    "Scripted backend playback file (replaces the live API)");
    cmd->add_option("--config", opts.config, "Backend config file (key = value lines)");
    cmd->add_option("--cache", opts.cache, "Completion cache file (JSONL, append-only)");
    cmd->add_option("--templates", opts.templates,
                    "Directory of prompt templates overriding the builtin set");
    cmd->add_option("--parallelism", opts.parallelism, "Concurrent judge requests");
}

struct Session {
    std::shared_ptr<Backend> backend;
    std::shared_ptr<CompletionCache> cache;
    std::shared_ptr<CachingBackend> caching; // set when a cache file is used
    TemplateStore templates;
    RunnerOptions runner_options;
};

Session open_session(const CommonOpts& opts) {
    Session s;
    BackendConfig config =
        opts.config.empty() ? default_backend_config() : load_backend_config(opts.config);
    std::shared_ptr<Backend> inner;
    if (!opts.scripted.empty())
        inner = std::make_shared<ScriptedBackend>(ScriptedBackend::load_file(opts.scripted));
    else
        inner = std::make_shared<HttpBackend>(config);
    if (!opts.cache.empty()) {
        s.cache = std::make_shared<CompletionCache>(opts.cache);
        s.caching = std::make_shared<CachingBackend>(inner, s.cache);
        s.backend = s.caching;
    } else {
        s.backend = inner;
    }
    s.templates =
        opts.templates.empty() ? TemplateStore::builtin() : overlay_templates(opts.templates);
    s.runner_options.parallelism =
        opts.parallelism > 0 ? opts.parallelism : config.parallelism;
    return s;
}

std::vector<Question> load_questions_checked(const std::string& path) {
    auto questions = read_questions(path);
    const auto report = validate_question_set(questions);
    if (!report.ok()) {
        std::string detail;
        for (size_t i = 0; i < report.violations.size() && i < 5; ++i)
            detail += (i ? "; " : "") + report.violations[i].kind + " (question " +
                      std::to_string(report.violations[i].question_id) + ")";
        throw InputError("invalid question set " + path + ": " + detail);
    }
    return questions;
}

std::map<int64_t, Category> category_map(const std::vector<Question>& questions) {
    std::map<int64_t, Category> map;
    for (const auto& q : questions) map[q.question_id] = q.category;
    return map;
}

JudgeMode parse_mode(const std::string& name) {
    const auto mode = judge_mode_from_string(name);
    if (!mode) throw UsageError("unknown judge mode '" + name + "'");
    return *mode;
}

PromptVariant parse_variant(const std::string& name) {
    const auto variant = prompt_variant_from_string(name);
    if (!variant) throw UsageError("unknown prompt variant '" + name + "'");
    return *variant;
}

void write_bundle(const std::string& path, const nlohmann::json& bundle) {
    write_file_if_changed(path, bundle.dump(2) + "\n");
}

void write_manifest(const std::string& judgments_path, const std::string& manifest_path,
                    const RunManifest& manifest) {
    const std::string path =
        manifest_path.empty() ? judgments_path + ".manifest.json" : manifest_path;
    write_file_if_changed(path, manifest_json(manifest).dump(2) + "\n");
}

// Shared --strict rule: failed cells or Error outcomes make the run fail.
int strict_exit(bool strict, const RunManifest& manifest) {
    if (!strict) return 0;
    const auto it = manifest.outcome_counts.find("error");
    const bool error_outcomes = it != manifest.outcome_counts.end() && it->second > 0;
    return (manifest.has_errors() || error_outcomes) ? 1 : 0;
}

std::string outcome_summary(const RunManifest& m) {
    std::string out;
    for (const auto& [outcome, count] : m.outcome_counts)
        out += (out.empty() ? "" : ", ") + outcome + "=" + std::to_string(count);
    return out.empty() ? "none" : out;
}

Question first_turn_only(const Question& q) {
    Question copy = q;
    if (copy.turns.size() > 1) copy.turns.resize(1);
    if (copy.reference && copy.reference->size() > 1) copy.reference->resize(1);
    return copy;
}

// ---------------------------------------------------------------------------
// gen-answers
// ---------------------------------------------------------------------------

struct GenAnswersOpts {
    CommonOpts common;
    std::string model;
    std::string questions;
    std::string out;
    double temperature = 0.7;
};

int run_gen_answers(const GenAnswersOpts& opts) {
    Session session = open_session(opts.common);
    const auto questions = load_questions_checked(opts.questions);
    std::vector<ModelAnswer> answers;
    answers.reserve(questions.size());
    for (const auto& q : questions) {
        ModelAnswer answer;
        answer.question_id = q.question_id;
        answer.model_id = opts.model;
        answer.gen_params.temperature = opts.temperature;
        for (size_t i = 0; i < q.turns.size(); ++i) {
            CompletionRequest request;
            request.model = opts.model;
            request.user_text = q.turns[i];
            request.temperature = opts.temperature;
            for (size_t j = 0; j < i; ++j)
                request.prior_turns.emplace_back(q.turns[j], answer.turns[j]);
            request.metadata["question_id"] = std::to_string(q.question_id);
            request.metadata["turn"] = std::to_string(i + 1);
            request.metadata["mode"] = "gen_answer";
            const auto result = session.backend->complete(request);
            answer.turns.push_back(result.text);
            answer.gen_params.timestamp = result.timestamp;
        }
        answers.push_back(std::move(answer));
    }
    write_answers(opts.out, answers);
    std::cout << "wrote " << answers.size() << " answers for " << opts.model << " to " << opts.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// judge
// ---------------------------------------------------------------------------

struct JudgeOpts {
    CommonOpts common;
    std::string mode = "pairwise";
    std::string judge_model = "gpt-4";
    std::string variant = "default";
    std::string questions;
    std::vector<std::string> answers;
    std::vector<std::string> models;
    std::string pairing = "all-pairs";
    std::string baseline;
    std::string turns = "both";
    std::string fewshot;
    std::string out;
    std::string manifest;
    bool strict = false;
    bool randomize_positions = false;
    uint64_t seed = 0;
};

int run_judge(const JudgeOpts& opts) {
    Session session = open_session(opts.common);
    session.runner_options.randomize_positions = opts.randomize_positions;
    session.runner_options.seed = opts.seed;

    MatchPlan plan;
    plan.questions = load_questions_checked(opts.questions);
    const auto pairing = pairing_from_string(opts.pairing);
    if (!pairing) throw UsageError("unknown pairing '" + opts.pairing + "'");
    plan.pairing = *pairing;
    if (!opts.baseline.empty()) plan.baseline_model = opts.baseline;
    if (plan.pairing == Pairing::VsBaseline && opts.baseline.empty())
        throw UsageError("--pairing vs-baseline needs --baseline");
    const auto turns = turn_selection_from_string(opts.turns);
    if (!turns) throw UsageError("unknown turn selection '" + opts.turns + "'");
    plan.turns = *turns;
    plan.judge.judge_model = opts.judge_model;
    plan.judge.mode = parse_mode(opts.mode);
    plan.judge.prompt_variant = parse_variant(opts.variant);
    if (!opts.fewshot.empty()) plan.judge.fewshot_exemplars = read_fewshot_file(opts.fewshot);

    std::vector<std::filesystem::path> answer_paths(opts.answers.begin(), opts.answers.end());
    const AnswerSet answers = AnswerSet::from_files(answer_paths);
    plan.models = opts.models.empty() ? answers.models() : opts.models;

    MatchRunner runner(session.templates, *session.backend, session.runner_options);
    const RunOutput out = runner.run_plan(plan, answers);

    if (!out.matches.empty()) write_matches(opts.out, out.matches);
    if (!out.grades.empty()) write_grades(opts.out, out.grades);
    if (out.matches.empty() && out.grades.empty())
        write_file_if_changed(opts.out, ""); // empty plan still yields a (empty) file
    write_manifest(opts.out, opts.manifest, out.manifest);

    std::cout << "run " << out.manifest.run_id << ": " << out.manifest.matches_total
              << " matches, " << out.manifest.grades_total << " grades, "
              << out.manifest.games_total << " games\n";
    std::cout << "outcomes: " << outcome_summary(out.manifest) << "\n";
    if (out.manifest.format_error_games > 0)
        std::cout << "format-error games: " << out.manifest.format_error_games << "\n";
    for (const auto& error : out.manifest.errors) std::cerr << "cell failed: " << error << "\n";
    std::cout << "wrote " << opts.out << "\n";
    return strict_exit(opts.strict, out.manifest);
}

// ---------------------------------------------------------------------------
// probe-position
// ---------------------------------------------------------------------------

struct ProbePositionOpts {
    CommonOpts common;
    std::string questions;
    std::string probes;
    std::string answers_x;
    std::string answers_y;
    std::string answer_model;
    double temperature = 0.7;
    std::string judge_model = "gpt-4";
    std::string variant = "default";
    std::string group_by;
    std::string probes_out;
    std::string matches_out;
    std::string out;
    bool strict = false;
};

int run_probe_position(const ProbePositionOpts& opts) {
    Session session = open_session(opts.common);
    const auto questions = load_questions_checked(opts.questions);

    int sources = 0;
    sources += !opts.probes.empty();
    sources += !opts.answers_x.empty() || !opts.answers_y.empty();
    sources += !opts.answer_model.empty();
    if (sources != 1)
        throw UsageError("pick one probe source: --probes FILE, --answers-x/--answers-y, "
                         "or --answer-model MODEL");
    if ((opts.answers_x.empty()) != (opts.answers_y.empty()))
        throw UsageError("--answers-x and --answers-y go together");

    std::vector<ProbePair> probes;
    if (!opts.probes.empty())
        probes = read_probe_pairs(opts.probes);
    else if (!opts.answers_x.empty())
        probes = probe_pairs_from_answer_files(opts.answers_x, opts.answers_y);
    else
        probes = build_position_probe_set(questions, opts.answer_model, *session.backend,
                                          opts.temperature);
    if (probes.empty()) throw InputError("probe set is empty");
    if (!opts.probes_out.empty()) write_probe_pairs(opts.probes_out, probes);

    JudgeSpec judge;
    judge.judge_model = opts.judge_model;
    judge.mode = JudgeMode::Pairwise;
    judge.prompt_variant = parse_variant(opts.variant);

    MatchRunner runner(session.templates, *session.backend, session.runner_options);
    const RunOutput out = judge_probe_set(runner, questions, probes, judge);
    if (!opts.matches_out.empty()) {
        write_matches(opts.matches_out, out.matches);
        write_manifest(opts.matches_out, "", out.manifest);
    }

    nlohmann::json rows = nlohmann::json::array();
    if (opts.group_by.empty()) {
        rows.push_back({{"group", "all"}, {"report", position_bias_report(out.matches)}});
    } else {
        const auto key = probe_group_key_from_string(opts.group_by);
        if (!key) throw UsageError("unknown --group-by key '" + opts.group_by + "'");
        for (const auto& [group, report] :
             group_position_bias(out.matches, *key, category_map(questions)))
            rows.push_back({{"group", group}, {"report", report}});
    }
    const nlohmann::json bundle = {{"kind", "position_bias"}, {"rows", rows}};
    if (!opts.out.empty()) write_bundle(opts.out, bundle);
    std::cout << emit_report(bundle, "markdown");
    return strict_exit(opts.strict, out.manifest);
}

// ---------------------------------------------------------------------------
// probe-verbosity
// ---------------------------------------------------------------------------

struct ProbeVerbosityOpts {
    CommonOpts common;
    std::string questions;
    std::string answers;
    std::string model;
    std::string rephrasings;
    std::string judge_model = "gpt-4";
    std::string attacked_out;
    std::string matches_out;
    std::string out;
    bool strict = false;
};

std::map<int64_t, std::vector<std::string>> read_rephrasings(const std::string& path) {
    std::map<int64_t, std::vector<std::string>> map;
    size_t line = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line;
        try {
            map[j.at("question_id").get<int64_t>()] =
                j.at("items").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line) + ": " + e.what());
        }
    }
    return map;
}

std::vector<std::string> rephrase_via_backend(Backend& backend, const std::string& judge_model,
                                              int64_t question_id, const NumberedList& list) {
    std::string numbered;
    for (size_t i = 0; i < list.items.size(); ++i)
        numbered += std::to_string(i + 1) + list.marker_style + " " + list.items[i] + "\n";
    CompletionRequest request;
    request.model = judge_model;
    request.user_text = "Rephrase the following list without adding any new information. "
                        "Keep the same number of items and the same numbering format.\n\n" +
                        numbered;
    request.temperature = 0.0;
    request.metadata["question_id"] = std::to_string(question_id);
    request.metadata["mode"] = "rephrase";
    const auto result = backend.complete(request);
    const auto parsed = extract_numbered_list(result.text);
    if (!parsed || parsed->items.size() != list.items.size())
        throw InputError("rephrasing for question " + std::to_string(question_id) +
                         " did not come back as a " + std::to_string(list.items.size()) +
                         "-item numbered list");
    return parsed->items;
}

int run_probe_verbosity(const ProbeVerbosityOpts& opts) {
    Session session = open_session(opts.common);
    const auto questions = load_questions_checked(opts.questions);
    std::map<int64_t, const Question*> by_id;
    for (const auto& q : questions) by_id[q.question_id] = &q;

    auto all_answers = read_answers(opts.answers);
    std::string model = opts.model;
    if (model.empty()) {
        for (const auto& a : all_answers)
            if (model.empty())
                model = a.model_id;
            else if (model != a.model_id)
                throw UsageError("answer file holds several models; pick one with --model");
    }

    std::map<int64_t, std::vector<std::string>> rephrasings;
    if (!opts.rephrasings.empty()) rephrasings = read_rephrasings(opts.rephrasings);

    const std::string attacked_id = model + "+attacked";
    MatchPlan plan;
    plan.pairing = Pairing::AllPairs;
    plan.models = {attacked_id, model}; // attacked side is model_a of every match
    plan.judge.judge_model = opts.judge_model;
    plan.judge.mode = JudgeMode::Pairwise;
    plan.turns = TurnSelection::Turn1;
    AnswerSet set;
    std::vector<ModelAnswer> attacked_answers;
    long long skipped_no_list = 0;
    for (const auto& answer : all_answers) {
        if (answer.model_id != model) continue;
        if (answer.turns.empty()) continue;
        const auto it = by_id.find(answer.question_id);
        if (it == by_id.end())
            throw InputError("answer references unknown question " +
                             std::to_string(answer.question_id));
        const auto list = extract_numbered_list(answer.turns.front());
        if (!list) {
            ++skipped_no_list;
            continue;
        }
        std::vector<std::string> items;
        if (!opts.rephrasings.empty()) {
            const auto rit = rephrasings.find(answer.question_id);
            if (rit == rephrasings.end())
                throw InputError("no rephrasings for question " +
                                 std::to_string(answer.question_id));
            items = rit->second;
        } else {
            items = rephrase_via_backend(*session.backend, opts.judge_model, answer.question_id,
                                         *list);
        }
        ModelAnswer attacked;
        attacked.question_id = answer.question_id;
        attacked.model_id = attacked_id;
        attacked.turns = {build_repetitive_list_attack(answer.turns.front(), items)};
        ModelAnswer original = answer;
        original.turns.resize(1);
        plan.questions.push_back(first_turn_only(*it->second));
        set.add(attacked);
        set.add(std::move(original));
        attacked_answers.push_back(std::move(attacked));
    }
    if (plan.questions.empty())
        throw InputError("no answers with an extractable numbered list (skipped " +
                         std::to_string(skipped_no_list) + ")");
    if (!opts.attacked_out.empty()) write_answers(opts.attacked_out, attacked_answers);

    MatchRunner runner(session.templates, *session.backend, session.runner_options);
    const RunOutput out = runner.run_plan(plan, set);
    if (!opts.matches_out.empty()) {
        write_matches(opts.matches_out, out.matches);
        write_manifest(opts.matches_out, "", out.manifest);
    }

    const VerbosityReport report = verbosity_failure_rate(out.matches, attacked_id);
    nlohmann::json row = report;
    row["judge"] = opts.judge_model;
    row["skipped_no_list"] = skipped_no_list;
    const nlohmann::json bundle = {{"kind", "verbosity"},
                                   {"rows", nlohmann::json::array({row})}};
    if (!opts.out.empty()) write_bundle(opts.out, bundle);
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f", 100.0 * report.rate);
    std::cout << "failure rate: " << report.failures << "/" << report.n << " (" << pct << "%)"
              << (skipped_no_list ? " [" + std::to_string(skipped_no_list) +
                                        " answers without a numbered list skipped]"
                                  : "")
              << "\n";
    return strict_exit(opts.strict, out.manifest);
}

// ---------------------------------------------------------------------------
// probe-math
// ---------------------------------------------------------------------------

struct ProbeMathOpts {
    CommonOpts common;
    std::string questions;
    std::vector<std::string> answers;
    std::string model_a;
    std::string model_b;
    std::string annotations;
    std::vector<std::string> modes{"default", "cot", "reference"};
    std::string judge_model = "gpt-4";
    std::string matches_out;
    std::string out;
    bool strict = false;
};

int run_probe_math(const ProbeMathOpts& opts) {
    // Argument validation happens before any file is touched.
    std::vector<JudgeMode> modes;
    std::vector<std::string> mode_labels;
    for (const auto& name : opts.modes) {
        if (name == "default")
            modes.push_back(JudgeMode::Pairwise);
        else if (name == "cot")
            modes.push_back(JudgeMode::PairwiseCot);
        else if (name == "reference")
            modes.push_back(JudgeMode::PairwiseReference);
        else
            throw UsageError("unknown math-harness mode '" + name +
                             "' (default, cot, reference)");
        mode_labels.push_back(name);
    }

    Session session = open_session(opts.common);
    const auto questions = load_questions_checked(opts.questions);
    std::vector<std::filesystem::path> answer_paths(opts.answers.begin(), opts.answers.end());
    const AnswerSet answers = AnswerSet::from_files(answer_paths);

    std::string model_a = opts.model_a, model_b = opts.model_b;
    if (model_a.empty() || model_b.empty()) {
        const auto models = answers.models();
        if (models.size() != 2)
            throw UsageError("answer files hold " + std::to_string(models.size()) +
                             " models; name the pair with --model-a/--model-b");
        model_a = models[0];
        model_b = models[1];
    }

    const auto annotations = read_annotations(opts.annotations);
    MatchRunner runner(session.templates, *session.backend, session.runner_options);
    std::vector<MatchResult> all_matches;
    const auto table = math_failure_harness(runner, questions, answers, model_a, model_b,
                                            opts.judge_model, modes, annotations, &all_matches);
    if (!opts.matches_out.empty()) write_matches(opts.matches_out, all_matches);

    nlohmann::json rows = nlohmann::json::array();
    for (size_t i = 0; i < modes.size(); ++i) {
        nlohmann::json row = table.at(modes[i]);
        row["mode"] = mode_labels[i];
        rows.push_back(row);
    }
    const nlohmann::json bundle = {{"kind", "math_failures"}, {"rows", rows}};
    if (!opts.out.empty()) write_bundle(opts.out, bundle);
    std::cout << emit_report(bundle, "markdown");

    if (opts.strict)
        for (const auto& m : all_matches)
            if (m.outcome == MatchOutcome::Error) return 1;
    return 0;
}

// ---------------------------------------------------------------------------
// agreement
// ---------------------------------------------------------------------------

struct AgreementOpts {
    CommonOpts common;
    std::vector<std::string> votes;
    std::vector<std::string> matches;
    std::string match_type = "judge";
    std::vector<std::string> types;
    std::string setup = "s1";
    bool majority = false;
    bool per_question = false;
    std::string out;
};

int run_agreement(const AgreementOpts& opts) {
    if (opts.votes.empty() && opts.matches.empty())
        throw UsageError("agreement needs --votes and/or --matches input");
    if (opts.types.size() != 2)
        throw UsageError("--types takes exactly two judge types, e.g. --types gpt4,human");

    std::vector<VoteRecord> records;
    long long both_bad = 0, skipped_errors = 0;
    for (const auto& path : opts.votes) {
        auto ingest = read_votes(path);
        both_bad += ingest.both_bad_count;
        records.insert(records.end(), ingest.votes.begin(), ingest.votes.end());
    }
    for (const auto& path : opts.matches) {
        auto converted = votes_from_matches(read_matches(path), opts.match_type);
        skipped_errors += converted.skipped_errors;
        records.insert(records.end(), converted.votes.begin(), converted.votes.end());
    }
    const VoteTable table = VoteTable::from_records(records);

    const auto setup = agreement_setup_from_string(opts.setup);
    if (!setup) throw UsageError("unknown setup '" + opts.setup + "' (s1 or s2)");
    std::string type_x = opts.types[0], type_y = opts.types[1];
    if (opts.majority && !type_y.ends_with("-majority"))
        type_y = human_majority(table, type_y);

    AgreementOptions options;
    options.per_question_average = opts.per_question;
    const AgreementReport report = agreement(table, type_x, type_y, *setup, options);

    const nlohmann::json bundle = {{"kind", "agreement"},
                                   {"rows", nlohmann::json::array({report})}};
    if (!opts.out.empty()) write_bundle(opts.out, bundle);

    char value[32];
    std::snprintf(value, sizeof(value), "%.3f", report.agreement);
    std::cout << "agreement " << report.judge_type_x << " vs " << report.judge_type_y << " ("
              << to_string(report.setup) << "): " << value << " (= " << report.agreement_num
              << "/" << report.agreement_den << ") over " << report.vote_count
              << " vote pairs in " << report.cell_count << " cells\n";
    char baseline[32];
    std::snprintf(baseline, sizeof(baseline), "%.3f", report.random_baseline);
    std::cout << "random baseline: " << baseline << "\n";
    if (both_bad) std::cout << "both-bad votes collapsed to tie: " << both_bad << "\n";
    if (skipped_errors) std::cout << "error-outcome matches skipped: " << skipped_errors << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// winrate
// ---------------------------------------------------------------------------

struct WinrateOpts {
    CommonOpts common;
    std::vector<std::string> matches;
    std::vector<std::string> votes;
    std::string vote_type;
    std::string model;
    std::string questions;
    bool include_ties = false;
    bool by_category = false;
    std::string out;
};

int run_winrate(const WinrateOpts& opts) {
    if (opts.matches.empty() == opts.votes.empty())
        throw UsageError("winrate needs exactly one input kind: --matches or --votes");
    if (!opts.votes.empty() && opts.vote_type.empty())
        throw UsageError("--votes needs --type to pick the judge type");
    if (opts.by_category && opts.questions.empty())
        throw UsageError("--by-category needs --questions for the category map");
    if (opts.by_category && opts.matches.empty())
        throw UsageError("--by-category works on --matches input");

    nlohmann::json rows = nlohmann::json::array();
    if (!opts.matches.empty()) {
        std::vector<MatchResult> matches;
        for (const auto& path : opts.matches) {
            auto batch = read_matches(path);
            matches.insert(matches.end(), batch.begin(), batch.end());
        }
        std::vector<std::string> models;
        if (!opts.model.empty()) {
            models = {opts.model};
        } else {
            std::set<std::string> all;
            for (const auto& m : matches) {
                all.insert(m.model_a);
                all.insert(m.model_b);
            }
            models.assign(all.begin(), all.end());
        }
        for (const auto& model : models) {
            if (opts.by_category) {
                const auto questions = load_questions_checked(opts.questions);
                for (const auto& [category, report] :
                     category_win_rate(matches, model, category_map(questions),
                                       opts.include_ties)) {
                    nlohmann::json row = report;
                    row["model"] = model + " / " + std::string(to_string(category));
                    rows.push_back(row);
                }
            } else {
                rows.push_back(win_rate(matches, model, opts.include_ties));
            }
        }
    } else {
        std::vector<VoteRecord> records;
        for (const auto& path : opts.votes) {
            auto ingest = read_votes(path);
            records.insert(records.end(), ingest.votes.begin(), ingest.votes.end());
        }
        const VoteTable table = VoteTable::from_records(records);
        std::vector<std::string> models;
        if (!opts.model.empty()) {
            models = {opts.model};
        } else {
            std::set<std::string> all;
            for (const auto& [pair_a, pair_b] : table.model_pairs()) {
                all.insert(pair_a);
                all.insert(pair_b);
            }
            models.assign(all.begin(), all.end());
        }
        for (const auto& model : models)
            rows.push_back(win_rate(table, opts.vote_type, model, opts.include_ties));
    }

    const nlohmann::json bundle = {{"kind", "winrate"},
                                   {"include_ties", opts.include_ties},
                                   {"rows", rows}};
    if (!opts.out.empty()) write_bundle(opts.out, bundle);
    std::cout << emit_report(bundle, "markdown");
    return 0;
}

// ---------------------------------------------------------------------------
// score (single-answer grading flow)
// ---------------------------------------------------------------------------

struct ScoreOpts {
    CommonOpts common;
    std::string questions;
    std::vector<std::string> answers;
    std::vector<std::string> models;
    std::string judge_model = "gpt-4";
    std::string mode = "single";
    std::string turns = "both";
    std::string out;
    std::string manifest;
    std::string bundle;
    bool strict = false;
};

int run_score(const ScoreOpts& opts) {
    // Argument validation happens before any file is touched.
    MatchPlan plan;
    plan.judge.judge_model = opts.judge_model;
    plan.judge.mode = parse_mode(opts.mode);
    if (plan.judge.mode != JudgeMode::Single && plan.judge.mode != JudgeMode::SingleReference &&
        plan.judge.mode != JudgeMode::SingleMultiturn)
        throw UsageError("score uses a single-answer mode (single, single_reference)");
    const auto turns = turn_selection_from_string(opts.turns);
    if (!turns) throw UsageError("unknown turn selection '" + opts.turns + "'");
    plan.turns = *turns;

    Session session = open_session(opts.common);
    plan.questions = load_questions_checked(opts.questions);

    std::vector<std::filesystem::path> answer_paths(opts.answers.begin(), opts.answers.end());
    const AnswerSet answers = AnswerSet::from_files(answer_paths);
    plan.models = opts.models.empty() ? answers.models() : opts.models;

    MatchRunner runner(session.templates, *session.backend, session.runner_options);
    const RunOutput out = runner.run_plan(plan, answers);
    if (!opts.out.empty()) {
        write_grades(opts.out, out.grades);
        write_manifest(opts.out, opts.manifest, out.manifest);
    }

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& model : plan.models)
        rows.push_back(mt_bench_score(out.grades, model, category_map(plan.questions)));
    const nlohmann::json bundle = {{"kind", "bench_score"}, {"rows", rows}};
    if (!opts.bundle.empty()) write_bundle(opts.bundle, bundle);
    std::cout << emit_report(bundle, "markdown");
    return strict_exit(opts.strict, out.manifest);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOpts {
    CommonOpts common;
    std::string in;
    std::string format = "markdown";
    std::string out;
};

int run_report(const ReportOpts& opts) {
    std::ifstream in(opts.in);
    if (!in) throw InputError("cannot open metrics bundle " + opts.in);
    nlohmann::json bundle;
    try {
        in >> bundle;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(opts.in + ": " + e.what());
    }
    const std::string rendered = emit_report(bundle, opts.format);
    if (opts.out.empty())
        std::cout << rendered;
    else
        write_file_if_changed(opts.out, rendered);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"judgekit: LLM-as-a-judge orchestration harness"};
    app.require_subcommand(1);

    GenAnswersOpts gen_opts;
    auto* gen = app.add_subcommand("gen-answers", "Sample model answers for a question set");
    add_common(gen, gen_opts.common);
    gen->add_option("--model", gen_opts.model, "Answering model")->required();
    gen->add_option("--questions", gen_opts.questions, "Question JSONL")->required();
    gen->add_option("--out", gen_opts.out, "Output answer JSONL")->required();
    gen->add_option("--temperature", gen_opts.temperature, "Sampling temperature");

    JudgeOpts judge_opts;
    auto* judge = app.add_subcommand("judge", "Run pairwise or single-answer judging");
    add_common(judge, judge_opts.common);
    judge->add_option("--mode", judge_opts.mode, "Judge mode (pairwise, single, ...)");
    judge->add_option("--judge-model", judge_opts.judge_model, "Judge model name");
    judge->add_option("--variant", judge_opts.variant, "Prompt variant");
    judge->add_option("--questions", judge_opts.questions, "Question JSONL")->required();
    judge->add_option("--answers", judge_opts.answers, "Answer JSONL files")
        ->required()
        ->delimiter(',');
    judge->add_option("--models", judge_opts.models, "Model subset (default: all in answers)")
        ->delimiter(',');
    judge->add_option("--pairing", judge_opts.pairing, "all-pairs or vs-baseline");
    judge->add_option("--baseline", judge_opts.baseline, "Baseline model for vs-baseline");
    judge->add_option("--turns", judge_opts.turns, "turn1, turn2 or both");
    judge->add_option("--fewshot", judge_opts.fewshot, "Few-shot exemplar JSONL");
    judge->add_option("--out", judge_opts.out, "Output judgment JSONL")->required();
    judge->add_option("--manifest", judge_opts.manifest, "Manifest path (default <out>.manifest.json)");
    judge->add_flag("--strict", judge_opts.strict, "Exit 1 on any Error outcome or failed cell");
    judge->add_flag("--randomize-positions", judge_opts.randomize_positions,
                    "Single game per match in a seed-derived random order");
    judge->add_option("--seed", judge_opts.seed, "Seed for --randomize-positions");

    ProbePositionOpts pos_opts;
    auto* pos = app.add_subcommand("probe-position", "Position-bias probe (swap-order judging)");
    add_common(pos, pos_opts.common);
    pos->add_option("--questions", pos_opts.questions, "Question JSONL")->required();
    pos->add_option("--probes", pos_opts.probes, "Pre-built probe-pair JSONL");
    pos->add_option("--answers-x", pos_opts.answers_x, "First answer file (join mode)");
    pos->add_option("--answers-y", pos_opts.answers_y, "Second answer file (join mode)");
    pos->add_option("--answer-model", pos_opts.answer_model, "Sample probe answers from this model");
    pos->add_option("--temperature", pos_opts.temperature, "Sampling temperature (> 0)");
    pos->add_option("--judge-model", pos_opts.judge_model, "Judge model name");
    pos->add_option("--variant", pos_opts.variant, "Prompt variant");
    pos->add_option("--group-by", pos_opts.group_by, "category, model_pair or prompt_variant");
    pos->add_option("--probes-out", pos_opts.probes_out, "Save the generated probe set");
    pos->add_option("--matches-out", pos_opts.matches_out, "Save raw judgments");
    pos->add_option("--out", pos_opts.out, "Metrics bundle JSON");
    pos->add_flag("--strict", pos_opts.strict, "Exit 1 on any Error outcome or failed cell");

    ProbeVerbosityOpts verb_opts;
    auto* verb = app.add_subcommand("probe-verbosity", "Repetitive-list attack probe");
    add_common(verb, verb_opts.common);
    verb->add_option("--questions", verb_opts.questions, "Question JSONL")->required();
    verb->add_option("--answers", verb_opts.answers, "Original answers JSONL")->required();
    verb->add_option("--model", verb_opts.model, "Model whose answers get attacked");
    verb->add_option("--rephrasings", verb_opts.rephrasings,
                     "JSONL {question_id, items}; omit to rephrase via the judge model");
    verb->add_option("--judge-model", verb_opts.judge_model, "Judge (and rephrasing) model");
    verb->add_option("--attacked-out", verb_opts.attacked_out, "Save attacked answers");
    verb->add_option("--matches-out", verb_opts.matches_out, "Save raw judgments");
    verb->add_option("--out", verb_opts.out, "Metrics bundle JSON");
    verb->add_flag("--strict", verb_opts.strict, "Exit 1 on any Error outcome or failed cell");

    ProbeMathOpts math_opts;
    auto* math = app.add_subcommand("probe-math", "Math/reasoning failure harness");
    add_common(math, math_opts.common);
    math->add_option("--questions", math_opts.questions, "Math question JSONL")->required();
    math->add_option("--answers", math_opts.answers, "Answer JSONL files")
        ->required()
        ->delimiter(',');
    math->add_option("--model-a", math_opts.model_a, "First candidate model");
    math->add_option("--model-b", math_opts.model_b, "Second candidate model");
    math->add_option("--annotations", math_opts.annotations,
                     "Correctness annotations JSONL {question_id, model_id, is_correct}")
        ->required();
    math->add_option("--modes", math_opts.modes, "Subset of default,cot,reference")
        ->delimiter(',');
    math->add_option("--judge-model", math_opts.judge_model, "Judge model name");
    math->add_option("--matches-out", math_opts.matches_out, "Save raw judgments");
    math->add_option("--out", math_opts.out, "Metrics bundle JSON");
    math->add_flag("--strict", math_opts.strict, "Exit 1 on any Error outcome");

    AgreementOpts agree_opts;
    auto* agree = app.add_subcommand("agreement", "Agreement between two judge types");
    add_common(agree, agree_opts.common);
    agree->add_option("--votes", agree_opts.votes, "Vote JSONL files")->delimiter(',');
    agree->add_option("--matches", agree_opts.matches, "Judgment JSONL files (converted to votes)")
        ->delimiter(',');
    agree->add_option("--match-type", agree_opts.match_type,
                      "Judge type label for --matches votes");
    agree->add_option("--types", agree_opts.types, "The two judge types, e.g. gpt4,human")
        ->required()
        ->delimiter(',');
    agree->add_option("--setup", agree_opts.setup, "s1 (ties count) or s2 (non-tie votes only)");
    agree->add_flag("--majority", agree_opts.majority,
                    "Compare against the majority vote of the second type");
    agree->add_flag("--per-question", agree_opts.per_question,
                    "Average per-cell agreement instead of pooling pairs");
    agree->add_option("--out", agree_opts.out, "Metrics bundle JSON");

    WinrateOpts win_opts;
    auto* win = app.add_subcommand("winrate", "Per-opponent and average win rates");
    add_common(win, win_opts.common);
    win->add_option("--matches", win_opts.matches, "Judgment JSONL files")->delimiter(',');
    win->add_option("--votes", win_opts.votes, "Vote JSONL files")->delimiter(',');
    win->add_option("--type", win_opts.vote_type, "Judge type to read from --votes");
    win->add_option("--model", win_opts.model, "Single model (default: all)");
    win->add_option("--questions", win_opts.questions, "Question JSONL (for --by-category)");
    win->add_flag("--include-ties", win_opts.include_ties, "Count ties as half a win");
    win->add_flag("--by-category", win_opts.by_category, "Break win rates down by category");
    win->add_option("--out", win_opts.out, "Metrics bundle JSON");

    ScoreOpts score_opts;
    auto* score = app.add_subcommand("score", "Single-answer grading and bench score");
    add_common(score, score_opts.common);
    score->add_option("--questions", score_opts.questions, "Question JSONL")->required();
    score->add_option("--answers", score_opts.answers, "Answer JSONL files")
        ->required()
        ->delimiter(',');
    score->add_option("--models", score_opts.models, "Model subset (default: all in answers)")
        ->delimiter(',');
    score->add_option("--judge-model", score_opts.judge_model, "Judge model name");
    score->add_option("--mode", score_opts.mode, "single or single_reference");
    score->add_option("--turns", score_opts.turns, "turn1, turn2 or both");
    score->add_option("--out", score_opts.out, "Output grade JSONL");
    score->add_option("--manifest", score_opts.manifest, "Manifest path");
    score->add_option("--bundle", score_opts.bundle, "Bench-score metrics bundle JSON");
    score->add_flag("--strict", score_opts.strict, "Exit 1 on failed cells");

    ReportOpts report_opts;
    auto* report = app.add_subcommand("report", "Render a metrics bundle as csv or markdown");
    add_common(report, report_opts.common);
    report->add_option("--in", report_opts.in, "Metrics bundle JSON")->required();
    report->add_option("--format", report_opts.format, "csv or markdown")
        ->check(CLI::IsMember({"csv", "markdown"}));
    report->add_option("--out", report_opts.out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_gen_answers(gen_opts);
        if (judge->parsed()) return run_judge(judge_opts);
        if (pos->parsed()) return run_probe_position(pos_opts);
        if (verb->parsed()) return run_probe_verbosity(verb_opts);
        if (math->parsed()) return run_probe_math(math_opts);
        if (agree->parsed()) return run_agreement(agree_opts);
        if (win->parsed()) return run_winrate(win_opts);
        if (score->parsed()) return run_score(score_opts);
        if (report->parsed()) return run_report(report_opts);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
