#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "judgekit/analytics.hpp"
#include "judgekit/backend.hpp"
#include "judgekit/errors.hpp"
#include "judgekit/match.hpp"
#include "judgekit/probes.hpp"
#include "judgekit/prompts.hpp"
#include "judgekit/report.hpp"
#include "judgekit/types.hpp"

namespace py = pybind11;
using namespace judgekit;

namespace {

// dict/list <-> nlohmann::json bridges, so the Python surface speaks plain
// dicts in the same shapes as the JSONL files.

nlohmann::json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& item : obj) arr.push_back(py_to_json(item));
        return arr;
    }
    if (py::isinstance<py::dict>(obj)) {
        nlohmann::json map = nlohmann::json::object();
        for (const auto& item : obj.cast<py::dict>())
            map[item.first.cast<std::string>()] = py_to_json(item.second);
        return map;
    }
    throw py::type_error("unsupported value type for JSON conversion");
}

py::object json_to_py(const nlohmann::json& j) {
    switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer: return py::int_(j.get<int64_t>());
    case nlohmann::json::value_t::number_unsigned: return py::int_(j.get<uint64_t>());
    case nlohmann::json::value_t::number_float: return py::float_(j.get<double>());
    case nlohmann::json::value_t::string: return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
        py::list list;
        for (const auto& item : j) list.append(json_to_py(item));
        return list;
    }
    default: {
        py::dict dict;
        for (const auto& [key, value] : j.items()) dict[py::str(key)] = json_to_py(value);
        return dict;
    }
    }
}

template <typename T> std::vector<T> parse_records(const py::list& records) {
    std::vector<T> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(py_to_json(r).get<T>());
    return out;
}

template <typename T> py::object dump(const T& value) {
    nlohmann::json j = value;
    return json_to_py(j);
}

PairwiseVerdict verdict_arg(const std::string& name) {
    const auto v = pairwise_verdict_from_string(name);
    if (!v) throw py::value_error("unknown verdict '" + name + "'");
    return *v;
}

AgreementSetup setup_arg(const std::string& name) {
    const auto s = agreement_setup_from_string(name);
    if (!s) throw py::value_error("unknown setup '" + name + "' (s1 or s2)");
    return *s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Judging-orchestration core: verdict parsing, swap aggregation, "
              "agreement metrics, robustness probes.";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<TemplateError>(m, "TemplateError", PyExc_ValueError);

    // --- verdicts and aggregation -------------------------------------------
    m.def(
        "parse_pairwise_verdict",
        [](const std::string& raw) { return std::string(to_string(parse_pairwise_verdict(raw))); },
        py::arg("raw"), "Last [[A]]/[[B]]/[[C]] token decides; no token is a format error.");
    m.def(
        "parse_single_score",
        [](const std::string& raw) -> py::object {
            const auto score = parse_single_score(raw);
            return score ? py::object(py::int_(*score)) : py::object(py::none());
        },
        py::arg("raw"), "Last 'Rating: [[n]]' occurrence, 1..10; None on format error.");
    m.def(
        "aggregate_swapped",
        [](const std::string& g1, const std::string& g2) {
            return std::string(to_string(aggregate_swapped(verdict_arg(g1), verdict_arg(g2))));
        },
        py::arg("g1"), py::arg("g2"),
        "Conservative swap aggregation of the two ordered-game verdicts.");
    m.def(
        "classify_probe",
        [](const std::string& g1, const std::string& g2) {
            return std::string(to_string(classify_probe(verdict_arg(g1), verdict_arg(g2))));
        },
        py::arg("g1"), py::arg("g2"), "Position-bias class of a swap-order probe.");
    m.def(
        "position_bias_report",
        [](const std::vector<std::pair<std::string, std::string>>& verdicts) {
            std::vector<std::pair<PairwiseVerdict, PairwiseVerdict>> parsed;
            parsed.reserve(verdicts.size());
            for (const auto& [g1, g2] : verdicts)
                parsed.emplace_back(verdict_arg(g1), verdict_arg(g2));
            return dump(position_bias_report(parsed));
        },
        py::arg("verdicts"), "Consistency/bias/error percentages over (g1, g2) verdict pairs.");

    // --- agreement ------------------------------------------------------------
    m.def(
        "agreement",
        [](const py::list& votes, const std::string& type_x, const std::string& type_y,
           const std::string& setup, bool per_question) {
            const auto table = VoteTable::from_records(parse_records<VoteRecord>(votes));
            AgreementOptions options;
            options.per_question_average = per_question;
            return dump(agreement(table, type_x, type_y, setup_arg(setup), options));
        },
        py::arg("votes"), py::arg("type_x"), py::arg("type_y"), py::arg("setup") = "s1",
        py::arg("per_question") = false,
        "Agreement between two judge types over vote records (dicts in file schema). "
        "A '-majority' suffix on a type compares against that type's majority vote.");

    // --- win rate / bench score ------------------------------------------------
    m.def(
        "win_rate",
        [](const py::list& matches, const std::string& model, bool include_ties) {
            return dump(win_rate(parse_records<MatchResult>(matches), model, include_ties));
        },
        py::arg("matches"), py::arg("model"), py::arg("include_ties") = false,
        "Per-opponent and average win rate from judgment records.");
    m.def(
        "mt_bench_score",
        [](const py::list& grades, const std::string& model) {
            return dump(mt_bench_score(parse_records<SingleGrade>(grades), model));
        },
        py::arg("grades"), py::arg("model"), "Mean single-answer score over all graded turns.");
    m.def(
        "scores_to_votes",
        [](const py::list& grades, const std::string& judge_type) {
            const auto result = scores_to_votes(parse_records<SingleGrade>(grades), judge_type);
            nlohmann::json votes = result.votes;
            py::dict out;
            out["votes"] = json_to_py(votes);
            out["skipped_cells"] = py::int_(result.skipped_cells);
            return out;
        },
        py::arg("grades"), py::arg("judge_type"),
        "Pair up grades per question/turn into pairwise votes (higher score wins).");

    // --- list attack -------------------------------------------------------------
    m.def(
        "extract_numbered_list",
        [](const std::string& answer) -> py::object {
            const auto list = extract_numbered_list(answer);
            if (!list) return py::none();
            py::dict out;
            out["preamble"] = list->preamble;
            out["items"] = list->items;
            out["postamble"] = list->postamble;
            out["marker_style"] = std::string(1, list->marker_style);
            return out;
        },
        py::arg("answer"), "First maximal top-level '1.'/'2.' run, or None.");
    m.def("build_repetitive_list_attack", &build_repetitive_list_attack, py::arg("answer"),
          py::arg("rephrased_items"),
          "Double the list: rephrased items first, originals (byte-identical) after.");

    // --- prompts -------------------------------------------------------------------
    m.def(
        "render_pairwise_prompt",
        [](const py::dict& question, const std::string& answer_a, const std::string& answer_b,
           const std::string& variant) {
            const auto q = py_to_json(question).get<Question>();
            const auto v = prompt_variant_from_string(variant);
            if (!v) throw py::value_error("unknown prompt variant '" + variant + "'");
            const auto& tpl = TemplateStore::builtin().resolve(TemplateRole::Pairwise, *v);
            ModelAnswer a;
            a.question_id = q.question_id;
            a.model_id = "assistant_a";
            a.turns = {answer_a};
            ModelAnswer b;
            b.question_id = q.question_id;
            b.model_id = "assistant_b";
            b.turns = {answer_b};
            const auto rendered = render_pairwise(tpl, q, 1, a, b, *v);
            py::dict out;
            out["system"] = rendered.system_text;
            out["user"] = rendered.user_text;
            out["template_id"] = rendered.template_id;
            return out;
        },
        py::arg("question"), py::arg("answer_a"), py::arg("answer_b"),
        py::arg("variant") = "default", "Render the first-turn pairwise judge prompt.");

    // --- scripted end-to-end ----------------------------------------------------
    m.def(
        "judge_with_policy",
        [](const py::list& questions, const py::list& answers, const std::string& policy,
           const std::string& judge_model, const std::string& mode, const std::string& variant) {
            const auto parsed_policy = scripted_policy_from_string(policy);
            if (!parsed_policy) throw py::value_error("unknown scripted policy '" + policy + "'");
            ScriptedBackend backend({}, "", *parsed_policy);
            MatchPlan plan;
            plan.questions = parse_records<Question>(questions);
            const auto parsed_mode = judge_mode_from_string(mode);
            if (!parsed_mode) throw py::value_error("unknown judge mode '" + mode + "'");
            const auto parsed_variant = prompt_variant_from_string(variant);
            if (!parsed_variant) throw py::value_error("unknown prompt variant '" + variant + "'");
            plan.judge.judge_model = judge_model;
            plan.judge.mode = *parsed_mode;
            plan.judge.prompt_variant = *parsed_variant;
            AnswerSet set;
            for (auto& a : parse_records<ModelAnswer>(answers)) set.add(std::move(a));
            plan.models = set.models();
            MatchRunner runner(TemplateStore::builtin(), backend);
            const RunOutput out = runner.run_plan(plan, set);
            py::dict result;
            nlohmann::json matches = out.matches;
            nlohmann::json grades = out.grades;
            result["matches"] = json_to_py(matches);
            result["grades"] = json_to_py(grades);
            result["manifest"] = json_to_py(manifest_json(out.manifest));
            return result;
        },
        py::arg("questions"), py::arg("answers"), py::arg("policy") = "first_wins",
        py::arg("judge_model") = "scripted-judge", py::arg("mode") = "pairwise",
        py::arg("variant") = "default",
        "Run an all-pairs judging plan offline with a scripted policy judge.");

    // --- reporting ----------------------------------------------------------------
    m.def(
        "emit_report",
        [](const py::dict& bundle, const std::string& format) {
            return emit_report(py_to_json(bundle), format);
        },
        py::arg("bundle"), py::arg("format") = "markdown",
        "Render a metrics bundle as csv or markdown.");
}
