#include "judgekit/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "judgekit/digest.hpp"
#include "judgekit/errors.hpp"

namespace judgekit {

namespace {

constexpr std::string_view kRoleNames[] = {
    "pairwise",         "single",
    "pairwise_reference", "single_reference",
    "pairwise_multiturn", "single_multiturn",
    "pairwise_cot",     "single_multiturn_reference",
};

// Every placeholder a template may use. Anything else inside {braces} in a
// template file is a typo and is rejected at load time.
const std::set<std::string, std::less<>> kSlotVocabulary = {
    "question",       "answer_a",     "answer_b", "answer",
    "reference",      "conversation_a", "conversation_b", "conversation",
    "focus_instruction",
};

std::vector<std::string> required_slots(TemplateRole role) {
    switch (role) {
        case TemplateRole::Pairwise:
        case TemplateRole::PairwiseCot:
            return {"question", "answer_a", "answer_b"};
        case TemplateRole::PairwiseReference:
            return {"question", "answer_a", "answer_b", "reference"};
        case TemplateRole::Single:
            return {"question", "answer"};
        case TemplateRole::SingleReference:
            return {"question", "answer", "reference"};
        case TemplateRole::PairwiseMultiturn:
            return {"conversation_a", "conversation_b"};
        case TemplateRole::SingleMultiturn:
            return {"conversation"};
        case TemplateRole::SingleMultiturnReference:
            return {"conversation", "reference"};
    }
    return {};
}

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// All {name} tokens whose name is made of slot characters.
std::set<std::string> scan_placeholders(std::string_view text) {
    std::set<std::string> found;
    size_t i = 0;
    while ((i = text.find('{', i)) != std::string_view::npos) {
        size_t j = i + 1;
        while (j < text.size() && is_slot_char(text[j])) ++j;
        if (j < text.size() && text[j] == '}' && j > i + 1)
            found.insert(std::string(text.substr(i + 1, j - i - 1)));
        i = i + 1;
    }
    return found;
}

using SlotValues = std::map<std::string, const std::string*, std::less<>>;

// Single left-to-right pass; substituted values are opaque and never
// re-scanned, so answer text containing "{question}" passes through verbatim.
std::string fill_slots(std::string_view text, const SlotValues& values,
                       const std::string& template_id) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            size_t j = i + 1;
            while (j < text.size() && is_slot_char(text[j])) ++j;
            if (j < text.size() && text[j] == '}' && j > i + 1) {
                std::string_view name = text.substr(i + 1, j - i - 1);
                if (kSlotVocabulary.count(name)) {
                    auto it = values.find(name);
                    if (it == values.end() || it->second == nullptr)
                        throw TemplateError("no value for placeholder {" + std::string(name) +
                                            "} in template " + template_id);
                    out += *it->second;
                    i = j + 1;
                    continue;
                }
            }
        }
        out += text[i];
        ++i;
    }
    return out;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

RenderedPrompt finish(const PromptTemplate& t, std::string system_text, std::string user_text) {
    RenderedPrompt p;
    p.system_text = std::move(system_text);
    p.user_text = std::move(user_text);
    p.template_id = t.template_id;
    p.slot_digest = sha256_fields({t.template_id, p.system_text, p.user_text});
    return p;
}

void check_turn(const Question& q, int turn) {
    if (turn < 1 || size_t(turn) > q.turns.size())
        throw InputError("turn " + std::to_string(turn) + " out of range for question " +
                         std::to_string(q.question_id) + " with " +
                         std::to_string(q.turns.size()) + " turn(s)");
}

void check_answer_turn(const ModelAnswer& a, int turn) {
    if (turn < 1 || size_t(turn) > a.turns.size())
        throw InputError("turn " + std::to_string(turn) + " out of range for answer by " +
                         a.model_id + " on question " + std::to_string(a.question_id));
}

const std::string kPairFocus =
    " You should focus on who provides a better answer to the second user question.";
const std::string kSingleFocus =
    " Your evaluation should focus on the assistant's answer to the second user question.";
const std::string kEmpty;

} // namespace

std::string_view to_string(TemplateRole r) { return kRoleNames[size_t(r)]; }

std::optional<TemplateRole> template_role_from_string(std::string_view s) {
    for (size_t i = 0; i < std::size(kRoleNames); ++i)
        if (kRoleNames[i] == s) return TemplateRole(i);
    return std::nullopt;
}

TemplateRole role_for(JudgeMode mode, int turn) {
    if (turn <= 1) {
        switch (mode) {
            case JudgeMode::Pairwise: return TemplateRole::Pairwise;
            case JudgeMode::Single: return TemplateRole::Single;
            case JudgeMode::PairwiseReference: return TemplateRole::PairwiseReference;
            case JudgeMode::SingleReference: return TemplateRole::SingleReference;
            case JudgeMode::PairwiseMultiturn: return TemplateRole::PairwiseMultiturn;
            case JudgeMode::SingleMultiturn: return TemplateRole::SingleMultiturn;
            case JudgeMode::PairwiseCot: return TemplateRole::PairwiseCot;
        }
    }
    // Later turns judge the whole conversation where a template for that
    // exists; cot and reference-guided pairwise have no conversation form and
    // keep rendering per turn.
    switch (mode) {
        case JudgeMode::Pairwise:
        case JudgeMode::PairwiseMultiturn: return TemplateRole::PairwiseMultiturn;
        case JudgeMode::Single:
        case JudgeMode::SingleMultiturn: return TemplateRole::SingleMultiturn;
        case JudgeMode::SingleReference: return TemplateRole::SingleMultiturnReference;
        case JudgeMode::PairwiseReference: return TemplateRole::PairwiseReference;
        case JudgeMode::PairwiseCot: return TemplateRole::PairwiseCot;
    }
    throw InputError("unhandled judge mode");
}

PromptTemplate parse_template(const std::string& template_id, const std::string& text) {
    PromptTemplate t;
    t.template_id = template_id;

    // "<role>_<variant>": variant is the last underscore-separated token.
    size_t us = template_id.rfind('_');
    if (us == std::string::npos)
        throw TemplateError("template id '" + template_id + "' is not <role>_<variant>");
    auto variant = prompt_variant_from_string(template_id.substr(us + 1));
    auto role = template_role_from_string(template_id.substr(0, us));
    if (!variant)
        throw TemplateError("unknown variant in template id '" + template_id + "'");
    if (!role) throw TemplateError("unknown role in template id '" + template_id + "'");
    t.role = *role;
    t.variant = *variant;

    constexpr std::string_view sys_marker = "[system]\n";
    constexpr std::string_view user_marker = "\n[user]\n";
    if (text.rfind(sys_marker, 0) == 0) {
        size_t m = text.find(user_marker);
        if (m == std::string::npos)
            throw TemplateError("template " + template_id + " has [system] but no [user] marker");
        t.system_text = text.substr(sys_marker.size(), m - sys_marker.size());
        t.body = text.substr(m + user_marker.size());
    } else {
        t.body = text;
    }
    if (!t.body.empty() && t.body.back() == '\n') t.body.pop_back();

    auto in_system = scan_placeholders(t.system_text);
    auto in_body = scan_placeholders(t.body);
    for (const auto* set : {&in_system, &in_body})
        for (const auto& name : *set)
            if (!kSlotVocabulary.count(name))
                throw TemplateError("template " + template_id + " uses unknown placeholder {" +
                                    name + "}");
    for (const auto& slot : required_slots(t.role))
        if (!in_body.count(slot))
            throw TemplateError("template " + template_id + " is missing required placeholder {" +
                                slot + "}");
    return t;
}

// --- TemplateStore ----------------------------------------------------------

struct BuiltinTemplate {
    const char* id;
    const char* text;
};
#include "templates_builtin.inc"

const TemplateStore& TemplateStore::builtin() {
    static const TemplateStore store = [] {
        TemplateStore s;
        for (const auto& bt : kBuiltinTemplates) s.add(parse_template(bt.id, bt.text));
        return s;
    }();
    return store;
}

TemplateStore TemplateStore::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw TemplateError("template directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    TemplateStore s;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        s.add(parse_template(f.stem().string(), buf.str()));
    }
    return s;
}

TemplateStore overlay_templates(const std::filesystem::path& dir) {
    TemplateStore store = TemplateStore::load_dir(dir);
    static constexpr TemplateRole kRoles[] = {
        TemplateRole::Pairwise,          TemplateRole::Single,
        TemplateRole::PairwiseReference, TemplateRole::SingleReference,
        TemplateRole::PairwiseMultiturn, TemplateRole::SingleMultiturn,
        TemplateRole::PairwiseCot,       TemplateRole::SingleMultiturnReference,
    };
    static constexpr PromptVariant kVariants[] = {PromptVariant::Default, PromptVariant::Rename,
                                                  PromptVariant::Score, PromptVariant::Short};
    for (TemplateRole role : kRoles)
        for (PromptVariant variant : kVariants)
            if (!store.has(role, variant) && TemplateStore::builtin().has(role, variant))
                store.add(TemplateStore::builtin().get(role, variant));
    return store;
}

void TemplateStore::add(PromptTemplate t) {
    auto key = std::make_pair(t.role, t.variant);
    if (templates_.count(key))
        throw TemplateError("duplicate template for role " + std::string(to_string(t.role)) +
                            ", variant " + std::string(to_string(t.variant)));
    templates_.emplace(key, std::move(t));
}

const PromptTemplate& TemplateStore::get(TemplateRole role, PromptVariant variant) const {
    auto it = templates_.find({role, variant});
    if (it == templates_.end())
        throw TemplateError("no template for role " + std::string(to_string(role)) +
                            ", variant " + std::string(to_string(variant)));
    return it->second;
}

const PromptTemplate& TemplateStore::resolve(TemplateRole role, PromptVariant variant) const {
    auto it = templates_.find({role, variant});
    if (it != templates_.end()) return it->second;
    return get(role, PromptVariant::Default);
}

bool TemplateStore::has(TemplateRole role, PromptVariant variant) const {
    return templates_.count({role, variant}) > 0;
}

std::vector<std::string> TemplateStore::ids() const {
    std::vector<std::string> out;
    for (const auto& [key, t] : templates_) out.push_back(t.template_id);
    std::sort(out.begin(), out.end());
    return out;
}

// --- renderers ---------------------------------------------------------------

RenderedPrompt render_pairwise(const PromptTemplate& t, const Question& q, int turn,
                               const ModelAnswer& first, const ModelAnswer& second,
                               PromptVariant variant, const std::optional<std::string>& reference,
                               const RenameLabels& labels) {
    if (t.role != TemplateRole::Pairwise && t.role != TemplateRole::PairwiseReference)
        throw InputError("render_pairwise needs a pairwise template, got " + t.template_id);
    check_turn(q, turn);
    check_answer_turn(first, turn);
    check_answer_turn(second, turn);
    if (t.role == TemplateRole::PairwiseReference && !reference)
        throw InputError("template " + t.template_id + " requires a reference answer");

    std::string system_text = t.system_text;
    std::string body = t.body;
    if (variant == PromptVariant::Rename) {
        // Renaming targets the template text only; answer bytes are untouched.
        // Both label conventions are mapped: "Assistant A"/"Assistant B" when a
        // default-labeled template is used under this variant, and the neutral
        // names the dedicated rename template already ships with.
        for (std::string* text : {&system_text, &body}) {
            replace_all(*text, "Assistant A", labels.first);
            replace_all(*text, "Assistant B", labels.second);
            replace_all(*text, "Assistant Gamma", labels.first);
            replace_all(*text, "Assistant Delta", labels.second);
        }
    }

    SlotValues values;
    values["question"] = &q.turns[turn - 1];
    values["answer_a"] = &first.turns[turn - 1];
    values["answer_b"] = &second.turns[turn - 1];
    if (reference) values["reference"] = &*reference;
    values["focus_instruction"] = &kEmpty;
    return finish(t, fill_slots(system_text, values, t.template_id),
                  fill_slots(body, values, t.template_id));
}

RenderedPrompt render_single(const PromptTemplate& t, const Question& q, int turn,
                             const ModelAnswer& answer,
                             const std::optional<std::string>& reference) {
    if (t.role != TemplateRole::Single && t.role != TemplateRole::SingleReference)
        throw InputError("render_single needs a single-answer template, got " + t.template_id);
    check_turn(q, turn);
    check_answer_turn(answer, turn);
    if (t.role == TemplateRole::SingleReference && !reference)
        throw InputError("template " + t.template_id + " requires a reference answer");

    SlotValues values;
    values["question"] = &q.turns[turn - 1];
    values["answer"] = &answer.turns[turn - 1];
    if (reference) values["reference"] = &*reference;
    values["focus_instruction"] = &kEmpty;
    return finish(t, fill_slots(t.system_text, values, t.template_id),
                  fill_slots(t.body, values, t.template_id));
}

std::string build_conversation_text(const Question& q, const std::vector<std::string>& answers,
                                    int upto) {
    if (upto < 1 || size_t(upto) > q.turns.size() || size_t(upto) > answers.size())
        throw InputError("conversation turn bound " + std::to_string(upto) +
                         " out of range for question " + std::to_string(q.question_id));
    std::string out;
    for (int i = 0; i < upto; ++i) {
        if (i) out += "\n\n";
        out += "User:\n" + q.turns[i] + "\n\nAssistant:\n" + answers[i];
    }
    return out;
}

namespace {

std::string build_reference_text(const Question& q, const std::vector<std::string>& references,
                                 int upto) {
    std::string out;
    for (int i = 0; i < upto && size_t(i) < references.size(); ++i) {
        if (i) out += "\n\n";
        out += "User:\n" + q.turns[i] + "\n\nReference answer:\n" + references[i];
    }
    return out;
}

} // namespace

RenderedPrompt render_multiturn_pairwise(const PromptTemplate& t, const Question& q,
                                         const ModelAnswer& first, const ModelAnswer& second,
                                         int upto) {
    if (t.role != TemplateRole::PairwiseMultiturn)
        throw InputError("render_multiturn_pairwise needs a pairwise_multiturn template, got " +
                         t.template_id);
    if (first.turns.size() != q.turns.size() || second.turns.size() != q.turns.size())
        throw InputError("answers do not cover all " + std::to_string(q.turns.size()) +
                         " turns of question " + std::to_string(q.question_id));
    if (upto == 0) upto = int(q.turns.size());

    const std::string conv_a = build_conversation_text(q, first.turns, upto);
    const std::string conv_b = build_conversation_text(q, second.turns, upto);
    const std::string& focus = upto >= 2 ? kPairFocus : kEmpty;

    SlotValues values;
    values["conversation_a"] = &conv_a;
    values["conversation_b"] = &conv_b;
    values["focus_instruction"] = &focus;
    return finish(t, fill_slots(t.system_text, values, t.template_id),
                  fill_slots(t.body, values, t.template_id));
}

RenderedPrompt render_multiturn_single(const PromptTemplate& t, const Question& q,
                                       const ModelAnswer& answer, int upto,
                                       const std::vector<std::string>* references) {
    if (t.role != TemplateRole::SingleMultiturn && t.role != TemplateRole::SingleMultiturnReference)
        throw InputError("render_multiturn_single needs a single_multiturn template, got " +
                         t.template_id);
    if (answer.turns.size() != q.turns.size())
        throw InputError("answer does not cover all " + std::to_string(q.turns.size()) +
                         " turns of question " + std::to_string(q.question_id));
    if (upto == 0) upto = int(q.turns.size());
    if (t.role == TemplateRole::SingleMultiturnReference &&
        (references == nullptr || references->empty()))
        throw InputError("template " + t.template_id + " requires reference answers");

    const std::string conv = build_conversation_text(q, answer.turns, upto);
    std::string ref_text;
    if (references) ref_text = build_reference_text(q, *references, upto);
    const std::string& focus = upto >= 2 ? kSingleFocus : kEmpty;

    SlotValues values;
    values["conversation"] = &conv;
    if (references) values["reference"] = &ref_text;
    values["focus_instruction"] = &focus;
    return finish(t, fill_slots(t.system_text, values, t.template_id),
                  fill_slots(t.body, values, t.template_id));
}

RenderedPrompt render_cot(const PromptTemplate& t, const Question& q, int turn,
                          const ModelAnswer& first, const ModelAnswer& second) {
    if (t.role != TemplateRole::PairwiseCot)
        throw InputError("render_cot needs a pairwise_cot template, got " + t.template_id);
    if (q.category != Category::Math && q.category != Category::Reasoning)
        throw InputError("chain-of-thought judging is only for math/reasoning questions; question " +
                         std::to_string(q.question_id) + " is " +
                         std::string(to_string(q.category)));
    check_turn(q, turn);
    check_answer_turn(first, turn);
    check_answer_turn(second, turn);

    SlotValues values;
    values["question"] = &q.turns[turn - 1];
    values["answer_a"] = &first.turns[turn - 1];
    values["answer_b"] = &second.turns[turn - 1];
    values["focus_instruction"] = &kEmpty;
    return finish(t, fill_slots(t.system_text, values, t.template_id),
                  fill_slots(t.body, values, t.template_id));
}

RenderedPrompt insert_fewshot(const RenderedPrompt& prompt,
                              const std::vector<FewshotExemplar>& exemplars) {
    if (exemplars.empty()) throw InputError("insert_fewshot requires at least one exemplar");

    // Fixed serialization order: A-wins first, then B-wins, then ties
    // (stable within each class).
    std::vector<const FewshotExemplar*> ordered;
    for (Vote v : {Vote::A, Vote::B, Vote::Tie})
        for (const auto& e : exemplars)
            if (e.verdict == v) ordered.push_back(&e);

    std::string out = "Here are example evaluations. Follow the same verdict format.\n\n";
    int n = 0;
    for (const auto* e : ordered) {
        ++n;
        out += "### Example " + std::to_string(n) + "\n";
        out += "[Example Question]\n" + e->question + "\n\n";
        out += "[The Start of Example Assistant A's Answer]\n" + e->answer_a +
               "\n[The End of Example Assistant A's Answer]\n\n";
        out += "[The Start of Example Assistant B's Answer]\n" + e->answer_b +
               "\n[The End of Example Assistant B's Answer]\n\n";
        out += "Correct verdict: ";
        switch (e->verdict) {
            case Vote::A: out += "[[A]]"; break;
            case Vote::B: out += "[[B]]"; break;
            case Vote::Tie: out += "[[C]]"; break;
        }
        out += "\n\n";
    }
    out += "### Your task\n\n" + prompt.user_text;

    RenderedPrompt p;
    p.system_text = prompt.system_text;
    p.user_text = std::move(out);
    p.template_id = prompt.template_id;
    p.slot_digest = sha256_fields({p.template_id, p.system_text, p.user_text});
    return p;
}

size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

size_t estimate_tokens(const RenderedPrompt& prompt) {
    return estimate_tokens(prompt.system_text) + estimate_tokens(prompt.user_text);
}

std::vector<FewshotExemplar> read_fewshot_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open few-shot exemplar file: " + path.string());
    std::vector<FewshotExemplar> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<FewshotExemplar>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": bad exemplar: " + e.what(), lineno);
        }
    }
    return out;
}

} // namespace judgekit
