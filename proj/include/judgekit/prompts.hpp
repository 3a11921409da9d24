#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "judgekit/types.hpp"

namespace judgekit {

// Template roles. One per JudgeMode, plus the reference-guided multi-turn
// single-answer grading role (reference grading of a turn-2 answer shows the
// whole conversation and the per-turn references in one prompt).
enum class TemplateRole {
    Pairwise,
    Single,
    PairwiseReference,
    SingleReference,
    PairwiseMultiturn,
    SingleMultiturn,
    PairwiseCot,
    SingleMultiturnReference,
};

std::string_view to_string(TemplateRole r);
std::optional<TemplateRole> template_role_from_string(std::string_view s);

// The template role used when judging `turn` of a question under `mode`.
// Turn 1 keeps the mode's own role; turn 2 of the conversation-aware modes
// switches to the multi-turn role (single_reference -> the combined
// reference + conversation role).
TemplateRole role_for(JudgeMode mode, int turn);

struct PromptTemplate {
    std::string template_id; // "<role>_<variant>", e.g. "pairwise_default"
    TemplateRole role = TemplateRole::Pairwise;
    PromptVariant variant = PromptVariant::Default;
    std::string system_text;
    std::string body; // user text with {slot} placeholders

    bool operator==(const PromptTemplate&) const = default;
};

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;
    std::string template_id;
    std::string slot_digest; // sha256 over (template_id, system, user)

    bool operator==(const RenderedPrompt&) const = default;
};

// Parses "[system] ... [user] ..." template text (both markers on their own
// lines; a file without markers is all user body). Validates that the body
// has every slot the role requires and no unknown {placeholder} tokens.
PromptTemplate parse_template(const std::string& template_id, const std::string& text);

class TemplateStore {
public:
    // Templates compiled into the library (mirrors data/templates/).
    static const TemplateStore& builtin();
    // One file per (role, variant): <role>_<variant>.txt
    static TemplateStore load_dir(const std::filesystem::path& dir);

    // Exact lookup; throws TemplateError when the combination is not present.
    const PromptTemplate& get(TemplateRole role, PromptVariant variant) const;
    // Exact lookup, falling back to the role's default variant. Variants are
    // a pairwise-comparison ablation; other roles usually ship default only.
    const PromptTemplate& resolve(TemplateRole role, PromptVariant variant) const;
    bool has(TemplateRole role, PromptVariant variant) const;
    std::vector<std::string> ids() const;
    void add(PromptTemplate t);

private:
    std::map<std::pair<TemplateRole, PromptVariant>, PromptTemplate> templates_;
};

// Templates from `dir` plus every builtin combination the directory does not
// override. This is what the --templates CLI flag loads.
TemplateStore overlay_templates(const std::filesystem::path& dir);

// Alternate assistant labels used by the rename variant.
struct RenameLabels {
    std::string first = "Assistant Gamma";
    std::string second = "Assistant Delta";
};

// --- renderers --------------------------------------------------------------
// All renderers are pure: equal inputs give byte-equal outputs and digests.
// Slot values are opaque bytes; they are never re-scanned for placeholders.

RenderedPrompt render_pairwise(const PromptTemplate& t, const Question& q, int turn,
                               const ModelAnswer& first, const ModelAnswer& second,
                               PromptVariant variant = PromptVariant::Default,
                               const std::optional<std::string>& reference = std::nullopt,
                               const RenameLabels& labels = {});

RenderedPrompt render_single(const PromptTemplate& t, const Question& q, int turn,
                             const ModelAnswer& answer,
                             const std::optional<std::string>& reference = std::nullopt);

// Renders full conversations (turns 1..upto; upto=0 means all turns). The
// focus-on-second-question clause is emitted only when >= 2 turns render.
RenderedPrompt render_multiturn_pairwise(const PromptTemplate& t, const Question& q,
                                         const ModelAnswer& first, const ModelAnswer& second,
                                         int upto = 0);

// Single-answer multi-turn grading; reference required iff the template role
// is single_multiturn_reference (rendered as per-turn reference blocks).
RenderedPrompt render_multiturn_single(const PromptTemplate& t, const Question& q,
                                       const ModelAnswer& answer, int upto = 0,
                                       const std::vector<std::string>* references = nullptr);

// Chain-of-thought pairwise: judge solves the question before grading.
// Only valid for math/reasoning questions.
RenderedPrompt render_cot(const PromptTemplate& t, const Question& q, int turn,
                          const ModelAnswer& first, const ModelAnswer& second);

// Prepends worked examples to the user text, fixed order A-wins, B-wins, ties.
RenderedPrompt insert_fewshot(const RenderedPrompt& prompt,
                              const std::vector<FewshotExemplar>& exemplars);

// "User:\n...\n\nAssistant:\n..." blocks for turns [1, upto].
std::string build_conversation_text(const Question& q, const std::vector<std::string>& answers,
                                    int upto);

// Rough token count (bytes/4 heuristic); used only for cost ratio notes.
size_t estimate_tokens(std::string_view text);
size_t estimate_tokens(const RenderedPrompt& prompt);

std::vector<FewshotExemplar> read_fewshot_file(const std::filesystem::path& path);

} // namespace judgekit
