#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "judgekit/types.hpp"

namespace judgekit {

struct CompletionRequest {
    std::string system_text;
    std::string user_text;
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 2048;
    // Earlier (user, assistant) exchanges sent before user_text. Used when
    // generating turn-2 references with the turn-1 exchange as context.
    std::vector<std::pair<std::string, std::string>> prior_turns;
    // Request annotations: question_id, turn, mode, variant, order_first,
    // order_second, sample_index... Not sent over the wire; scripted backends
    // match on them and the cache key folds the judging-relevant ones in.
    std::map<std::string, std::string> metadata;

    bool operator==(const CompletionRequest&) const = default;
};

struct CompletionResult {
    std::string text;
    std::string backend_id;
    double latency_ms = 0.0;
    bool from_cache = false;
    // Epoch seconds when the text was produced. Served from the cache entry
    // on hits so downstream files stay byte-stable across reruns.
    double timestamp = 0.0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend: deterministic canned responses for offline tests.
// ---------------------------------------------------------------------------

// A rule fires when every present field matches the request. First match wins.
struct ScriptedRule {
    std::optional<std::string> question_id;
    std::optional<std::vector<std::string>> order; // [first, second] model ids
    std::optional<std::string> model;              // request.model
    std::optional<std::string> mode;
    std::optional<std::string> variant;
    std::optional<int> turn;
    std::optional<std::string> contains; // substring of user_text
    std::string response;
};

// Fallback behaviors when no rule matches. Keeps script files short: a policy
// line covers the bulk of games, rules pin the interesting exceptions.
//   first_wins / second_wins / tie     fixed pairwise verdicts
//   prefer_longer / prefer_shorter     compare answer_first/answer_second metadata
//   prefer_lex                         lexicographically smaller answer wins
//   grade_length                       single grading: score from answer length
//   echo_question                      replies with the question text (answer bots)
enum class ScriptedPolicy {
    None,
    FirstWins,
    SecondWins,
    Tie,
    PreferLonger,
    PreferShorter,
    PreferLex,
    GradeLength,
    EchoQuestion,
};

std::optional<ScriptedPolicy> scripted_policy_from_string(std::string_view s);

class ScriptedBackend : public Backend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<ScriptedRule> rules, std::string default_response = "",
                             ScriptedPolicy policy = ScriptedPolicy::None);
    // JSONL: rule objects {match: {...}, response: "..."}, plus control lines
    // {"policy": "..."} and {"default_response": "..."}.
    static ScriptedBackend load_file(const std::filesystem::path& path);

    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return "scripted"; }

private:
    std::vector<ScriptedRule> rules_;
    std::string default_response_;
    ScriptedPolicy policy_ = ScriptedPolicy::None;
};

// ---------------------------------------------------------------------------
// Live HTTP backend (OpenAI-style chat completions)
// ---------------------------------------------------------------------------

struct BackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key; // from env JUDGE_API_KEY when empty
    int parallelism = 4;
    int retry_max = 5;
    int backoff_base_ms = 500;
    int timeout_s = 120;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig config);

    // POST {base_url}/chat/completions. Retries 429/5xx/transport errors with
    // exponential backoff (backoff_base_ms * 2^attempt) up to retry_max;
    // 401/403 raise CredentialError immediately.
    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return "http:" + config_.base_url; }

    // Request body as sent over the wire (exposed for tests).
    static nlohmann::json wire_body(const CompletionRequest& request);

    // Test hook: replaces the sleep between retries.
    std::function<void(int /*ms*/)> sleep_fn;

private:
    BackendConfig config_;
};

// ---------------------------------------------------------------------------
// Response cache
// ---------------------------------------------------------------------------

// The inputs that identify a completion for caching purposes.
struct CacheKeyInputs {
    std::string model;
    std::string mode;
    std::string variant;
    std::string rendered_prompt; // system + prior turns + user, framed
    double temperature = 0.0;
};

CacheKeyInputs cache_inputs_for(const CompletionRequest& request);
std::string cache_key(const CacheKeyInputs& inputs);
std::string cache_key(const CompletionRequest& request);

struct CacheEntry {
    std::string key;
    nlohmann::json request_digest_inputs;
    std::string response_text;
    double timestamp = 0.0;
};

// Append-only JSONL store. Concurrent readers share a lock; writers append
// under an exclusive lock. A corrupt line fails loudly with its line number.
class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path path);

    std::optional<CacheEntry> lookup(const std::string& key) const;
    void insert(const CacheEntry& entry);
    size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, CacheEntry> entries_;
};

// Serves temperature-0 requests from the cache and records misses. Sampled
// (temperature > 0) requests always pass through uncached.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<CompletionCache> cache);

    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return inner_->id(); }

    size_t live_calls() const { return live_calls_; }
    size_t cache_hits() const { return cache_hits_; }

private:
    std::shared_ptr<Backend> inner_;
    std::shared_ptr<CompletionCache> cache_;
    std::atomic<size_t> live_calls_{0};
    std::atomic<size_t> cache_hits_{0};
};

// ---------------------------------------------------------------------------
// Reference generation
// ---------------------------------------------------------------------------

// Asks the backend to answer the bare question (no candidate answers in
// context). Turn 2 includes the turn-1 exchange via prior_turns.
std::string generate_reference(Backend& backend, const Question& question, int turn,
                               const std::string& judge_model,
                               const std::vector<std::string>& prior_references = {});

// Fills question.reference for all turns. Keeps an existing reference unless
// `override_existing`; returns how many turns were (re)generated.
int ensure_references(Backend& backend, Question& question, const std::string& judge_model,
                      bool override_existing = false);

} // namespace judgekit
