#include "judgekit/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "judgekit/digest.hpp"
#include "judgekit/errors.hpp"

namespace judgekit {

namespace {

double now_epoch_seconds() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string meta(const CompletionRequest& r, const char* key) {
    auto it = r.metadata.find(key);
    return it == r.metadata.end() ? std::string() : it->second;
}

} // namespace

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

std::optional<ScriptedPolicy> scripted_policy_from_string(std::string_view s) {
    if (s == "first_wins") return ScriptedPolicy::FirstWins;
    if (s == "second_wins") return ScriptedPolicy::SecondWins;
    if (s == "tie") return ScriptedPolicy::Tie;
    if (s == "prefer_longer") return ScriptedPolicy::PreferLonger;
    if (s == "prefer_shorter") return ScriptedPolicy::PreferShorter;
    if (s == "prefer_lex") return ScriptedPolicy::PreferLex;
    if (s == "grade_length") return ScriptedPolicy::GradeLength;
    if (s == "echo_question") return ScriptedPolicy::EchoQuestion;
    return std::nullopt;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptedRule> rules, std::string default_response,
                                 ScriptedPolicy policy)
    : rules_(std::move(rules)), default_response_(std::move(default_response)), policy_(policy) {}

ScriptedBackend ScriptedBackend::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scripted backend file: " + path.string());
    std::vector<ScriptedRule> rules;
    std::string default_response;
    ScriptedPolicy policy = ScriptedPolicy::None;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), lineno);
        }
        if (j.contains("policy")) {
            auto p = scripted_policy_from_string(j["policy"].get<std::string>());
            if (!p)
                throw ParseError(path.string() + ": unknown policy '" +
                                     j["policy"].get<std::string>() + "'",
                                 lineno);
            policy = *p;
        } else if (j.contains("default_response")) {
            default_response = j["default_response"].get<std::string>();
        } else if (j.contains("response")) {
            ScriptedRule rule;
            rule.response = j["response"].get<std::string>();
            const nlohmann::json match = j.value("match", nlohmann::json::object());
            if (match.contains("question_id")) {
                const auto& qid = match["question_id"];
                rule.question_id =
                    qid.is_string() ? qid.get<std::string>() : std::to_string(qid.get<int64_t>());
            }
            if (match.contains("order"))
                rule.order = match["order"].get<std::vector<std::string>>();
            if (match.contains("model")) rule.model = match["model"].get<std::string>();
            if (match.contains("mode")) rule.mode = match["mode"].get<std::string>();
            if (match.contains("variant")) rule.variant = match["variant"].get<std::string>();
            if (match.contains("turn")) rule.turn = match["turn"].get<int>();
            if (match.contains("contains")) rule.contains = match["contains"].get<std::string>();
            rules.push_back(std::move(rule));
        } else {
            throw ParseError(path.string() + ": line is neither a rule nor a control entry",
                             lineno);
        }
    }
    return ScriptedBackend(std::move(rules), std::move(default_response), policy);
}

namespace {

bool rule_matches(const ScriptedRule& rule, const CompletionRequest& r) {
    if (rule.question_id && *rule.question_id != meta(r, "question_id")) return false;
    if (rule.order) {
        if (rule.order->size() != 2) return false;
        if ((*rule.order)[0] != meta(r, "order_first")) return false;
        if ((*rule.order)[1] != meta(r, "order_second")) return false;
    }
    if (rule.model && *rule.model != r.model) return false;
    if (rule.mode && *rule.mode != meta(r, "mode")) return false;
    if (rule.variant && *rule.variant != meta(r, "variant")) return false;
    if (rule.turn && std::to_string(*rule.turn) != meta(r, "turn")) return false;
    if (rule.contains && r.user_text.find(*rule.contains) == std::string::npos) return false;
    return true;
}

std::string pairwise_policy_text(std::string_view token) {
    return "Comparing both responses on helpfulness, relevance and accuracy, my final verdict is: " +
           std::string(token);
}

std::string apply_policy(ScriptedPolicy policy, const CompletionRequest& r) {
    const std::string first = meta(r, "answer_first");
    const std::string second = meta(r, "answer_second");
    switch (policy) {
        case ScriptedPolicy::FirstWins: return pairwise_policy_text("[[A]]");
        case ScriptedPolicy::SecondWins: return pairwise_policy_text("[[B]]");
        case ScriptedPolicy::Tie: return pairwise_policy_text("[[C]]");
        case ScriptedPolicy::PreferLonger:
            if (first.size() == second.size()) return pairwise_policy_text("[[C]]");
            return pairwise_policy_text(first.size() > second.size() ? "[[A]]" : "[[B]]");
        case ScriptedPolicy::PreferShorter:
            if (first.size() == second.size()) return pairwise_policy_text("[[C]]");
            return pairwise_policy_text(first.size() < second.size() ? "[[A]]" : "[[B]]");
        case ScriptedPolicy::PreferLex:
            if (first == second) return pairwise_policy_text("[[C]]");
            return pairwise_policy_text(first < second ? "[[A]]" : "[[B]]");
        case ScriptedPolicy::GradeLength: {
            int score = int(std::min<size_t>(10, 1 + first.size() / 50));
            return "The response addresses the question. Rating: [[" + std::to_string(score) +
                   "]]";
        }
        case ScriptedPolicy::EchoQuestion:
            return "Answer from " + r.model + " (turn " + meta(r, "turn") + "): " + r.user_text;
        case ScriptedPolicy::None: break;
    }
    return "";
}

} // namespace

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
    CompletionResult result;
    result.backend_id = id();
    result.timestamp = 0.0; // fixed: scripted output must be byte-stable
    for (const auto& rule : rules_) {
        if (rule_matches(rule, request)) {
            result.text = rule.response;
            return result;
        }
    }
    if (policy_ != ScriptedPolicy::None) {
        result.text = apply_policy(policy_, request);
        return result;
    }
    if (!default_response_.empty()) {
        result.text = default_response_;
        return result;
    }
    throw InputError("scripted backend has no rule for request (model=" + request.model +
                     ", question_id=" + meta(request, "question_id") +
                     ", mode=" + meta(request, "mode") + ", turn=" + meta(request, "turn") + ")");
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty()) {
        if (const char* env = std::getenv("JUDGE_API_KEY")) config_.api_key = env;
    }
}

nlohmann::json HttpBackend::wire_body(const CompletionRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_text.empty())
        messages.push_back({{"role", "system"}, {"content", request.system_text}});
    for (const auto& [user, assistant] : request.prior_turns) {
        messages.push_back({{"role", "user"}, {"content", user}});
        messages.push_back({{"role", "assistant"}, {"content", assistant}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user_text}});
    return nlohmann::json{{"model", request.model},
                          {"temperature", request.temperature},
                          {"max_tokens", request.max_output_tokens},
                          {"messages", std::move(messages)}};
}

CompletionResult HttpBackend::complete(const CompletionRequest& request) {
    if (config_.api_key.empty())
        throw CredentialError("no API key configured; set JUDGE_API_KEY or config api_key");

    // Split "scheme://host[:port][/prefix]" into client base and path prefix.
    std::string base = config_.base_url;
    std::string prefix;
    size_t scheme = base.find("://");
    if (scheme != std::string::npos) {
        size_t slash = base.find('/', scheme + 3);
        if (slash != std::string::npos) {
            prefix = base.substr(slash);
            base = base.substr(0, slash);
        }
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    const std::string body = wire_body(request).dump();
    const std::string path = prefix + "/chat/completions";
    httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};

    std::string last_error;
    // retry_max counts retries, so the request is attempted retry_max+1 times.
    for (int attempt = 0; attempt <= config_.retry_max; ++attempt) {
        if (attempt > 0) {
            int wait_ms = config_.backoff_base_ms * (1 << (attempt - 1));
            if (sleep_fn)
                sleep_fn(wait_ms);
            else
                std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
        }

        httplib::Client client(base);
        client.set_connection_timeout(config_.timeout_s);
        client.set_read_timeout(config_.timeout_s);

        auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body, "application/json");
        double latency =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();

        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw CredentialError("authentication failed (HTTP " + std::to_string(res->status) +
                                  ") for " + config_.base_url);
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                                 config_.base_url + ": " + res->body);

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed completion response: ") + e.what());
        }
        if (!j.contains("choices") || j["choices"].empty() ||
            !j["choices"][0].contains("message"))
            throw TransportError("completion response has no choices: " + res->body);

        CompletionResult result;
        result.text = j["choices"][0]["message"].value("content", "");
        result.backend_id = id();
        result.latency_ms = latency;
        result.from_cache = false;
        result.timestamp = now_epoch_seconds();
        return result;
    }
    throw TransportError("retries exhausted after " + std::to_string(config_.retry_max + 1) +
                         " attempts (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

CacheKeyInputs cache_inputs_for(const CompletionRequest& request) {
    CacheKeyInputs inputs;
    inputs.model = request.model;
    inputs.mode = meta(request, "mode");
    inputs.variant = meta(request, "variant");
    // Frame every prompt component so (system, user) pairs cannot collide.
    std::string prompt = "S\x1f" + request.system_text;
    for (const auto& [user, assistant] : request.prior_turns)
        prompt += "\x1fU\x1f" + user + "\x1f" + "A\x1f" + assistant;
    prompt += "\x1fT\x1f" + request.user_text;
    inputs.rendered_prompt = std::move(prompt);
    inputs.temperature = request.temperature;
    return inputs;
}

std::string cache_key(const CacheKeyInputs& inputs) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6g", inputs.temperature);
    return sha256_fields(
        {inputs.model, inputs.mode, inputs.variant, inputs.rendered_prompt, temp});
}

std::string cache_key(const CompletionRequest& request) {
    return cache_key(cache_inputs_for(request));
}

namespace {

nlohmann::json digest_inputs_json(const CompletionRequest& request) {
    const CacheKeyInputs inputs = cache_inputs_for(request);
    return nlohmann::json{{"model", inputs.model},
                          {"mode", inputs.mode},
                          {"variant", inputs.variant},
                          {"prompt_sha256", sha256_hex(inputs.rendered_prompt)},
                          {"temperature", inputs.temperature}};
}

} // namespace

CompletionCache::CompletionCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return; // no cache yet: starts empty
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw StorageError("corrupt cache line in " + path_.string() + ": " + e.what(),
                               lineno);
        }
        if (!j.contains("key") || !j.contains("response_text"))
            throw StorageError("cache line missing key/response_text in " + path_.string(),
                               lineno);
        CacheEntry entry;
        entry.key = j["key"].get<std::string>();
        entry.request_digest_inputs = j.value("request_digest_inputs", nlohmann::json::object());
        entry.response_text = j["response_text"].get<std::string>();
        entry.timestamp = j.value("timestamp", 0.0);
        entries_[entry.key] = std::move(entry);
    }
}

std::optional<CacheEntry> CompletionCache::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void CompletionCache::insert(const CacheEntry& entry) {
    std::unique_lock lock(mutex_);
    if (auto parent = path_.parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw StorageError("cannot open cache file for append: " + path_.string());
    nlohmann::json j{{"key", entry.key},
                     {"request_digest_inputs", entry.request_digest_inputs},
                     {"response_text", entry.response_text},
                     {"timestamp", entry.timestamp}};
    out << j.dump() << "\n";
    if (!out) throw StorageError("write failed for cache file: " + path_.string());
    entries_[entry.key] = entry;
}

size_t CompletionCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner,
                               std::shared_ptr<CompletionCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

CompletionResult CachingBackend::complete(const CompletionRequest& request) {
    if (request.temperature != 0.0) {
        ++live_calls_;
        return inner_->complete(request);
    }
    const std::string key = cache_key(request);
    if (auto hit = cache_->lookup(key)) {
        ++cache_hits_;
        CompletionResult result;
        result.text = hit->response_text;
        result.backend_id = inner_->id();
        result.from_cache = true;
        result.timestamp = hit->timestamp;
        return result;
    }
    CompletionResult result = inner_->complete(request);
    ++live_calls_;
    CacheEntry entry;
    entry.key = key;
    entry.request_digest_inputs = digest_inputs_json(request);
    entry.response_text = result.text;
    entry.timestamp = result.timestamp;
    cache_->insert(entry);
    return result;
}

// ---------------------------------------------------------------------------
// Reference generation
// ---------------------------------------------------------------------------

std::string generate_reference(Backend& backend, const Question& question, int turn,
                               const std::string& judge_model,
                               const std::vector<std::string>& prior_references) {
    if (turn < 1 || size_t(turn) > question.turns.size())
        throw InputError("turn " + std::to_string(turn) + " out of range for question " +
                         std::to_string(question.question_id));
    if (prior_references.size() < size_t(turn - 1))
        throw InputError("need " + std::to_string(turn - 1) +
                         " prior reference(s) to generate turn " + std::to_string(turn) +
                         " of question " + std::to_string(question.question_id));

    CompletionRequest request;
    request.system_text =
        "You are a helpful assistant. Answer the user's question completely and accurately.";
    request.user_text = question.turns[turn - 1];
    request.model = judge_model;
    request.temperature = 0.0;
    for (int i = 0; i + 1 < turn; ++i)
        request.prior_turns.emplace_back(question.turns[i], prior_references[i]);
    request.metadata["question_id"] = std::to_string(question.question_id);
    request.metadata["turn"] = std::to_string(turn);
    request.metadata["mode"] = "reference_gen";
    return backend.complete(request).text;
}

int ensure_references(Backend& backend, Question& question, const std::string& judge_model,
                      bool override_existing) {
    std::vector<std::string> refs(question.turns.size());
    if (question.reference)
        for (size_t i = 0; i < refs.size() && i < question.reference->size(); ++i)
            refs[i] = (*question.reference)[i];
    int generated = 0;
    for (size_t i = 0; i < question.turns.size(); ++i) {
        if (!refs[i].empty() && !override_existing) continue;
        refs[i] = generate_reference(backend, question, int(i + 1), judge_model,
                                     {refs.begin(), refs.begin() + long(i)});
        ++generated;
    }
    question.reference = std::move(refs);
    return generated;
}

} // namespace judgekit
