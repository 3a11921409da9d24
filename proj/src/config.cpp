#include "judgekit/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "judgekit/errors.hpp"

namespace judgekit {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view unquote(std::string_view s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

int parse_int(std::string_view value, const std::string& key, size_t line) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size() || out < 0)
        throw ParseError("config line " + std::to_string(line) + ": '" + key +
                         "' needs a non-negative integer, got '" + std::string(value) + "'");
    return out;
}

} // namespace

BackendConfig default_backend_config() {
    BackendConfig config;
    if (const char* key = std::getenv("JUDGE_API_KEY")) config.api_key = key;
    return config;
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    BackendConfig config = default_backend_config();
    std::string raw;
    size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("config line " + std::to_string(line_no) +
                             ": expected 'key = value', got '" + std::string(line) + "'");
        const std::string key{trim(line.substr(0, eq))};
        const std::string_view value = unquote(trim(line.substr(eq + 1)));
        if (key == "base_url")
            config.base_url = std::string(value);
        else if (key == "api_key")
            config.api_key = std::string(value);
        else if (key == "parallelism")
            config.parallelism = parse_int(value, key, line_no);
        else if (key == "retry_max")
            config.retry_max = parse_int(value, key, line_no);
        else if (key == "backoff_base_ms")
            config.backoff_base_ms = parse_int(value, key, line_no);
        else if (key == "timeout_s")
            config.timeout_s = parse_int(value, key, line_no);
        else
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                             "'");
    }
    return config;
}

} // namespace judgekit
