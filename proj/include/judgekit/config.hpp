#pragma once

#include <filesystem>

#include "judgekit/backend.hpp"

namespace judgekit {

// Backend settings with the API key taken from $JUDGE_API_KEY (if set).
BackendConfig default_backend_config();

// key = value file ('#' comments, optional quotes around values). Recognized
// keys: base_url, api_key, parallelism, retry_max, backoff_base_ms,
// timeout_s. Unknown keys and unparsable numbers are input errors; an unset
// api_key falls back to the environment.
BackendConfig load_backend_config(const std::filesystem::path& path);

} // namespace judgekit
