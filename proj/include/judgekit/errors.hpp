#pragma once

#include <stdexcept>
#include <string>

namespace judgekit {

// Base for everything thrown by this library. Catch this to catch them all.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad caller-supplied data: unknown model id, empty vote table, mismatched turns...
struct InputError : Error {
    using Error::Error;
};

// Malformed file content. Carries the 1-based line number when known (0 = n/a).
struct ParseError : Error {
    ParseError(const std::string& what, size_t line = 0) : Error(what), line(line) {}
    size_t line;
};

// Template problems: unknown slot, missing template file, unfilled placeholder.
struct TemplateError : Error {
    using Error::Error;
};

// Network-level failure after retries were exhausted.
struct TransportError : Error {
    using Error::Error;
};

// 401/403 from the API: retrying will not help, fail immediately.
struct CredentialError : Error {
    using Error::Error;
};

// Cache file corruption or I/O failure.
struct StorageError : Error {
    StorageError(const std::string& what, size_t line = 0) : Error(what), line(line) {}
    size_t line;
};

// CLI misuse (unknown flag, missing required argument). Maps to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

} // namespace judgekit
