#pragma once

#include <stdexcept>
#include <string>

namespace emcee {

// Bad user input: malformed config, missing files, invalid method params.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed data file (bad JSONL line, invariant violation on load).
class DataError : public std::runtime_error {
public:
    DataError(const std::string& msg, int line = 0) : std::runtime_error(msg), line_number(line) {}
    int line_number;
};

enum class ConditionClass { timeout, rate_limited, server_error, other };

const char* to_string(ConditionClass c);

// Transport-level failure after retries were exhausted (or a non-retryable one).
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& msg, ConditionClass c)
        : std::runtime_error(msg), condition(c) {}
    ConditionClass condition;
};

// Provider answered but the payload does not follow the chat schema.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace emcee
