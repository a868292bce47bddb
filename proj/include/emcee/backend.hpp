#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emcee/errors.hpp"

namespace emcee {

struct Usage {
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;

    Usage& operator+=(const Usage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
};

struct Message {
    std::string role;  // system | user | assistant
    std::string content;
};

struct LlmRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    std::map<std::string, std::string> extra_params;
};

struct LlmResponse {
    std::string text;
    Usage usage;
    std::string model;
    bool from_cache = false;
    int64_t latency_ms = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_initial_ms = 250;
    double backoff_multiplier = 2.0;
    int backoff_max_ms = 4000;
    std::set<ConditionClass> retryable = {ConditionClass::timeout, ConditionClass::rate_limited,
                                          ConditionClass::server_error};
};

struct MockRule {
    std::string substring;  // literal matcher; checked when non-empty
    std::string pattern;    // regex matcher (regex_search) when substring empty
    std::string response_text;
    Usage usage{100, 20};
};

struct MockScript {
    std::vector<MockRule> rules;
    std::string fallback_prefix = "mock response ";
    Usage fallback_usage{32, 8};

    static MockScript load(const std::filesystem::path& path);
};

// Digest over the canonical request serialization (backend id, model, messages
// in order, temperature at fixed precision, max_tokens, sorted extra params).
std::string cache_key(const LlmRequest& request, const std::string& backend_id);

// First matching rule wins; no rule → deterministic fallback text derived from
// the cache key. Pure function.
LlmResponse mock_complete(const LlmRequest& request, const MockScript& script);

std::pair<int64_t, int64_t> usage_totals(const std::vector<LlmResponse>& responses,
                                         bool include_cached = true);

class Transport {
public:
    virtual ~Transport() = default;
    virtual LlmResponse send(const LlmRequest& request) = 0;
    virtual const std::string& id() const = 0;
};

class MockTransport : public Transport {
public:
    explicit MockTransport(MockScript script);
    LlmResponse send(const LlmRequest& request) override;
    const std::string& id() const override { return id_; }

private:
    MockScript script_;
    std::string id_ = "mock";
};

// OpenAI-compatible chat completions over HTTP. The bearer credential is read
// from the named environment variable at construction.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, std::string credential_env, int timeout_seconds = 120);
    LlmResponse send(const LlmRequest& request) override;
    const std::string& id() const override { return id_; }

private:
    std::string base_url_;
    std::string credential_;
    int timeout_seconds_;
    std::string id_;
};

class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<LlmResponse> load(const std::string& key) const;
    void store(const std::string& key, const LlmRequest& request, const LlmResponse& response);

    struct Stats {
        uint64_t entries = 0;
        uint64_t bytes = 0;
    };
    static Stats stats(const std::filesystem::path& dir);
    static uint64_t clear(const std::filesystem::path& dir);

private:
    std::filesystem::path dir_;
    std::mutex write_mutex_;
};

// Token-bucket limiter; requests_per_minute <= 0 disables it.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute);
    void acquire();

private:
    double rpm_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

// Cache-first completion with retries; safe for concurrent use.
class Backend {
public:
    Backend(std::unique_ptr<Transport> transport, std::optional<std::filesystem::path> cache_dir,
            RetryPolicy retry = {}, double requests_per_minute = 0.0);

    LlmResponse complete(const LlmRequest& request);

    struct Stats {
        int64_t transport_calls = 0;  // every send attempt, retries included
        int64_t cache_hits = 0;
        int64_t retries = 0;
    };
    Stats stats() const;
    const std::string& id() const { return transport_->id(); }

private:
    std::unique_ptr<Transport> transport_;
    std::optional<ResponseCache> cache_;
    RetryPolicy retry_;
    RateLimiter limiter_;
    std::atomic<int64_t> transport_calls_{0};
    std::atomic<int64_t> cache_hits_{0};
    std::atomic<int64_t> retries_{0};
};

}  // namespace emcee
