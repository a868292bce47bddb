#include "emcee/backend.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "emcee/text.hpp"

namespace emcee {

using json = nlohmann::ordered_json;

namespace {

std::string fixed_precision(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

json request_canonical(const LlmRequest& request, const std::string& backend_id) {
    json doc;
    doc["backend"] = backend_id;
    doc["model"] = request.model;
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    doc["messages"] = messages;
    doc["temperature"] = fixed_precision(request.temperature);
    if (request.max_tokens) {
        doc["max_tokens"] = *request.max_tokens;
    } else {
        doc["max_tokens"] = nullptr;
    }
    json extras = json::object();
    for (const auto& [k, v] : request.extra_params) extras[k] = v;
    doc["extra_params"] = extras;
    return doc;
}

}  // namespace

std::string cache_key(const LlmRequest& request, const std::string& backend_id) {
    return text::sha256_hex(request_canonical(request, backend_id).dump());
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("invalid mock script " + path.string() + ": " + e.what());
    }
    MockScript script;
    if (doc.contains("fallback_prefix")) script.fallback_prefix = doc["fallback_prefix"];
    if (doc.contains("fallback_usage")) {
        script.fallback_usage.prompt_tokens = doc["fallback_usage"].value("prompt_tokens", 32);
        script.fallback_usage.completion_tokens =
            doc["fallback_usage"].value("completion_tokens", 8);
    }
    for (const auto& rule_doc : doc.value("rules", json::array())) {
        MockRule rule;
        rule.substring = rule_doc.value("match", "");
        rule.pattern = rule_doc.value("pattern", "");
        if (rule.substring.empty() && rule.pattern.empty()) {
            throw ConfigError("mock rule needs a 'match' substring or a 'pattern'");
        }
        rule.response_text = rule_doc.value("response", "");
        rule.usage.prompt_tokens = rule_doc.value("prompt_tokens", 100);
        rule.usage.completion_tokens = rule_doc.value("completion_tokens", 20);
        script.rules.push_back(std::move(rule));
    }
    return script;
}

LlmResponse mock_complete(const LlmRequest& request, const MockScript& script) {
    std::string haystack;
    for (const auto& m : request.messages) {
        haystack += m.content;
        haystack += '\n';
    }
    LlmResponse response;
    response.model = request.model;
    for (const auto& rule : script.rules) {
        bool matched = false;
        if (!rule.substring.empty()) {
            matched = haystack.find(rule.substring) != std::string::npos;
        } else {
            matched = std::regex_search(haystack, std::regex(rule.pattern));
        }
        if (matched) {
            response.text = rule.response_text;
            response.usage = rule.usage;
            return response;
        }
    }
    response.text = script.fallback_prefix + cache_key(request, "mock").substr(0, 12);
    response.usage = script.fallback_usage;
    return response;
}

std::pair<int64_t, int64_t> usage_totals(const std::vector<LlmResponse>& responses,
                                         bool include_cached) {
    int64_t in = 0, out = 0;
    for (const auto& r : responses) {
        if (!include_cached && r.from_cache) continue;
        in += r.usage.prompt_tokens;
        out += r.usage.completion_tokens;
    }
    return {in, out};
}

MockTransport::MockTransport(MockScript script) : script_(std::move(script)) {}

LlmResponse MockTransport::send(const LlmRequest& request) {
    return mock_complete(request, script_);
}

HttpTransport::HttpTransport(std::string base_url, std::string credential_env, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
    if (base_url_.empty()) throw ConfigError("backend.base_url must be set for the http backend");
    if (credential_env.empty()) {
        throw ConfigError("backend.credential_env must name the environment variable holding the API credential");
    }
    const char* value = std::getenv(credential_env.c_str());
    if (value == nullptr || *value == '\0') {
        throw ConfigError("environment variable " + credential_env + " is not set");
    }
    credential_ = value;
    id_ = "http:" + base_url_;
}

LlmResponse HttpTransport::send(const LlmRequest& request) {
    json body;
    body["model"] = request.model;
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    body["messages"] = messages;
    body["temperature"] = request.temperature;
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
    for (const auto& [k, v] : request.extra_params) body[k] = v;

    // Split scheme://host[:port] from any path prefix.
    std::string root = base_url_;
    std::string path_prefix;
    size_t scheme = root.find("://");
    size_t slash = scheme == std::string::npos ? root.find('/') : root.find('/', scheme + 3);
    if (slash != std::string::npos) {
        path_prefix = root.substr(slash);
        root = root.substr(0, slash);
    }

    httplib::Client client(root);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_bearer_token_auth(credential_);

    auto started = std::chrono::steady_clock::now();
    httplib::Result result = client.Post(path_prefix + "/chat/completions", body.dump(),
                                         "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();

    if (!result) {
        throw TransportError("connection failed: " + httplib::to_string(result.error()),
                             ConditionClass::timeout);
    }
    if (result->status == 429) {
        throw TransportError("rate limited (HTTP 429)", ConditionClass::rate_limited);
    }
    if (result->status >= 500) {
        throw TransportError("server error (HTTP " + std::to_string(result->status) + ")",
                             ConditionClass::server_error);
    }
    if (result->status < 200 || result->status >= 300) {
        throw TransportError("HTTP " + std::to_string(result->status) + ": " + result->body,
                             ConditionClass::other);
    }

    json doc;
    try {
        doc = json::parse(result->body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("response is not valid JSON: ") + e.what());
    }
    LlmResponse response;
    try {
        response.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (doc.contains("usage")) {
            response.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
            response.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
        }
        response.model = doc.value("model", request.model);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("response missing chat fields: ") + e.what());
    }
    response.latency_ms = elapsed;
    return response;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<LlmResponse> ResponseCache::load(const std::string& key) const {
    std::filesystem::path file = dir_ / key.substr(0, 2) / (key + ".json");
    std::ifstream in(file);
    if (!in) return std::nullopt;
    json doc;
    try {
        in >> doc;
    } catch (const json::exception&) {
        return std::nullopt;  // corrupt entry: treat as a miss, it will be rewritten
    }
    if (!doc.contains("response")) return std::nullopt;
    const json& r = doc["response"];
    LlmResponse response;
    response.text = r.value("text", "");
    response.model = r.value("model", "");
    if (r.contains("usage")) {
        response.usage.prompt_tokens = r["usage"].value("prompt_tokens", 0);
        response.usage.completion_tokens = r["usage"].value("completion_tokens", 0);
    }
    response.from_cache = true;
    return response;
}

void ResponseCache::store(const std::string& key, const LlmRequest& request,
                          const LlmResponse& response) {
    std::filesystem::path shard = dir_ / key.substr(0, 2);
    std::filesystem::path file = shard / (key + ".json");

    json doc;
    doc["request"] = request_canonical(request, "");
    doc["request"].erase("backend");
    doc["response"] = {{"text", response.text},
                       {"model", response.model},
                       {"usage",
                        {{"prompt_tokens", response.usage.prompt_tokens},
                         {"completion_tokens", response.usage.completion_tokens}}}};
    auto now = std::chrono::system_clock::now();
    doc["stored_at_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();

    std::lock_guard<std::mutex> lock(write_mutex_);
    std::filesystem::create_directories(shard);
    std::filesystem::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, file);
}

ResponseCache::Stats ResponseCache::stats(const std::filesystem::path& dir) {
    Stats stats;
    if (!std::filesystem::exists(dir)) {
        throw ConfigError("cache directory does not exist: " + dir.string());
    }
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            ++stats.entries;
            stats.bytes += entry.file_size();
        }
    }
    return stats;
}

uint64_t ResponseCache::clear(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) {
        throw ConfigError("cache directory does not exist: " + dir.string());
    }
    uint64_t removed = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") ++removed;
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::filesystem::remove_all(entry.path());
    }
    return removed;
}

RateLimiter::RateLimiter(double requests_per_minute)
    : rpm_(requests_per_minute), tokens_(requests_per_minute),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rpm_ <= 0.0) return;
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(rpm_, tokens_ + elapsed * rpm_ / 60.0);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        double wait_s = (1.0 - tokens_) * 60.0 / rpm_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

Backend::Backend(std::unique_ptr<Transport> transport,
                 std::optional<std::filesystem::path> cache_dir, RetryPolicy retry,
                 double requests_per_minute)
    : transport_(std::move(transport)), retry_(retry), limiter_(requests_per_minute) {
    if (cache_dir) cache_.emplace(*cache_dir);
}

LlmResponse Backend::complete(const LlmRequest& request) {
    std::string key = cache_key(request, transport_->id());
    if (cache_) {
        if (auto hit = cache_->load(key)) {
            hit->from_cache = true;
            cache_hits_.fetch_add(1, std::memory_order_relaxed);
            return *hit;
        }
    }

    double backoff_ms = retry_.backoff_initial_ms;
    for (int attempt = 1;; ++attempt) {
        limiter_.acquire();
        transport_calls_.fetch_add(1, std::memory_order_relaxed);
        try {
            LlmResponse response = transport_->send(request);
            if (cache_) cache_->store(key, request, response);
            return response;
        } catch (const TransportError& e) {
            bool retryable = retry_.retryable.count(e.condition) > 0;
            if (!retryable || attempt >= retry_.max_attempts) throw;
            retries_.fetch_add(1, std::memory_order_relaxed);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<int64_t>(backoff_ms)));
            backoff_ms = std::min(backoff_ms * retry_.backoff_multiplier,
                                  static_cast<double>(retry_.backoff_max_ms));
        }
    }
}

Backend::Stats Backend::stats() const {
    Stats s;
    s.transport_calls = transport_calls_.load(std::memory_order_relaxed);
    s.cache_hits = cache_hits_.load(std::memory_order_relaxed);
    s.retries = retries_.load(std::memory_order_relaxed);
    return s;
}

}  // namespace emcee
