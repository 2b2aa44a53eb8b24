#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/error.hpp"
#include "distill/prompt.hpp"

namespace distill {

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 256;
    std::vector<std::string> stop{std::string(default_stop_sequence)};

    bool operator==(const DecodeParams&) const = default;
};

nlohmann::json to_json(const DecodeParams& params);
DecodeParams decode_params_from_json(const nlohmann::json& j);

struct CompletionRecord {
    std::string prompt_hash;
    std::string prompt;
    std::string completion;
    DecodeParams params;
    std::string backend_id;
    std::string timestamp;
    bool truncated = false;
};

nlohmann::json to_json(const CompletionRecord& record);
CompletionRecord completion_record_from_json(const nlohmann::json& j);

std::string sha256_hex(std::string_view data);

// SHA-256 over canonical JSON of (prompt, params, backend_id).
std::string prompt_hash(std::string_view prompt, const DecodeParams& params, std::string_view backend_id);

// <root>/<first two hex chars>/<hash>.json
std::filesystem::path record_path(const std::filesystem::path& root, const std::string& hash);

// Cuts `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stop);

struct RawCompletion {
    std::string text;
    bool truncated = false;  // ran out of max_tokens before a stop sequence
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    // Throws Error; details["retryable"] = true marks transient failures.
    virtual RawCompletion complete(const std::string& prompt, const DecodeParams& params, const std::string& hash) = 0;
};

struct HttpBackendConfig {
    std::string endpoint;  // full URL, e.g. https://api.openai.com/v1/completions
    std::string model;
    std::string api_key;   // normally from LLM_API_KEY
    std::chrono::seconds timeout{60};
};

// OpenAI-compatible /completions client.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string id() const override { return config_.model; }
    RawCompletion complete(const std::string& prompt, const DecodeParams& params, const std::string& hash) override;

    static nlohmann::json request_body(const std::string& model, const std::string& prompt, const DecodeParams& params);

private:
    HttpBackendConfig config_;
    std::string base_;
    std::string path_;
};

// Serves completions from a directory laid out like the cache; unknown hashes raise ReplayMiss.
class ReplayBackend final : public Backend {
public:
    ReplayBackend(std::filesystem::path root, std::string backend_id);
    std::string id() const override { return backend_id_; }
    RawCompletion complete(const std::string& prompt, const DecodeParams& params, const std::string& hash) override;

    std::size_t reads() const { return reads_.load(); }

private:
    std::filesystem::path root_;
    std::string backend_id_;
    std::atomic<std::size_t> reads_{0};
};

class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path root);
    std::optional<CompletionRecord> get(const std::string& hash) const;
    void put(const CompletionRecord& record) const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

// Sliding-window budget: at most `max_requests` acquisitions per `window`.
class RateLimiter {
public:
    RateLimiter(std::size_t max_requests, std::chrono::milliseconds window);
    void acquire();

private:
    std::size_t max_requests_;
    std::chrono::milliseconds window_;
    std::mutex mutex_;
    std::deque<std::chrono::steady_clock::time_point> stamps_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_delay{1000};
    double multiplier = 2.0;
    double jitter = 0.25;  // fraction of the current delay added uniformly at random
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

struct GatewayConfig {
    std::filesystem::path cache_dir;
    std::size_t max_in_flight = 8;
    std::size_t rate_limit_requests = 0;  // 0 disables the limiter
    std::chrono::milliseconds rate_limit_window{60000};
    RetryPolicy retry;
};

struct CompletionResult {
    std::string text;
    bool truncated = false;
    bool cached = false;
};

struct ItemError {
    std::size_t index = 0;
    std::string code;
    std::string message;
};

struct BatchResult {
    std::vector<std::optional<CompletionResult>> results;  // aligned with the input prompts
    std::vector<ItemError> errors;                          // ordered by index

    bool ok() const { return errors.empty(); }
    // Rethrows the lowest-index failure, if any.
    void throw_if_failed() const;
};

class Gateway {
public:
    Gateway(GatewayConfig config, std::unique_ptr<Backend> backend);

    CompletionResult complete(const Prompt& prompt, const DecodeParams& params);
    BatchResult batch_complete(const std::vector<Prompt>& prompts, const DecodeParams& params, std::size_t parallelism);

    // Params actually sent for this prompt (its stop sequence merged in) and the resulting cache key.
    static DecodeParams effective_params(const Prompt& prompt, const DecodeParams& params);
    std::string key_for(const Prompt& prompt, const DecodeParams& params) const;

    const Backend& backend() const { return *backend_; }
    std::size_t backend_calls() const { return backend_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    RawCompletion call_with_retry(const std::string& prompt, const DecodeParams& params, const std::string& hash);

    GatewayConfig config_;
    std::unique_ptr<Backend> backend_;
    CompletionCache cache_;
    std::optional<RateLimiter> limiter_;
    std::counting_semaphore<> in_flight_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace distill
