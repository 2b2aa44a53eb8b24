#include "distill/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include "distill/dataset_io.hpp"
#include "distill/log.hpp"

namespace distill {

using nlohmann::json;

json to_json(const DecodeParams& params) {
    return {{"temperature", params.temperature}, {"max_tokens", params.max_tokens}, {"stop", params.stop}};
}

DecodeParams decode_params_from_json(const json& j) {
    DecodeParams p;
    p.temperature = j.at("temperature").get<double>();
    p.max_tokens = j.at("max_tokens").get<int>();
    p.stop = j.at("stop").get<std::vector<std::string>>();
    return p;
}

json to_json(const CompletionRecord& r) {
    return {{"prompt_hash", r.prompt_hash}, {"prompt", r.prompt},         {"completion", r.completion},
            {"params", to_json(r.params)},  {"backend_id", r.backend_id}, {"timestamp", r.timestamp},
            {"truncated", r.truncated}};
}

CompletionRecord completion_record_from_json(const json& j) {
    CompletionRecord r;
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.prompt = j.value("prompt", "");
    r.completion = j.at("completion").get<std::string>();
    if (j.contains("params")) r.params = decode_params_from_json(j.at("params"));
    r.backend_id = j.value("backend_id", "");
    r.timestamp = j.value("timestamp", "");
    r.truncated = j.value("truncated", false);
    return r;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(errc::io_error, "sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string prompt_hash(std::string_view prompt, const DecodeParams& params, std::string_view backend_id) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    const json key = {{"backend", backend_id},
                      {"max_tokens", params.max_tokens},
                      {"prompt", prompt},
                      {"stop", params.stop},
                      {"temperature", params.temperature}};
    return sha256_hex(key.dump());
}

std::filesystem::path record_path(const std::filesystem::path& root, const std::string& hash) {
    return root / hash.substr(0, 2) / (hash + ".json");
}

std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stop) {
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) continue;
        cut = std::min(cut, text.find(s));
    }
    return std::string(text.substr(0, cut));
}

namespace {

Error transient(const char* code, const std::string& message, json details = json::object()) {
    details["retryable"] = true;
    return Error(code, message, std::move(details));
}

bool is_retryable(const Error& e) { return e.details().value("retryable", false); }

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(errc::gateway_config, "HTTP backend needs an endpoint URL");
    if (config_.model.empty()) throw Error(errc::gateway_config, "HTTP backend needs a model name");
    if (config_.api_key.empty()) throw Error(errc::gateway_config, "HTTP backend needs a credential (LLM_API_KEY)");
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error(errc::gateway_config, "endpoint must be an absolute URL: " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    base_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

json HttpBackend::request_body(const std::string& model, const std::string& prompt, const DecodeParams& params) {
    json body = {{"model", model}, {"prompt", prompt}, {"temperature", params.temperature}, {"max_tokens", params.max_tokens}};
    if (!params.stop.empty()) body["stop"] = params.stop;
    return body;
}

RawCompletion HttpBackend::complete(const std::string& prompt, const DecodeParams& params, const std::string&) {
    httplib::Client client(base_);
    const auto secs = static_cast<time_t>(config_.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    const httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};
    auto res = client.Post(path_, headers, request_body(config_.model, prompt, params).dump(), "application/json");
    if (!res) {
        throw transient(errc::network_error, "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) throw transient(errc::rate_limited, "endpoint returned 429", {{"status", 429}});
    if (res->status >= 500) {
        throw transient(errc::network_error, "endpoint returned " + std::to_string(res->status), {{"status", res->status}});
    }
    if (res->status != 200) {
        throw Error(errc::network_error, "endpoint returned " + std::to_string(res->status) + ": " + res->body,
                    {{"status", res->status}, {"retryable", false}});
    }
    try {
        const auto j = json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        RawCompletion out;
        out.text = choice.at("text").get<std::string>();
        out.truncated = choice.contains("finish_reason") && choice.at("finish_reason") == "length";
        return out;
    } catch (const std::exception& e) {
        throw Error(errc::network_error, std::string("malformed completion response: ") + e.what(), {{"retryable", false}});
    }
}

ReplayBackend::ReplayBackend(std::filesystem::path root, std::string backend_id)
    : root_(std::move(root)), backend_id_(std::move(backend_id)) {
    if (!std::filesystem::is_directory(root_)) {
        throw Error(errc::gateway_config, "replay directory does not exist: " + root_.string());
    }
}

RawCompletion ReplayBackend::complete(const std::string&, const DecodeParams&, const std::string& hash) {
    reads_.fetch_add(1);
    const auto path = record_path(root_, hash);
    if (!std::filesystem::exists(path)) {
        throw Error(errc::replay_miss, "no replay fixture for " + hash, {{"hash", hash}, {"retryable", false}});
    }
    const auto record = completion_record_from_json(json::parse(read_file(path)));
    return {record.completion, record.truncated};
}

CompletionCache::CompletionCache(std::filesystem::path root) : root_(std::move(root)) {}

std::optional<CompletionRecord> CompletionCache::get(const std::string& hash) const {
    if (root_.empty()) return std::nullopt;
    const auto path = record_path(root_, hash);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
        return completion_record_from_json(json::parse(read_file(path)));
    } catch (const std::exception& e) {
        log::warn("ignoring unreadable cache entry " + path.string() + ": " + e.what());
        return std::nullopt;
    }
}

void CompletionCache::put(const CompletionRecord& record) const {
    if (root_.empty()) return;
    write_file_atomic(record_path(root_, record.prompt_hash), to_json(record).dump(2) + "\n");
}

RateLimiter::RateLimiter(std::size_t max_requests, std::chrono::milliseconds window)
    : max_requests_(max_requests), window_(window) {}

void RateLimiter::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        while (!stamps_.empty() && now - stamps_.front() >= window_) stamps_.pop_front();
        if (stamps_.size() < max_requests_) {
            stamps_.push_back(now);
            return;
        }
        const auto wake = stamps_.front() + window_;
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
}

void BatchResult::throw_if_failed() const {
    if (errors.empty()) return;
    const auto& e = errors.front();
    throw Error(e.code, "item " + std::to_string(e.index) + ": " + e.message, {{"index", e.index}});
}

Gateway::Gateway(GatewayConfig config, std::unique_ptr<Backend> backend)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      cache_(config_.cache_dir),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
    if (!backend_) throw Error(errc::gateway_config, "gateway needs a backend");
    if (config_.rate_limit_requests > 0) limiter_.emplace(config_.rate_limit_requests, config_.rate_limit_window);
    if (config_.retry.max_attempts < 1) throw Error(errc::gateway_config, "retry policy needs at least one attempt");
}

RawCompletion Gateway::call_with_retry(const std::string& prompt, const DecodeParams& params, const std::string& hash) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    auto delay = config_.retry.initial_delay;
    for (int attempt = 1;; ++attempt) {
        try {
            if (limiter_) limiter_->acquire();
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            backend_calls_.fetch_add(1);
            return backend_->complete(prompt, params, hash);
        } catch (const Error& e) {
            if (!is_retryable(e) || attempt >= config_.retry.max_attempts) throw;
            std::uniform_real_distribution<double> jitter(0.0, config_.retry.jitter);
            const auto wait = delay + std::chrono::milliseconds(static_cast<long long>(delay.count() * jitter(rng)));
            log::warn(std::string(e.code()) + " on attempt " + std::to_string(attempt) + ", retrying in " +
                      std::to_string(wait.count()) + " ms");
            if (config_.retry.sleep) {
                config_.retry.sleep(wait);
            } else {
                std::this_thread::sleep_for(wait);
            }
            delay = std::chrono::milliseconds(static_cast<long long>(std::llround(delay.count() * config_.retry.multiplier)));
        }
    }
}

DecodeParams Gateway::effective_params(const Prompt& prompt, const DecodeParams& params) {
    auto effective = params;
    if (!prompt.stop_sequence.empty() &&
        std::find(effective.stop.begin(), effective.stop.end(), prompt.stop_sequence) == effective.stop.end()) {
        effective.stop.push_back(prompt.stop_sequence);
    }
    return effective;
}

std::string Gateway::key_for(const Prompt& prompt, const DecodeParams& params) const {
    return prompt_hash(prompt.text, effective_params(prompt, params), backend_->id());
}

CompletionResult Gateway::complete(const Prompt& prompt, const DecodeParams& params) {
    if (params.temperature < 0) throw Error(errc::invalid_argument, "temperature must be >= 0");
    const auto effective = effective_params(prompt, params);
    const auto hash = prompt_hash(prompt.text, effective, backend_->id());
    if (auto hit = cache_.get(hash)) {
        cache_hits_.fetch_add(1);
        return {hit->completion, hit->truncated, true};
    }
    const auto raw = call_with_retry(prompt.text, effective, hash);
    CompletionRecord record;
    record.prompt_hash = hash;
    record.prompt = prompt.text;
    record.completion = truncate_at_stop(raw.text, effective.stop);
    record.params = effective;
    record.backend_id = backend_->id();
    record.timestamp = utc_timestamp();
    record.truncated = raw.truncated;
    if (record.truncated) log::debug("completion for " + prompt.instance_id + " hit max_tokens");
    cache_.put(record);
    return {record.completion, record.truncated, false};
}

BatchResult Gateway::batch_complete(const std::vector<Prompt>& prompts, const DecodeParams& params, std::size_t parallelism) {
    if (parallelism < 1) throw Error(errc::invalid_argument, "parallelism must be >= 1");
    BatchResult out;
    out.results.resize(prompts.size());
    std::mutex errors_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < prompts.size(); i = next.fetch_add(1)) {
            try {
                out.results[i] = complete(prompts[i], params);
            } catch (const Error& e) {
                std::lock_guard lock(errors_mutex);
                out.errors.push_back({i, e.code(), e.what()});
            } catch (const std::exception& e) {
                std::lock_guard lock(errors_mutex);
                out.errors.push_back({i, errc::network_error, e.what()});
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::min(parallelism, std::max<std::size_t>(1, prompts.size()));
        for (std::size_t t = 0; t + 1 < n; ++t) pool.emplace_back(worker);
        worker();
    }
    std::sort(out.errors.begin(), out.errors.end(), [](const ItemError& a, const ItemError& b) { return a.index < b.index; });
    return out;
}

}  // namespace distill
