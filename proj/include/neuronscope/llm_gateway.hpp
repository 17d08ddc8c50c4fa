#pragma once

// Client for generative-LLM calls. Three modes:
//   live   - POST to the configured endpoint, retrying transport errors and
//            429/5xx, and store the answer in the cache directory if one is set
//   cache  - serve from the cache directory, falling through to live on a miss
//            when an endpoint is configured
//   replay - serve only from the fixtures directory; never touches a transport
//
// Cache and fixture entries share one layout: <dir>/<sha256>.json holding
// {request, response_text, model_id, timestamp}, where the key is the SHA-256
// of the request's canonical JSON (sorted keys, no whitespace).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/binio.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/hash.hpp"

namespace neuronscope {

struct LlmRequest {
    std::string model_id;
    std::string prompt;
    int max_output_tokens = 64;
    double temperature = 0.0;

    nlohmann::json canonical_json() const {
        return {{"max_output_tokens", max_output_tokens},
                {"model_id", model_id},
                {"prompt", prompt},
                {"temperature", temperature}};
    }

    // nlohmann::json objects keep keys sorted and dump() emits no whitespace.
    std::string canonical() const { return canonical_json().dump(); }

    std::string key() const { return sha256_hex(canonical()); }

    void validate() const {
        if (prompt.empty()) throw UsageError("llm request: prompt is empty");
        if (max_output_tokens < 1) throw UsageError("llm request: max_output_tokens must be >= 1");
        if (!(temperature >= 0.0)) throw UsageError("llm request: temperature must be non-negative");
    }
};

enum class ResponseSource { live, cache, replay };

inline std::string_view to_string(ResponseSource s) {
    switch (s) {
        case ResponseSource::live: return "live";
        case ResponseSource::cache: return "cache";
        case ResponseSource::replay: return "replay";
    }
    return "?";
}

struct LlmResponse {
    std::string text;
    ResponseSource source = ResponseSource::live;
    // Set when the backend explicitly returned an empty answer.
    bool empty = false;
};

class GatewayError : public DataError {
public:
    enum class Kind { replay_miss, cache_miss, http, malformed };

    GatewayError(Kind kind, std::string request_hash, const std::string& msg)
        : DataError(msg), kind_(kind), request_hash_(std::move(request_hash)) {}

    Kind kind() const { return kind_; }
    const std::string& request_hash() const { return request_hash_; }

private:
    Kind kind_;
    std::string request_hash_;
};

// Connection-level failure (refused, reset, timeout). Always retryable.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HttpReply {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    // Must be safe to call concurrently.
    virtual HttpReply post(const std::string& url, const std::string& body,
                           const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

enum class GatewayMode { live, cache, replay };

inline GatewayMode parse_gateway_mode(std::string_view s) {
    if (s == "live") return GatewayMode::live;
    if (s == "cache") return GatewayMode::cache;
    if (s == "replay") return GatewayMode::replay;
    throw UsageError("unknown gateway mode '" + std::string(s) + "' (expected live|cache|replay)");
}

// "simple": {model, prompt, max_tokens, temperature} -> {text[, empty]}
// "chat":   chat-completions style {model, messages, ...} -> choices[0].message.content
enum class ApiStyle { simple, chat };

inline ApiStyle parse_api_style(std::string_view s) {
    if (s == "simple") return ApiStyle::simple;
    if (s == "chat") return ApiStyle::chat;
    throw UsageError("unknown api style '" + std::string(s) + "' (expected simple|chat)");
}

struct GatewayConfig {
    GatewayMode mode = GatewayMode::replay;
    std::string endpoint;
    std::string api_key;
    ApiStyle api_style = ApiStyle::simple;
    std::filesystem::path cache_dir;
    std::filesystem::path fixtures_dir;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};

    // Fills endpoint and api_key from NEURONSCOPE_LLM_ENDPOINT and
    // NEURONSCOPE_LLM_API_KEY when they are not already set.
    GatewayConfig& apply_env() {
        if (endpoint.empty())
            if (const char* v = std::getenv("NEURONSCOPE_LLM_ENDPOINT")) endpoint = v;
        if (api_key.empty())
            if (const char* v = std::getenv("NEURONSCOPE_LLM_API_KEY")) api_key = v;
        return *this;
    }
};

struct BatchResult {
    std::optional<LlmResponse> response;
    std::string error;
    std::string request_hash;

    bool ok() const { return response.has_value(); }
};

namespace detail {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

} // namespace detail

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit Gateway(GatewayConfig config, std::shared_ptr<Transport> transport = nullptr, Sleeper sleeper = {})
        : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
        if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
        if (config_.max_attempts < 1) throw UsageError("gateway: max_attempts must be >= 1");
        if (config_.mode == GatewayMode::replay && config_.fixtures_dir.empty())
            throw UsageError("gateway: replay mode needs a fixtures directory");
        if (config_.mode == GatewayMode::live && config_.endpoint.empty())
            throw UsageError("gateway: live mode needs an endpoint URL (NEURONSCOPE_LLM_ENDPOINT)");
        if (config_.mode == GatewayMode::cache && config_.cache_dir.empty())
            throw UsageError("gateway: cache mode needs a cache directory");
    }

    const GatewayConfig& config() const { return config_; }

    // Number of requests that reached the transport (including retries).
    std::size_t live_calls() const { return live_calls_.load(); }

    LlmResponse request(const LlmRequest& req) const {
        req.validate();
        const auto key = req.key();
        switch (config_.mode) {
            case GatewayMode::replay: {
                if (auto hit = lookup(config_.fixtures_dir, req, key)) {
                    hit->source = ResponseSource::replay;
                    return *hit;
                }
                throw GatewayError(GatewayError::Kind::replay_miss, key, "replay miss for request " + key);
            }
            case GatewayMode::cache: {
                if (auto hit = lookup(config_.cache_dir, req, key)) {
                    hit->source = ResponseSource::cache;
                    return *hit;
                }
                if (config_.endpoint.empty())
                    throw GatewayError(GatewayError::Kind::cache_miss, key,
                                       "cache miss for request " + key + " and no endpoint configured");
                return live(req, key);
            }
            case GatewayMode::live: return live(req, key);
        }
        throw UsageError("gateway: invalid mode");
    }

    // Positionally aligned with reqs. At most max_in_flight requests are
    // outstanding at once; failures are reported per item.
    std::vector<BatchResult> request_batch(std::span<const LlmRequest> reqs, std::size_t max_in_flight) const {
        if (max_in_flight < 1) throw UsageError("gateway: max_in_flight must be >= 1");
        std::vector<BatchResult> out(reqs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < reqs.size(); i = next.fetch_add(1)) {
                auto& slot = out[i];
                try {
                    slot.request_hash = reqs[i].key();
                    slot.response = request(reqs[i]);
                } catch (const std::exception& e) {
                    slot.error = e.what();
                }
            }
        };
        const std::size_t n_threads = std::min(max_in_flight, reqs.size());
        if (n_threads <= 1) {
            worker();
            return out;
        }
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        pool.clear();
        return out;
    }

    std::filesystem::path entry_path(const std::filesystem::path& dir, const std::string& key) const {
        return dir / (key + ".json");
    }

    // Writes an entry in the cache/fixture layout. Used by the live path and by
    // tools that author replay fixtures.
    static void store_entry(const std::filesystem::path& dir, const LlmRequest& req, const LlmResponse& resp,
                            const std::string& timestamp = detail::utc_timestamp()) {
        std::filesystem::create_directories(dir);
        nlohmann::json entry = {{"request", req.canonical_json()},
                                {"response_text", resp.text},
                                {"model_id", req.model_id},
                                {"timestamp", timestamp}};
        if (resp.empty) entry["empty"] = true;
        binio::atomic_write(dir / (req.key() + ".json"), entry.dump(2) + "\n");
    }

private:
    std::optional<LlmResponse> lookup(const std::filesystem::path& dir, const LlmRequest& req,
                                      const std::string& key) const {
        const auto path = entry_path(dir, key);
        std::ifstream in(path);
        if (!in) return std::nullopt;
        nlohmann::json entry;
        try {
            entry = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
            throw GatewayError(GatewayError::Kind::malformed, key, "malformed cache entry " + path.string());
        }
        if (!entry.is_object() || !entry.contains("response_text") || !entry["response_text"].is_string())
            throw GatewayError(GatewayError::Kind::malformed, key, "cache entry lacks response_text: " + path.string());
        if (entry.contains("request") && entry["request"] != req.canonical_json())
            throw GatewayError(GatewayError::Kind::malformed, key, "cache entry request mismatch: " + path.string());
        LlmResponse r;
        r.text = entry["response_text"].get<std::string>();
        r.empty = entry.value("empty", false);
        if (r.text.empty() && !r.empty)
            throw GatewayError(GatewayError::Kind::malformed, key, "empty response without empty flag: " + path.string());
        return r;
    }

    std::string wire_body(const LlmRequest& req) const {
        nlohmann::json body;
        if (config_.api_style == ApiStyle::simple) {
            body = {{"model", req.model_id},
                    {"prompt", req.prompt},
                    {"max_tokens", req.max_output_tokens},
                    {"temperature", req.temperature}};
        } else {
            body = {{"model", req.model_id},
                    {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
                    {"max_tokens", req.max_output_tokens},
                    {"temperature", req.temperature}};
        }
        return body.dump();
    }

    LlmResponse parse_wire(const std::string& body, const std::string& key) const {
        auto malformed = [&](const std::string& why) {
            return GatewayError(GatewayError::Kind::malformed, key, "malformed backend payload: " + why);
        };
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            throw malformed("not JSON");
        }
        LlmResponse r;
        r.source = ResponseSource::live;
        if (config_.api_style == ApiStyle::simple) {
            if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) throw malformed("missing string \"text\"");
            r.text = j["text"].get<std::string>();
            r.empty = j.value("empty", false);
            if (r.text.empty() && !r.empty) throw malformed("empty text without \"empty\": true");
        } else {
            try {
                r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception&) {
                throw malformed("missing choices[0].message.content");
            }
            r.empty = r.text.empty();
        }
        return r;
    }

    LlmResponse live(const LlmRequest& req, const std::string& key) const {
        if (!transport_) throw UsageError("gateway: no transport available for live requests");
        std::vector<std::pair<std::string, std::string>> headers;
        if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
        const auto body = wire_body(req);
        std::string last_error;
        auto backoff = config_.initial_backoff;
        for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
            if (attempt > 1) {
                sleeper_(backoff);
                backoff *= 2;
            }
            HttpReply reply;
            try {
                ++live_calls_;
                reply = transport_->post(config_.endpoint, body, headers);
            } catch (const TransportError& e) {
                last_error = std::string("transport error: ") + e.what();
                continue;
            }
            if (reply.status >= 200 && reply.status < 300) {
                auto resp = parse_wire(reply.body, key);
                if (!config_.cache_dir.empty()) store_entry(config_.cache_dir, req, resp);
                return resp;
            }
            last_error = "HTTP status " + std::to_string(reply.status);
            if (!detail::retryable_status(reply.status)) break;
        }
        throw GatewayError(GatewayError::Kind::http, key, "request " + key + " failed: " + last_error);
    }

    GatewayConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    mutable std::atomic<std::size_t> live_calls_{0};
};

} // namespace neuronscope
