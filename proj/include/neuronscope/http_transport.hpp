#pragma once

// cpp-httplib backed Transport. Kept out of llm_gateway.hpp so that code
// which only replays fixtures does not pull in the HTTP stack.

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>

#include "neuronscope/error.hpp"
#include "neuronscope/llm_gateway.hpp"

namespace neuronscope {

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(120)) : timeout_(timeout) {}

    HttpReply post(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) override {
        const auto [origin, path] = split_url(url);
        httplib::Client client(origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) throw TransportError(httplib::to_string(res.error()));
        return {res->status, res->body};
    }

    // "http://host:port/v1/generate" -> {"http://host:port", "/v1/generate"}
    static std::pair<std::string, std::string> split_url(const std::string& url) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw UsageError("endpoint URL needs a scheme: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) return {url, "/"};
        return {url.substr(0, path_start), url.substr(path_start)};
    }

private:
    std::chrono::seconds timeout_;
};

} // namespace neuronscope
