#pragma once

// Thin JSON-over-HTTP POST used by the remote translation and embedding
// backends. Plain http:// only.

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "polydedup/error.hpp"

namespace polydedup::http {

struct Endpoint {
    std::string scheme_host_port;  // "http://host:port"
    std::string path;              // "/v1/translate"
};

inline Endpoint parse_endpoint(std::string_view url) {
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme)
        throw ConfigError("endpoint must start with http:// : '" + std::string(url) + "'");
    auto rest = url.substr(scheme.size());
    auto slash = rest.find('/');
    auto host = rest.substr(0, slash);
    if (host.empty() || host.find_first_of(" \t") != std::string_view::npos)
        throw ConfigError("endpoint has no host: '" + std::string(url) + "'");
    Endpoint ep;
    ep.scheme_host_port = std::string(scheme) + std::string(host);
    ep.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    return ep;
}

struct PostOptions {
    std::chrono::milliseconds connect_timeout{2000};
    std::chrono::milliseconds read_timeout{30000};
    std::optional<std::string> bearer_token;
};

// POSTs `body` and returns the parsed JSON reply. Transport failures and 5xx
// map to BackendUnavailable, 429 to RateLimited (with Retry-After seconds).
inline nlohmann::json post_json(const Endpoint& ep, const nlohmann::json& body,
                                const PostOptions& options = {}) {
    httplib::Client client(ep.scheme_host_port);
    client.set_connection_timeout(options.connect_timeout);
    client.set_read_timeout(options.read_timeout);
    httplib::Headers headers;
    if (options.bearer_token) headers.emplace("Authorization", "Bearer " + *options.bearer_token);
    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res)
        throw BackendUnavailable(ep.scheme_host_port + ep.path + ": " + httplib::to_string(res.error()));
    if (res->status == 429) {
        double retry_after = 1.0;
        if (res->has_header("Retry-After")) {
            try {
                retry_after = std::stod(res->get_header_value("Retry-After"));
            } catch (const std::exception&) {
            }
        }
        throw RateLimited(ep.path, retry_after);
    }
    if (res->status < 200 || res->status >= 300)
        throw BackendUnavailable(ep.path + " returned HTTP " + std::to_string(res->status));
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw BackendUnavailable(ep.path + " returned invalid JSON: " + e.what());
    }
}

}  // namespace polydedup::http
