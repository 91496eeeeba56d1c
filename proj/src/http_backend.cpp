#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "edc2rag/backends.hpp"

namespace edc2rag {

namespace {

struct ParsedUrl {
    std::string scheme_host_port;  // e.g. "https://api.example.com:8443"
    std::string path_prefix;       // e.g. "/v1"
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw BackendError("endpoint_url must include a scheme: " + url, 1, false);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    if (path_start == std::string::npos) {
        parsed.scheme_host_port = url;
    } else {
        parsed.scheme_host_port = url.substr(0, path_start);
        parsed.path_prefix = url.substr(path_start);
        while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') {
            parsed.path_prefix.pop_back();
        }
    }
    return parsed;
}

std::string api_key_or_throw(const ProviderConfig& config) {
    if (config.api_key_env_var.empty()) return "";
    const char* key = std::getenv(config.api_key_env_var.c_str());
    if (key == nullptr || *key == '\0') {
        throw BackendError("API key environment variable is not set: " + config.api_key_env_var,
                           1, false);
    }
    return key;
}

bool transient_status(int status) {
    return status == 429 || (status >= 500 && status < 600) || status == 408;
}

nlohmann::json post_json(httplib::Client& client, const std::string& path,
                         const std::string& bearer, const nlohmann::json& body) {
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError("connection failure: " + httplib::to_string(res.error()), 1, true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("provider returned HTTP " + std::to_string(res->status), 1,
                           transient_status(res->status), res->status);
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
        throw BackendError("provider returned malformed JSON", 1, true, res->status);
    }
    return parsed;
}

}  // namespace

struct HttpChatBackend::Impl {
    ProviderConfig config;
    ParsedUrl url;
    httplib::Client client;

    explicit Impl(ProviderConfig cfg)
        : config(std::move(cfg)), url(parse_url(config.endpoint_url)),
          client(url.scheme_host_port) {
        client.set_connection_timeout(15);
        client.set_read_timeout(120);
    }
};

HttpChatBackend::HttpChatBackend(ProviderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpChatBackend::~HttpChatBackend() = default;

ChatResponse HttpChatBackend::do_chat(const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = impl_->config.model_id;
    body["messages"] = nlohmann::json::array();
    if (!request.system.empty()) {
        body["messages"].push_back({{"role", "system"}, {"content", request.system}});
    }
    body["messages"].push_back({{"role", "user"}, {"content", request.user}});
    body["temperature"] = request.temperature;
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;

    const auto started = std::chrono::steady_clock::now();
    const auto parsed = post_json(impl_->client, impl_->url.path_prefix + "/chat/completions",
                                  api_key_or_throw(impl_->config), body);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();

    ChatResponse response;
    try {
        response.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw BackendError("provider response missing choices[0].message.content", 1, true);
    }
    response.model_id = parsed.value("model", impl_->config.model_id);
    response.latency_ms = elapsed;
    if (parsed.contains("usage") && parsed["usage"].contains("prompt_tokens")) {
        response.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0LL);
        response.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0LL);
        response.usage.source = UsageSource::BackendReported;
    } else {
        response.usage.prompt_tokens = approx_token_count(request.system) +
                                       approx_token_count(request.user);
        response.usage.completion_tokens = approx_token_count(response.text);
        response.usage.source = UsageSource::Approximate;
    }
    return response;
}

struct HttpEmbeddingBackend::Impl {
    ProviderConfig config;
    ParsedUrl url;
    httplib::Client client;

    explicit Impl(ProviderConfig cfg)
        : config(std::move(cfg)), url(parse_url(config.endpoint_url)),
          client(url.scheme_host_port) {
        client.set_connection_timeout(15);
        client.set_read_timeout(120);
    }
};

HttpEmbeddingBackend::HttpEmbeddingBackend(ProviderConfig config, std::size_t batch)
    : impl_(std::make_unique<Impl>(std::move(config))), batch_(batch) {}

HttpEmbeddingBackend::~HttpEmbeddingBackend() = default;

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed_batch(
    const std::vector<std::string>& texts) {
    nlohmann::json body;
    body["model"] = impl_->config.model_id;
    body["input"] = texts;

    const auto parsed = post_json(impl_->client, impl_->url.path_prefix + "/embeddings",
                                  api_key_or_throw(impl_->config), body);
    std::vector<EmbeddingVector> out;
    try {
        for (const auto& item : parsed.at("data")) {
            out.emplace_back(item.at("embedding").get<std::vector<double>>());
        }
    } catch (const nlohmann::json::exception&) {
        throw BackendError("provider embedding response malformed", 1, true);
    }
    return out;
}

}  // namespace edc2rag
