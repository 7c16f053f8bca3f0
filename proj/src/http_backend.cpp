#include "pedeval/error.hpp"
#include "pedeval/provider.hpp"

#include <httplib.h>

#include <cstdlib>

namespace pedeval {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
    const auto scheme = base_url.find("://");
    if (scheme == std::string::npos) throw ValidationError("base url lacks a scheme: " + base_url);
    const auto path = base_url.find('/', scheme + 3);
    origin_ = base_url.substr(0, path);
    prefix_ = path == std::string::npos ? "" : base_url.substr(path);
}

bool HttpBackend::credentials_available() {
    return !env_or("PEDEVAL_API_KEY", env_or("OPENAI_API_KEY", "")).empty();
}

std::unique_ptr<HttpBackend> HttpBackend::from_env() {
    const std::string key = env_or("PEDEVAL_API_KEY", env_or("OPENAI_API_KEY", ""));
    if (key.empty()) throw ValidationError("live provider needs PEDEVAL_API_KEY or OPENAI_API_KEY");
    return std::make_unique<HttpBackend>(env_or("PEDEVAL_BASE_URL", "https://api.openai.com/v1"), key);
}

nlohmann::json HttpBackend::post(const std::string& path, const nlohmann::json& body) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    client.set_bearer_token_auth(api_key_);
    auto res = client.Post(prefix_ + path, body.dump(), "application/json");
    if (!res) throw TransportError("POST " + path + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("POST " + path + ": HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw Error("POST " + path + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw Error("POST " + path + ": malformed JSON body: " + e.what());
    }
}

std::string HttpBackend::complete(const GenerationRequest& req) {
    nlohmann::json body;
    body["model"] = req.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    const auto j = post("/chat/completions", body);
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("chat completion response lacks content: ") + e.what());
    }
}

std::vector<EmbeddingVector> HttpBackend::embed(const std::vector<std::string>& texts, const std::string& model) {
    nlohmann::json body;
    body["model"] = model;
    body["input"] = texts;
    const auto j = post("/embeddings", body);
    std::vector<EmbeddingVector> out(texts.size());
    try {
        for (const auto& item : j.at("data")) {
            const auto idx = item.at("index").get<std::size_t>();
            if (idx >= out.size()) throw Error("embedding index out of range");
            out[idx].values = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("embedding response malformed: ") + e.what());
    }
    return out;
}

}  // namespace pedeval
