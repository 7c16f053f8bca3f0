#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace pedeval {

struct GenerationRequest {
    std::string model;
    std::string prompt;
    double temperature{0.0};
    std::size_t max_tokens{1024};
    std::string tag;  ///< audit label; not part of the digest

    void validate() const;
};

/// Keys sorted, prompt kept byte for byte. The tag is left out so that
/// relabelling a call does not invalidate its cache entry.
nlohmann::json canonical_request(const GenerationRequest& req);
std::string request_digest(const GenerationRequest& req);

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;
    /// Throws ValidationError on empty, non-finite or zero-norm vectors.
    void validate() const;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// A model endpoint. Implementations throw TransportError for failures worth
/// retrying and any other Error for permanent ones.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const GenerationRequest& req) = 0;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                               const std::string& model) = 0;
};

enum class ProviderMode { Mock, Replay, Live };

std::string_view provider_mode_name(ProviderMode m);
ProviderMode provider_mode_from_name(std::string_view name);

struct ProviderOptions {
    ProviderMode mode{ProviderMode::Mock};
    std::optional<std::filesystem::path> cache_dir;
    std::size_t concurrency_limit{4};
    int max_attempts{3};
    std::chrono::milliseconds backoff_base{250};
    std::string embedding_model{"text-embedding-3-small"};
};

/// Shared, thread-safe front end: replay cache, retries and an in-flight cap
/// in front of a Backend.
///
/// Cache records live in `<cache_dir>/<digest>.json` as
/// {digest, request, response, created_at}. Replay mode never touches the
/// backend and treats a miss as NotFoundError.
class Provider {
public:
    Provider(std::shared_ptr<Backend> backend, ProviderOptions opts);

    std::string generate(const GenerationRequest& req);

    /// Results in request order, at most concurrency_limit in flight.
    std::vector<std::string> generate_many(std::span<const GenerationRequest> reqs);

    /// One vector per text. Throws ValidationError naming the index of an
    /// empty text.
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

    const ProviderOptions& options() const { return opts_; }

    std::size_t backend_calls() const { return backend_calls_.load(); }
    std::size_t backend_embedded_texts() const { return backend_embedded_texts_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    std::optional<nlohmann::json> cache_get(const std::string& digest);
    void cache_put(const std::string& digest, const nlohmann::json& request,
                   const nlohmann::json& response);
    template <typename Fn>
    auto with_retries(Fn&& fn, const std::string& what) -> decltype(fn());

    std::shared_ptr<Backend> backend_;
    ProviderOptions opts_;
    std::unique_ptr<std::counting_semaphore<>> slots_;
    std::mutex cache_mu_;
    std::map<std::string, nlohmann::json> memory_cache_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> backend_embedded_texts_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// Canned text for tests: returns a response to override the built-in mock,
/// or nullopt to fall through.
using MockResponder = std::function<std::optional<std::string>(const GenerationRequest&)>;

/// Deterministic offline backend. Output is a pure function of the request.
///
/// Prompt shapes are recognised by fixed markers that the prompt renderers
/// always emit: judge prompts get a reasoning line and `Rating: <token>` with
/// the token chosen by digest mod 4; triage prompts get a category; synth
/// prompts get the requested number of delimited pairs; introspection prompts
/// get one rule; anything else gets a greeting paragraph.
class MockBackend : public Backend {
public:
    explicit MockBackend(MockResponder responder = {});

    std::string complete(const GenerationRequest& req) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model) override;

    static std::string builtin_response(const GenerationRequest& req);
    /// Feature-hashed bag of lowercase words, dimension 256, unit norm.
    static EmbeddingVector embed_text(const std::string& text);

private:
    MockResponder responder_;
};

/// OpenAI-compatible chat completions and embeddings over HTTPS.
/// Credentials come from PEDEVAL_API_KEY or OPENAI_API_KEY; the endpoint
/// from PEDEVAL_BASE_URL (default https://api.openai.com/v1).
class HttpBackend : public Backend {
public:
    HttpBackend(std::string base_url, std::string api_key,
                std::chrono::seconds timeout = std::chrono::seconds(120));
    static std::unique_ptr<HttpBackend> from_env();
    static bool credentials_available();

    std::string complete(const GenerationRequest& req) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model) override;

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);

    std::string origin_;
    std::string prefix_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

/// Provider for a CLI mode: Mock wraps MockBackend, Live wraps HttpBackend,
/// Replay has no backend at all.
std::shared_ptr<Provider> make_provider(ProviderOptions opts, MockResponder responder = {});

}  // namespace pedeval
