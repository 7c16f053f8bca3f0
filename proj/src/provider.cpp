#include "pedeval/provider.hpp"

#include "pedeval/corpus.hpp"
#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/parallel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace pedeval {

void GenerationRequest::validate() const {
    if (prompt.empty()) throw ValidationError("generation request: empty prompt");
    if (model.empty()) throw ValidationError("generation request: empty model");
    if (!(temperature >= 0.0)) throw ValidationError("generation request: temperature must be >= 0");
    if (max_tokens == 0) throw ValidationError("generation request: max_tokens must be positive");
}

nlohmann::json canonical_request(const GenerationRequest& req) {
    // nlohmann::json keeps object keys sorted.
    nlohmann::json j;
    j["max_tokens"] = req.max_tokens;
    j["model"] = req.model;
    j["prompt"] = req.prompt;
    j["temperature"] = req.temperature;
    return j;
}

std::string request_digest(const GenerationRequest& req) { return sha256_hex(canonical_request(req).dump()); }

double EmbeddingVector::norm() const {
    double s = 0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

void EmbeddingVector::validate() const {
    if (values.empty()) throw ValidationError("embedding: zero dimension");
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("embedding: non-finite component");
    }
    if (!(norm() > 0.0)) throw ValidationError("embedding: zero norm");
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw ValidationError("cosine: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0 || nb == 0) throw ValidationError("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string_view provider_mode_name(ProviderMode m) {
    switch (m) {
        case ProviderMode::Mock: return "mock";
        case ProviderMode::Replay: return "replay";
        case ProviderMode::Live: return "live";
    }
    return "mock";
}

ProviderMode provider_mode_from_name(std::string_view name) {
    if (name == "mock") return ProviderMode::Mock;
    if (name == "replay") return ProviderMode::Replay;
    if (name == "live") return ProviderMode::Live;
    throw ValidationError("unknown provider mode '" + std::string(name) + "'");
}

Provider::Provider(std::shared_ptr<Backend> backend, ProviderOptions opts)
    : backend_(std::move(backend)), opts_(std::move(opts)) {
    if (opts_.concurrency_limit == 0) throw ValidationError("provider: concurrency_limit must be >= 1");
    if (opts_.max_attempts < 1) throw ValidationError("provider: max_attempts must be >= 1");
    if (opts_.mode == ProviderMode::Replay && !opts_.cache_dir) {
        throw ValidationError("provider: replay mode needs a cache directory");
    }
    if (opts_.mode != ProviderMode::Replay && !backend_) {
        throw ValidationError("provider: no backend configured");
    }
    slots_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(opts_.concurrency_limit));
}

std::optional<nlohmann::json> Provider::cache_get(const std::string& digest) {
    std::lock_guard lock(cache_mu_);
    if (auto it = memory_cache_.find(digest); it != memory_cache_.end()) return it->second;
    if (!opts_.cache_dir) return std::nullopt;
    const auto path = *opts_.cache_dir / (digest + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json rec;
    try {
        rec = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("cache record " + path.string() + ": " + e.what());
    }
    if (!rec.is_object() || rec.value("digest", "") != digest || !rec.contains("response") ||
        !rec.contains("request") || sha256_hex(rec["request"].dump()) != digest) {
        throw CorruptionError("cache record " + path.string() + " does not match its digest");
    }
    memory_cache_.emplace(digest, rec["response"]);
    return rec["response"];
}

void Provider::cache_put(const std::string& digest, const nlohmann::json& request,
                         const nlohmann::json& response) {
    std::lock_guard lock(cache_mu_);
    memory_cache_.emplace(digest, response);
    if (!opts_.cache_dir) return;
    nlohmann::ordered_json rec;
    rec["digest"] = digest;
    rec["request"] = request;
    rec["response"] = response;
    rec["created_at"] = utc_now_rfc3339();
    write_text_atomic(*opts_.cache_dir / (digest + ".json"), rec.dump(2) + "\n");
}

template <typename Fn>
auto Provider::with_retries(Fn&& fn, const std::string& what) -> decltype(fn()) {
    for (int attempt = 1;; ++attempt) {
        try {
            slots_->acquire();
            struct Release {
                std::counting_semaphore<>* s;
                ~Release() { s->release(); }
            } release{slots_.get()};
            return fn();
        } catch (const TransportError& e) {
            if (attempt >= opts_.max_attempts) {
                throw ProviderError(what + ": failed after " + std::to_string(attempt) +
                                        " attempts: " + e.what(),
                                    attempt);
            }
            std::this_thread::sleep_for(opts_.backoff_base * (1 << (attempt - 1)));
        } catch (const ProviderError&) {
            throw;
        } catch (const std::exception& e) {
            throw ProviderError(what + ": " + e.what(), attempt);
        }
    }
}

std::string Provider::generate(const GenerationRequest& req) {
    req.validate();
    const auto request = canonical_request(req);
    const std::string digest = sha256_hex(request.dump());
    if (auto hit = cache_get(digest)) {
        ++cache_hits_;
        return hit->get<std::string>();
    }
    if (opts_.mode == ProviderMode::Replay) {
        throw NotFoundError("replay cache miss for request " + digest +
                            (req.tag.empty() ? "" : " (" + req.tag + ")"));
    }
    std::string text = with_retries(
        [&] {
            ++backend_calls_;
            return backend_->complete(req);
        },
        "generate " + digest.substr(0, 12));
    cache_put(digest, request, text);
    return text;
}

std::vector<std::string> Provider::generate_many(std::span<const GenerationRequest> reqs) {
    return parallel_map(reqs.size(), opts_.concurrency_limit, [&](std::size_t i) { return generate(reqs[i]); });
}

std::vector<EmbeddingVector> Provider::embed(std::span<const std::string> texts) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].find_first_not_of(" \t\r\n") == std::string::npos) {
            throw ValidationError("embed: empty text at index " + std::to_string(i));
        }
    }
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> digests(texts.size());
    std::vector<nlohmann::json> requests(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        nlohmann::json r;
        r["kind"] = "embed";
        r["model"] = opts_.embedding_model;
        r["text"] = texts[i];
        digests[i] = sha256_hex(r.dump());
        requests[i] = std::move(r);
        if (auto hit = cache_get(digests[i])) {
            ++cache_hits_;
            out[i].values = hit->get<std::vector<double>>();
        } else {
            missing.push_back(i);
        }
    }
    if (missing.empty()) return out;
    if (opts_.mode == ProviderMode::Replay) {
        throw NotFoundError("replay cache miss for embedding of text at index " + std::to_string(missing.front()));
    }
    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (auto i : missing) batch.push_back(texts[i]);
    auto vectors = with_retries(
        [&] {
            backend_embedded_texts_ += batch.size();
            return backend_->embed(batch, opts_.embedding_model);
        },
        "embed");
    if (vectors.size() != batch.size()) {
        throw ProviderError("embed: backend returned " + std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(batch.size()) + " texts",
                            1);
    }
    for (std::size_t k = 0; k < missing.size(); ++k) {
        const auto i = missing[k];
        vectors[k].validate();
        cache_put(digests[i], requests[i], vectors[k].values);
        out[i] = std::move(vectors[k]);
    }
    return out;
}

std::shared_ptr<Provider> make_provider(ProviderOptions opts, MockResponder responder) {
    std::shared_ptr<Backend> backend;
    switch (opts.mode) {
        case ProviderMode::Mock: backend = std::make_shared<MockBackend>(std::move(responder)); break;
        case ProviderMode::Live: backend = HttpBackend::from_env(); break;
        case ProviderMode::Replay: break;
    }
    return std::make_shared<Provider>(std::move(backend), std::move(opts));
}

}  // namespace pedeval
