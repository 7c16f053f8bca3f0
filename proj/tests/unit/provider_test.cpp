#include "support.hpp"

#include "pedeval/error.hpp"
#include "pedeval/provider.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <thread>

using namespace pedeval;
using namespace pedeval::testing;

namespace {

GenerationRequest request(std::string prompt) {
    GenerationRequest r;
    r.model = "m";
    r.prompt = std::move(prompt);
    return r;
}

/// Fails with TransportError `failures` times, then echoes the prompt.
class FlakyBackend : public Backend {
public:
    explicit FlakyBackend(int failures, bool permanent = false) : failures_(failures), permanent_(permanent) {}
    std::string complete(const GenerationRequest& req) override {
        ++calls;
        if (calls <= failures_) {
            if (permanent_) throw ValidationError("bad request");
            throw TransportError("connection reset");
        }
        return "echo: " + req.prompt;
    }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts, const std::string&) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) out.push_back(MockBackend::embed_text(t));
        return out;
    }
    std::atomic<int> calls{0};

private:
    int failures_;
    bool permanent_;
};

/// Records the highest number of concurrent calls.
class SlowBackend : public Backend {
public:
    std::string complete(const GenerationRequest& req) override {
        const int now = ++in_flight;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight;
        return req.prompt;
    }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>&, const std::string&) override { return {}; }
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
};

ProviderOptions fast_options() {
    ProviderOptions o;
    o.backoff_base = std::chrono::milliseconds(1);
    return o;
}

}  // namespace

TEST(RequestDigest, TagIsNotPartOfTheKey) {
    auto a = request("hello");
    auto b = a;
    b.tag = "relabelled";
    EXPECT_EQ(request_digest(a), request_digest(b));
    b.temperature = 0.5;
    EXPECT_NE(request_digest(a), request_digest(b));
}

TEST(RequestDigest, CanonicalKeysAreSorted) {
    const std::string dumped = canonical_request(request("p")).dump();
    EXPECT_LT(dumped.find("max_tokens"), dumped.find("model"));
    EXPECT_LT(dumped.find("model"), dumped.find("prompt"));
    EXPECT_LT(dumped.find("prompt"), dumped.find("temperature"));
}

TEST(Provider, RetriesTransportErrors) {
    auto backend = std::make_shared<FlakyBackend>(2);
    Provider p(backend, fast_options());
    EXPECT_EQ(p.generate(request("x")), "echo: x");
    EXPECT_EQ(backend->calls, 3);
}

TEST(Provider, GivesUpAfterMaxAttempts) {
    auto backend = std::make_shared<FlakyBackend>(10);
    Provider p(backend, fast_options());
    try {
        p.generate(request("x"));
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(backend->calls, 3);
}

TEST(Provider, PermanentErrorsAreNotRetried) {
    auto backend = std::make_shared<FlakyBackend>(1, true);
    Provider p(backend, fast_options());
    try {
        p.generate(request("x"));
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_EQ(e.attempts(), 1);
    }
    EXPECT_EQ(backend->calls, 1);
}

TEST(Provider, RejectsInvalidRequests) {
    Provider p(std::make_shared<FlakyBackend>(0), fast_options());
    EXPECT_THROW(p.generate(request("")), ValidationError);
    auto r = request("x");
    r.max_tokens = 0;
    EXPECT_THROW(p.generate(r), ValidationError);
}

TEST(Provider, RecordThenReplay) {
    const auto dir = scratch_dir("replay");
    ProviderOptions rec = fast_options();
    rec.cache_dir = dir;
    auto backend = std::make_shared<FlakyBackend>(0);
    Provider recorder(backend, rec);
    const auto text = recorder.generate(request("remember me"));
    const auto vec = recorder.embed(std::vector<std::string>{"some words"});

    ProviderOptions rep = rec;
    rep.mode = ProviderMode::Replay;
    Provider replay(nullptr, rep);
    EXPECT_EQ(replay.generate(request("remember me")), text);
    EXPECT_EQ(replay.embed(std::vector<std::string>{"some words"})[0].values, vec[0].values);
    EXPECT_EQ(replay.cache_hits(), 2u);
    EXPECT_THROW(replay.generate(request("never seen")), NotFoundError);
}

TEST(Provider, CacheHitSkipsBackend) {
    auto backend = std::make_shared<FlakyBackend>(0);
    Provider p(backend, fast_options());
    p.generate(request("x"));
    p.generate(request("x"));
    EXPECT_EQ(backend->calls, 1);
    EXPECT_EQ(p.backend_calls(), 1u);
}

TEST(Provider, TamperedCacheIsCorruption) {
    const auto dir = scratch_dir("tamper");
    ProviderOptions o = fast_options();
    o.cache_dir = dir;
    {
        Provider p(std::make_shared<FlakyBackend>(0), o);
        p.generate(request("x"));
    }
    const auto path = dir / (request_digest(request("x")) + ".json");
    auto rec = nlohmann::json::parse(read_file(path));
    rec["request"]["prompt"] = "y";
    write_text_atomic(path, rec.dump());
    Provider fresh(std::make_shared<FlakyBackend>(0), o);
    EXPECT_THROW(fresh.generate(request("x")), CorruptionError);
}

TEST(Provider, ConcurrencyCapIsRespected) {
    auto backend = std::make_shared<SlowBackend>();
    ProviderOptions o = fast_options();
    o.concurrency_limit = 3;
    Provider p(backend, o);
    std::vector<GenerationRequest> reqs;
    for (int i = 0; i < 24; ++i) reqs.push_back(request("r" + std::to_string(i)));
    const auto out = p.generate_many(reqs);
    for (int i = 0; i < 24; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], "r" + std::to_string(i));
    EXPECT_LE(backend->peak.load(), 3);
}

TEST(Provider, EmptyEmbeddingTextNamesIndex) {
    Provider p(std::make_shared<FlakyBackend>(0), fast_options());
    try {
        p.embed(std::vector<std::string>{"ok", "  "});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
    }
}

TEST(Provider, ReplayNeedsCacheDir) {
    ProviderOptions o;
    o.mode = ProviderMode::Replay;
    EXPECT_THROW(Provider(nullptr, o), ValidationError);
}

TEST(MockBackend, IsPureFunctionOfRequest) {
    auto a = request("Hello there");
    EXPECT_EQ(MockBackend::builtin_response(a), MockBackend::builtin_response(a));
    const auto v = MockBackend::embed_text("Gradient descent converges");
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_EQ(v.dim(), 256u);
    EXPECT_EQ(MockBackend::embed_text("gradient DESCENT, converges").values, v.values);
}

TEST(MockBackend, ResponderOverridesBuiltin) {
    MockBackend m([](const GenerationRequest& r) -> std::optional<std::string> {
        if (r.prompt == "special") return std::string("canned");
        return std::nullopt;
    });
    EXPECT_EQ(m.complete(request("special")), "canned");
    EXPECT_EQ(m.complete(request("other")), MockBackend::builtin_response(request("other")));
}

TEST(Cosine, Basics) {
    const EmbeddingVector a{{1, 0}}, b{{0, 2}}, c{{3, 0}};
    EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
    EXPECT_DOUBLE_EQ(cosine(a, c), 1.0);
    EXPECT_THROW(cosine(a, EmbeddingVector{{1, 0, 0}}), ValidationError);
}
