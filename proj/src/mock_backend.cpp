#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/prompt_markers.hpp"
#include "pedeval/provider.hpp"
#include "pedeval/random.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <regex>

namespace pedeval {

namespace {

constexpr std::size_t kMockDim = 256;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex8(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(8, '0');
    for (int i = 7; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::string judge_reply(std::uint64_t d) {
    static constexpr std::array<std::string_view, 4> tokens = {"0", "1", "2", "NA"};
    return "The response was compared against each band of the rubric.\nRating: " +
           std::string(tokens[d % 4]);
}

std::string triage_reply(std::string_view prompt, std::uint64_t d) {
    static constexpr std::array<std::string_view, 4> others = {"Academic Discussion", "Logistics Question",
                                                               "Logistics Discussion", "Social"};
    std::string_view post = prompt;
    if (auto start = prompt.find(markers::kTriagePost); start != std::string_view::npos) {
        post = prompt.substr(start + markers::kTriagePost.size());
        if (auto end = post.find(markers::kTriageGuidelines); end != std::string_view::npos) {
            post = post.substr(0, end);
        }
    }
    if (post.find('?') != std::string_view::npos) return "Academic Question";
    return std::string(others[d % others.size()]);
}

std::string synth_reply(const std::string& prompt, std::uint64_t d) {
    static const std::regex count_re(R"(exactly (\d+) new)");
    std::smatch m;
    std::size_t n = 3;
    if (std::regex_search(prompt, m, count_re)) n = std::stoul(m[1].str());
    static constexpr std::array<std::string_view, 6> subjects = {
        "the chain rule", "confidence intervals", "photosynthesis", "supply and demand",
        "recursion", "the water cycle"};
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t h = mix_seed(d, i);
        const auto subject = subjects[h % subjects.size()];
        const std::string ref = hex8(h);
        out += std::string(markers::kSynthDelimiter) + "\n";
        out += std::string(markers::kSynthPost) + " I keep getting stuck on " + std::string(subject) +
               ". Could someone explain where my reasoning goes wrong? (note " + ref + ")\n";
        out += std::string(markers::kSynthResponse) + " Hi there! Good question about " + std::string(subject) +
               ". Start from the definition and check each step against it. (note " + ref + ")\n";
    }
    return out;
}

std::string paragraph_reply(std::uint64_t d) {
    static constexpr std::array<std::string_view, 3> greetings = {"Hello!", "Hi everyone,", "Hello there,"};
    static constexpr std::array<std::string_view, 4> bodies = {
        "Thanks for raising this question. Let us start with the key idea and build from there.",
        "Great post. The concept you describe connects to what we covered in lecture this week.",
        "This is a common point of confusion, so it is worth unpacking carefully.",
        "You are on the right track. Consider how the definition applies to your example."};
    static constexpr std::array<std::string_view, 3> closers = {
        "What do you think would change if one assumption were relaxed?",
        "**Try this:** explain the idea in your own words to a classmate.",
        "Feel free to share how your understanding evolves."};
    return std::string(greetings[d % 3]) + " " + std::string(bodies[(d >> 8) % 4]) + "\n\n" +
           std::string(closers[(d >> 16) % 3]);
}

}  // namespace

MockBackend::MockBackend(MockResponder responder) : responder_(std::move(responder)) {}

std::string MockBackend::builtin_response(const GenerationRequest& req) {
    const std::uint64_t d = digest_u64(request_digest(req));
    const std::string& p = req.prompt;
    if (p.find(markers::kJudgeAnswer) != std::string::npos) return judge_reply(d);
    if (p.find(markers::kTriage) != std::string::npos) return triage_reply(p, d);
    if (p.find(markers::kSynthDelimiter) != std::string::npos) return synth_reply(p, d);
    if (p.find(markers::kIntrospection) != std::string::npos) {
        return "Rate each band only on behavior visible in the response text.";
    }
    return paragraph_reply(d);
}

std::string MockBackend::complete(const GenerationRequest& req) {
    if (responder_) {
        if (auto r = responder_(req)) return *r;
    }
    return builtin_response(req);
}

EmbeddingVector MockBackend::embed_text(const std::string& text) {
    EmbeddingVector v;
    v.values.assign(kMockDim, 0.0);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const std::uint64_t h = fnv1a(word);
        v.values[h % kMockDim] += (h >> 63) ? -1.0 : 1.0;
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    double n = v.norm();
    if (n == 0.0) {
        v.values[digest_u64(text) % kMockDim] = 1.0;
        n = 1.0;
    }
    for (double& x : v.values) x /= n;
    return v;
}

std::vector<EmbeddingVector> MockBackend::embed(const std::vector<std::string>& texts, const std::string&) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
}

}  // namespace pedeval
