#include "pedeval/rubric.hpp"

#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"

#include <cctype>
#include <cstdlib>
#include <vector>

namespace pedeval {

namespace {

struct LevelBands {
    std::string_view name;
    std::string_view strong;
    std::string_view weak;
    std::string_view not_present;
    std::string_view not_applicable;
};

// Band wording of the published rubric. Level 3 "Not Present" uses the
// standardized wording that synthetic-data generation extracts.
constexpr std::array<LevelBands, 5> kBands = {{
    {"Clarify Misunderstandings",
     "Accurately identifies misunderstanding and confusion, provides a clear explanation using "
     "relevant content and examples.",
     "Attempts to address the question or confusion, but the explanation is vague or lacks "
     "instructional clarity.",
     "Fails to recognize or respond to the misunderstanding or question.",
     "No misunderstanding or question is present in the post."},
    {"Disciplinary Understanding",
     "Promotes deeper thinking and engagement with core disciplinary concepts by offering "
     "thought-provoking prompts, elaborations, or meaningful extensions.",
     "Demonstrates intent to deepen disciplinary understanding, but through surface-level, or "
     "generic responses that lack meaningful connection to the post content.",
     "Makes no attempt to extend or deepen disciplinary understanding.",
     "Deepening disciplinary understanding is irrelevant to the post context."},
    {"Higher-Order Thinking",
     "Promotes higher-order thinking through specific, content-grounded prompts or reasoning "
     "tasks that challenge students to analyze, evaluate, or reflect.",
     "Attempts to promote higher-order thinking through general or loosely related prompts, but "
     "lacks depth, specificity, or clear alignment with the content.",
     "No effort is made to promote higher-order thinking.",
     "Higher-order thinking is not applicable given the context of the post."},
    {"Metacognitive Awareness",
     "Supports metacognitive awareness by using reflective prompts or strategies that help "
     "students assess their understanding, monitor their thinking, or make sense of their "
     "learning process in context.",
     "Encourages reflection or self-monitoring, but uses vague or generic language that is not "
     "tied to the student\xE2\x80\x99s content or learning process.",
     "Makes no attempt to promote metacognition or reflection.",
     "Metacognitive engagement is not relevant to the context of the post."},
    {"Collaborative Knowledge Construction",
     "Effectively fosters peer interaction by referencing specific student ideas, connecting "
     "diverse perspectives, or inviting further contributions in a personalized and "
     "contextually relevant manner.",
     "Demonstrates intent to encourage interaction, but relies on general prompts or "
     "surface-level invitations without engaging specific content or peer input.",
     "Makes no attempt to promote peer interaction or build social connection.",
     "Collaborative engagement is not relevant to the context of the student\xE2\x80\x99s post."},
}};

const LevelBands& bands(PedLevel level) {
    return kBands[static_cast<std::size_t>(level_index(level) - 1)];
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

PedLevel level_from_index(int index) {
    if (index < 1 || index > 5) {
        throw ValidationError("pedagogical level must be 1-5, got " + std::to_string(index));
    }
    return static_cast<PedLevel>(index);
}

std::string_view level_name(PedLevel level) { return bands(level).name; }

std::string_view rating_token(Rating r) {
    switch (r) {
        case Rating::Zero: return "0";
        case Rating::One: return "1";
        case Rating::Two: return "2";
        case Rating::NA: return "NA";
    }
    return "NA";
}

std::optional<Rating> rating_from_token(std::string_view token) {
    if (token == "0") return Rating::Zero;
    if (token == "1") return Rating::One;
    if (token == "2") return Rating::Two;
    if (token.size() == 2 && std::tolower(static_cast<unsigned char>(token[0])) == 'n' &&
        std::tolower(static_cast<unsigned char>(token[1])) == 'a') {
        return Rating::NA;
    }
    return std::nullopt;
}

std::optional<int> rating_value(Rating r) {
    switch (r) {
        case Rating::Zero: return 0;
        case Rating::One: return 1;
        case Rating::Two: return 2;
        case Rating::NA: return std::nullopt;
    }
    return std::nullopt;
}

std::string_view band_text(PedLevel level, Rating rating) {
    const auto& b = bands(level);
    switch (rating) {
        case Rating::Two: return b.strong;
        case Rating::One: return b.weak;
        case Rating::Zero: return b.not_present;
        case Rating::NA: return b.not_applicable;
    }
    return b.not_applicable;
}

std::string_view band_heading(Rating rating) {
    switch (rating) {
        case Rating::Two: return "Strong (2)";
        case Rating::One: return "Weak (1)";
        case Rating::Zero: return "Not Present (0)";
        case Rating::NA: return "Not Applicable (NA)";
    }
    return "Not Applicable (NA)";
}

std::string rubric_text(PedLevel level) {
    std::string out = "Level " + std::to_string(level_index(level)) + ": " +
                      std::string(level_name(level)) + "\n";
    for (Rating r : {Rating::Two, Rating::One, Rating::Zero, Rating::NA}) {
        out += "- ";
        out += band_heading(r);
        out += ": ";
        out += band_text(level, r);
        out += "\n";
    }
    return out;
}

const std::string& rubric_digest() {
    static const std::string digest = [] {
        std::string all = "rubric-version:" + std::string(kRubricVersion) + "\n";
        for (PedLevel l : kAllLevels) all += rubric_text(l);
        return sha256_hex(all);
    }();
    return digest;
}

Rating parse_rating(std::string_view raw) {
    const std::string_view text = trim(raw);

    // Bare answer: every word is a rating token.
    std::vector<std::string_view> words;
    for (std::size_t i = 0; i < text.size();) {
        while (i < text.size() && !is_alnum(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && is_alnum(text[j])) ++j;
        if (j > i) words.push_back(text.substr(i, j - i));
        i = j;
    }
    if (!words.empty()) {
        std::optional<Rating> bare;
        bool all_tokens = true;
        bool conflict = false;
        for (auto w : words) {
            auto r = rating_from_token(w);
            if (!r) {
                all_tokens = false;
                break;
            }
            if (bare && *bare != *r) conflict = true;
            bare = r;
        }
        if (all_tokens) {
            if (conflict) {
                throw UnparseableError("conflicting bare rating tokens", std::string(raw));
            }
            return *bare;
        }
    }

    // "rating" followed by up to 8 separator characters and a token.
    const std::string low = lower(text);
    const std::size_t window_start = low.size() > 200 ? low.size() - 200 : 0;
    std::optional<Rating> found;
    for (std::size_t pos = low.find("rating"); pos != std::string::npos;
         pos = low.find("rating", pos + 1)) {
        std::size_t i = pos + 6;
        std::size_t skipped = 0;
        while (i < low.size() && !is_alnum(low[i]) && skipped < 8) {
            ++i;
            ++skipped;
        }
        if (i >= low.size() || skipped == 0) continue;
        std::size_t len = 0;
        if (low[i] == '0' || low[i] == '1' || low[i] == '2') {
            len = 1;
        } else if (low.compare(i, 2, "na") == 0) {
            len = 2;
        }
        if (len == 0) continue;
        if (i + len < low.size() && is_alnum(low[i + len])) continue;
        if (i < window_start) continue;
        found = rating_from_token(low.substr(i, len));
    }
    if (found) return *found;
    throw UnparseableError("no rating token found", std::string(raw));
}

Distance rating_distance(Rating a, Rating b) {
    const auto va = rating_value(a);
    const auto vb = rating_value(b);
    if (!va && !vb) return Distance::Zero;
    if (!va || !vb) return Distance::Substantive;
    switch (std::abs(*va - *vb)) {
        case 0: return Distance::Zero;
        case 1: return Distance::One;
        default: return Distance::Two;
    }
}

}  // namespace pedeval
