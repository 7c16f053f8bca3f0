#include "pedeval/triage.hpp"

#include "pedeval/error.hpp"
#include "pedeval/parallel.hpp"
#include "pedeval/prompt_markers.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace pedeval {

namespace {

// Classifier docstring, verbatim apart from the first sentence being the
// shared marker constant.
constexpr std::string_view kCategoryDefinitions =
    " based on the content of the forum post and guidelines from the instructor for the post (if applicable):\n"
    "1. Academic Question - Questions about academic content posed to the teaching staff;\n"
    "2. Academic Discussion - Usually a discussion forum post required by an assignment, or any type of "
    "discussion that does not contain an obvious question;\n"
    "3. Logistics Question - Questions about course logistics;\n"
    "4. Logistics Discussion - Other types of posts about course logistics;\n"
    "5. Social - Discussion forum posts for social purposes.";

constexpr std::string_view kRetrySuffix = "\n\nAnswer with the category name only.";

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::string_view category_name(PostCategory c) {
    switch (c) {
        case PostCategory::AcademicQuestion: return "Academic Question";
        case PostCategory::AcademicDiscussion: return "Academic Discussion";
        case PostCategory::LogisticsQuestion: return "Logistics Question";
        case PostCategory::LogisticsDiscussion: return "Logistics Discussion";
        case PostCategory::Social: return "Social";
    }
    return "Social";
}

PostCategory category_from_name(std::string_view name) {
    for (auto c : kAllCategories) {
        if (category_name(c) == name) return c;
    }
    throw ValidationError("unknown post category '" + std::string(name) + "'");
}

std::string render_triage_prompt(const ForumPost& post, const DiscussionTopic* topic) {
    std::string p;
    p += markers::kTriage;
    p += kCategoryDefinitions;
    p += "\n\n";
    p += markers::kTriagePost;
    p += post.text;
    p += markers::kTriageGuidelines;
    p += "\n";
    p += topic && topic->instructions && !topic->instructions->empty() ? *topic->instructions : "none provided";
    p += "\n\nClassification:";
    return p;
}

PostCategory parse_category(std::string_view raw) {
    const std::string low = lower(raw);
    std::set<PostCategory> found;
    for (auto c : kAllCategories) {
        if (low.find(lower(category_name(c))) != std::string::npos) found.insert(c);
    }
    const auto first = low.find_first_not_of(" \t\r\n\"'*(");
    if (first != std::string::npos && low[first] >= '1' && low[first] <= '5' &&
        (first + 1 == low.size() || !std::isdigit(static_cast<unsigned char>(low[first + 1])))) {
        found.insert(kAllCategories[static_cast<std::size_t>(low[first] - '1')]);
    }
    if (found.size() == 1) return *found.begin();
    throw UnparseableError(found.empty() ? "no post category found in model output"
                                         : "model output names more than one post category",
                           std::string(raw));
}

PostCategory classify_post(Provider& provider, const PipelineConfig& cfg, const ForumPost& post,
                           const DiscussionTopic* topic) {
    GenerationRequest req{cfg.triage_model, render_triage_prompt(post, topic), cfg.judge_temperature,
                          cfg.max_tokens, "triage:" + post.id};
    try {
        return parse_category(provider.generate(req));
    } catch (const UnparseableError&) {
    }
    req.prompt += kRetrySuffix;
    const std::string raw = provider.generate(req);
    try {
        return parse_category(raw);
    } catch (const UnparseableError& e) {
        throw UnparseableError("post " + post.id + ": " + e.what() + " after retry", raw);
    }
}

std::vector<PostCategory> classify_posts(Provider& provider, const PipelineConfig& cfg,
                                         std::span<const ForumPost> posts,
                                         std::span<const DiscussionTopic> topics) {
    std::map<std::string, const DiscussionTopic*> by_id;
    for (const auto& t : topics) by_id.emplace(t.id, &t);
    return parallel_map(posts.size(), provider.options().concurrency_limit, [&](std::size_t i) {
        const DiscussionTopic* topic = nullptr;
        if (posts[i].topic_id) {
            if (auto it = by_id.find(*posts[i].topic_id); it != by_id.end()) topic = it->second;
        }
        return classify_post(provider, cfg, posts[i], topic);
    });
}

void to_json(nlohmann::ordered_json& j, const PostLabel& v) {
    j = nlohmann::ordered_json::object();
    j["post_id"] = v.post_id;
    j["category"] = std::string(category_name(v.category));
}

void from_json(const nlohmann::ordered_json& j, PostLabel& v) {
    if (!j.is_object() || !j.contains("post_id") || !j.contains("category") || !j["post_id"].is_string() ||
        !j["category"].is_string()) {
        throw ValidationError("post label needs string fields post_id and category");
    }
    v.post_id = j["post_id"].get<std::string>();
    v.category = category_from_name(j["category"].get<std::string>());
}

}  // namespace pedeval
