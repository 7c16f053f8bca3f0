#pragma once

#include "pedeval/config.hpp"
#include "pedeval/corpus.hpp"
#include "pedeval/provider.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pedeval {

enum class PostCategory { AcademicQuestion, AcademicDiscussion, LogisticsQuestion, LogisticsDiscussion, Social };

inline constexpr std::array<PostCategory, 5> kAllCategories = {
    PostCategory::AcademicQuestion, PostCategory::AcademicDiscussion, PostCategory::LogisticsQuestion,
    PostCategory::LogisticsDiscussion, PostCategory::Social};

/// "Academic Question", "Academic Discussion", ...
std::string_view category_name(PostCategory c);
/// Exact name lookup. Throws ValidationError.
PostCategory category_from_name(std::string_view name);

/// Classifier instructions with the five category definitions, then the
/// post and the topic instructions ("none provided" when there are none).
std::string render_triage_prompt(const ForumPost& post, const DiscussionTopic* topic);

/// Finds category names (case-insensitive) and a leading index digit 1-5.
/// Exactly one distinct category must be found; none or several (a hedged
/// answer) throw UnparseableError.
PostCategory parse_category(std::string_view raw);

/// Render, generate, parse. On a parse failure the prompt is resent once
/// with "Answer with the category name only." appended.
PostCategory classify_post(Provider& provider, const PipelineConfig& cfg, const ForumPost& post,
                           const DiscussionTopic* topic);

/// classify_post over many posts; topics are looked up by id. Output order
/// matches input order.
std::vector<PostCategory> classify_posts(Provider& provider, const PipelineConfig& cfg,
                                         std::span<const ForumPost> posts,
                                         std::span<const DiscussionTopic> topics);

struct PostLabel {
    std::string post_id;
    PostCategory category{PostCategory::AcademicQuestion};
    bool operator==(const PostLabel&) const = default;
};

void to_json(nlohmann::ordered_json& j, const PostLabel& v);
void from_json(const nlohmann::ordered_json& j, PostLabel& v);

}  // namespace pedeval
