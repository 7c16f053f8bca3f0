#pragma once

#include "pedeval/config.hpp"
#include "pedeval/context.hpp"
#include "pedeval/corpus.hpp"
#include "pedeval/provider.hpp"

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pedeval {

/// Replaces every `<NAME>` marker in `tmpl` in a single pass; substituted
/// text is not rescanned. Throws ValidationError on a marker with no value.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Context-free VTA prompt: four pedagogical goals, then the topic (when
/// given) and the student post.
std::string render_context_free_prompt(const CourseInfo& course, const DiscussionTopic* topic,
                                       const ForumPost& post);

/// Forum-context VTA prompt: the post follows the introductory sentence,
/// similar posts are labelled "Similar Post #n", five goals. Throws
/// ValidationError when more than `retrieval_k` similar posts are given.
std::string render_forum_context_prompt(const CourseInfo& course, const DiscussionTopic* topic,
                                        const ForumPost& post, std::span<const ForumPost> similar,
                                        std::size_t retrieval_k = 10);

/// Course-free prompt used for MOOC posts: four goals, then the post.
std::string render_mooc_prompt(const ForumPost& post);

/// "pair-" plus 16 hex digits of SHA-256 over post id, condition and label.
std::string make_pair_id(std::string_view post_id, Condition condition, std::string_view generator_label);

/// Lookups shared by a simulation run.
class SimulationEnv {
public:
    SimulationEnv(std::span<const ForumPost> posts, std::span<const CourseInfo> courses,
                  std::span<const DiscussionTopic> topics, const PostIndex* index = nullptr);

    const ForumPost& post(std::string_view id) const;
    /// The post's course, or a stand-in named after the course id when the
    /// corpus has no course record.
    CourseInfo course_for(const ForumPost& post) const;
    const DiscussionTopic* topic_for(const ForumPost& post) const;
    const PostIndex* index() const { return index_; }

private:
    std::map<std::string, const ForumPost*, std::less<>> posts_;
    std::map<std::string, const CourseInfo*, std::less<>> courses_;
    std::map<std::string, const DiscussionTopic*, std::less<>> topics_;
    const PostIndex* index_;
};

/// Renders the condition's prompt (retrieving similar posts first for
/// ForumContext), generates and records the pair. ForumContext without an
/// index is a PreconditionError.
PostResponsePair simulate_response(Provider& provider, const PipelineConfig& cfg, Condition condition,
                                   const std::string& generator_label, const ForumPost& post,
                                   const SimulationEnv& env);

struct SimulationJob {
    Condition condition{Condition::ContextFree};
    std::string generator_label;
    std::string post_id;
};

/// Every label x post x {ContextFree, ForumContext}. 3 labels and 30 posts
/// give the 180-pair New-LLM-Test set.
std::vector<SimulationJob> new_llm_test_jobs(std::span<const std::string> labels,
                                             std::span<const ForumPost> posts);

/// One MoocStyle job per post.
std::vector<SimulationJob> mooc_jobs(const std::string& label, std::span<const ForumPost> posts);

/// One job per post for a single condition.
std::vector<SimulationJob> condition_jobs(Condition condition, const std::string& label,
                                          std::span<const ForumPost> posts);

/// Runs jobs concurrently; output is in job order.
std::vector<PostResponsePair> run_simulation(Provider& provider, const PipelineConfig& cfg,
                                             std::span<const SimulationJob> jobs, const SimulationEnv& env);

}  // namespace pedeval
