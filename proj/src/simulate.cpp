#include "pedeval/simulate.hpp"

#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/parallel.hpp"

namespace pedeval {

namespace {

constexpr std::string_view kGoal1 =
    "1. Clarify Misunderstandings: Support knowledge acquisition by articulating questions, addressing "
    "confusion, and receiving clarifications from peers or instructors.\n";
constexpr std::string_view kGoal2 =
    "2. Deepen Disciplinary Understanding: Promote deeper engagement with core concepts and themes through "
    "elaboration, critical questioning, and interaction with diverse perspectives.\n";
constexpr std::string_view kGoal3 =
    "3. Develop Higher-Order Thinking: Cultivate critical thinking and reasoning skills by analyzing ideas, "
    "justifying positions, synthesizing information, and exploring alternative viewpoints.\n";
constexpr std::string_view kGoal4 =
    "4. Enhance Metacognitive Awareness: Strengthen self-regulated learning by reflecting on one's "
    "understanding, identifying gaps in knowledge, and evaluating the quality of reasoning.\n";
constexpr std::string_view kGoal5 =
    "5. Foster Collaborative Knowledge Construction and Social Presence: Fosters peer interaction and "
    "collective learning by connecting diverse student perspectives, encouraging the exchange of ideas, and "
    "supporting collaborative knowledge construction, positioning the discussion forum as a shared space for "
    "dialogue and co-construction of understanding.\n";

constexpr std::string_view kGoalsIntro = "Please adhere to the following pedagogical goals:\n";

std::string context_free_template() {
    std::string t =
        "You are a virtual teaching assistant for a course called <COURSE_NAME>.\n"
        "<COURSE_DESCRIPTION>\n"
        "Respond to the discussion forum post for this course provided by one of the students. Please offer the "
        "response based on your existing knowledge base. Please add a general greeting in each response.\n"
        "\n";
    t += kGoalsIntro;
    t += kGoal1;
    t += kGoal2;
    t += kGoal3;
    t += kGoal4;
    return t;
}

std::string forum_context_template() {
    std::string t =
        "You are a virtual teaching assistant for a course called <COURSE_NAME>.\n"
        "<COURSE_DESCRIPTION>\n"
        "\n"
        "You are responding to the following discussion forum post for this course provided by one of the "
        "students. This post is an initial post in the discussion.\n"
        "\n"
        "<STUDENT_POST>\n"
        "\n"
        "Additionally, here are some other relevant posts from students on this same topic:\n"
        "<SIMILAR_POSTS>\n"
        "\n"
        "Please offer the response based on your existing knowledge base. Please add a general greeting in each "
        "response.\n"
        "\n"
        "When appropriate, refer to insights or perspectives from these related posts to foster connections "
        "between student ideas.\n"
        "\n";
    t += kGoalsIntro;
    t += kGoal1;
    t += kGoal2;
    t += kGoal3;
    t += kGoal4;
    t += kGoal5;
    return t;
}

std::string mooc_template() {
    std::string t =
        "You are a virtual teaching assistant. Respond to the discussion forum post provided by one of the "
        "students. Please offer the response based on your existing knowledge base. Please add a general "
        "greeting in each response.\n"
        "\n";
    t += kGoalsIntro;
    t += kGoal1;
    t += kGoal2;
    t += kGoal3;
    t += kGoal4;
    return t;
}

/// Drops the description line when the course has none.
std::string course_template(std::string tmpl, const CourseInfo& course) {
    if (!course.description || course.description->empty()) {
        const std::string line = "<COURSE_DESCRIPTION>\n";
        if (auto pos = tmpl.find(line); pos != std::string::npos) tmpl.erase(pos, line.size());
    }
    return tmpl;
}

std::map<std::string, std::string> course_values(const CourseInfo& course) {
    std::map<std::string, std::string> v{{"COURSE_NAME", course.name}};
    if (course.description && !course.description->empty()) v["COURSE_DESCRIPTION"] = *course.description;
    return v;
}

std::string topic_section(const DiscussionTopic* topic) {
    if (!topic) return {};
    std::string s = "\nDiscussion topic: " + topic->title + "\n";
    if (topic->instructions && !topic->instructions->empty()) s += "Topic instructions: " + *topic->instructions + "\n";
    return s;
}

std::string post_section(const ForumPost& post) { return "Student post:\n" + post.text; }

bool marker_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }

}  // namespace

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '<') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && marker_char(tmpl[j])) ++j;
            if (j > i + 1 && j < tmpl.size() && tmpl[j] == '>') {
                const std::string name(tmpl.substr(i + 1, j - i - 1));
                auto it = values.find(name);
                if (it == values.end()) throw ValidationError("unresolved template marker <" + name + ">");
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string render_context_free_prompt(const CourseInfo& course, const DiscussionTopic* topic,
                                       const ForumPost& post) {
    std::string p = fill_template(course_template(context_free_template(), course), course_values(course));
    p += topic_section(topic);
    p += "\n" + post_section(post) + "\n";
    return p;
}

std::string render_forum_context_prompt(const CourseInfo& course, const DiscussionTopic* topic,
                                        const ForumPost& post, std::span<const ForumPost> similar,
                                        std::size_t retrieval_k) {
    if (similar.size() > retrieval_k) {
        throw ValidationError("forum-context prompt: " + std::to_string(similar.size()) +
                              " similar posts exceed retrieval_k " + std::to_string(retrieval_k));
    }
    auto values = course_values(course);
    values["STUDENT_POST"] = post_section(post);
    std::string sims;
    for (std::size_t i = 0; i < similar.size(); ++i) {
        if (i > 0) sims += "\n\n";
        sims += "Similar Post #" + std::to_string(i + 1) + ":\n" + similar[i].text;
    }
    values["SIMILAR_POSTS"] = similar.empty() ? "No similar posts available." : sims;
    std::string p = fill_template(course_template(forum_context_template(), course), values);
    p += topic_section(topic);
    return p;
}

std::string render_mooc_prompt(const ForumPost& post) {
    std::string p = fill_template(mooc_template(), {});
    p += "\n" + post_section(post) + "\n";
    return p;
}

std::string make_pair_id(std::string_view post_id, Condition condition, std::string_view generator_label) {
    std::string key(post_id);
    key += '\n';
    key += condition_name(condition);
    key += '\n';
    key += generator_label;
    return "pair-" + sha256_hex(key).substr(0, 16);
}

SimulationEnv::SimulationEnv(std::span<const ForumPost> posts, std::span<const CourseInfo> courses,
                             std::span<const DiscussionTopic> topics, const PostIndex* index)
    : index_(index) {
    for (const auto& p : posts) posts_.emplace(p.id, &p);
    for (const auto& c : courses) courses_.emplace(c.id, &c);
    for (const auto& t : topics) topics_.emplace(t.id, &t);
}

const ForumPost& SimulationEnv::post(std::string_view id) const {
    auto it = posts_.find(id);
    if (it == posts_.end()) throw NotFoundError("unknown post '" + std::string(id) + "'");
    return *it->second;
}

CourseInfo SimulationEnv::course_for(const ForumPost& post) const {
    if (auto it = courses_.find(post.course_id); it != courses_.end()) return *it->second;
    return CourseInfo{post.course_id, post.course_id, std::nullopt};
}

const DiscussionTopic* SimulationEnv::topic_for(const ForumPost& post) const {
    if (!post.topic_id) return nullptr;
    auto it = topics_.find(*post.topic_id);
    return it == topics_.end() ? nullptr : it->second;
}

PostResponsePair simulate_response(Provider& provider, const PipelineConfig& cfg, Condition condition,
                                   const std::string& generator_label, const ForumPost& post,
                                   const SimulationEnv& env) {
    PostResponsePair pair;
    pair.id = make_pair_id(post.id, condition, generator_label);
    pair.post_id = post.id;
    pair.condition = condition;
    pair.generator_label = generator_label;

    std::string prompt;
    switch (condition) {
        case Condition::ContextFree:
            prompt = render_context_free_prompt(env.course_for(post), env.topic_for(post), post);
            break;
        case Condition::ForumContext: {
            if (!env.index()) {
                throw PreconditionError("pair " + pair.id + ": ForumContext generation needs a retrieval index");
            }
            pair.similar_post_ids = top_k_similar(*env.index(), provider, post, cfg.retrieval_k);
            std::vector<ForumPost> similar;
            for (const auto& id : pair.similar_post_ids) similar.push_back(env.post(id));
            prompt = render_forum_context_prompt(env.course_for(post), env.topic_for(post), post, similar,
                                                 cfg.retrieval_k);
            break;
        }
        case Condition::MoocStyle: prompt = render_mooc_prompt(post); break;
    }

    GenerationRequest req{generator_label, std::move(prompt), cfg.simulation_temperature, cfg.max_tokens,
                          "simulate:" + std::string(condition_name(condition)) + ":" + post.id};
    try {
        pair.response_text = provider.generate(req);
    } catch (const ProviderError& e) {
        throw ProviderError("pair " + pair.id + " (post " + post.id + ", " +
                                std::string(condition_name(condition)) + "): " + e.what(),
                            e.attempts());
    } catch (const NotFoundError& e) {
        throw NotFoundError("pair " + pair.id + " (post " + post.id + "): " + e.what());
    }
    if (pair.response_text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ValidationError("pair " + pair.id + ": empty response from " + generator_label);
    }
    return pair;
}

std::vector<SimulationJob> new_llm_test_jobs(std::span<const std::string> labels,
                                             std::span<const ForumPost> posts) {
    std::vector<SimulationJob> jobs;
    for (const auto& label : labels) {
        for (const auto& p : posts) {
            jobs.push_back({Condition::ContextFree, label, p.id});
            jobs.push_back({Condition::ForumContext, label, p.id});
        }
    }
    return jobs;
}

std::vector<SimulationJob> mooc_jobs(const std::string& label, std::span<const ForumPost> posts) {
    return condition_jobs(Condition::MoocStyle, label, posts);
}

std::vector<SimulationJob> condition_jobs(Condition condition, const std::string& label,
                                          std::span<const ForumPost> posts) {
    std::vector<SimulationJob> jobs;
    jobs.reserve(posts.size());
    for (const auto& p : posts) jobs.push_back({condition, label, p.id});
    return jobs;
}

std::vector<PostResponsePair> run_simulation(Provider& provider, const PipelineConfig& cfg,
                                             std::span<const SimulationJob> jobs, const SimulationEnv& env) {
    return parallel_map(jobs.size(), provider.options().concurrency_limit, [&](std::size_t i) {
        return simulate_response(provider, cfg, jobs[i].condition, jobs[i].generator_label, env.post(jobs[i].post_id),
                                 env);
    });
}

}  // namespace pedeval
