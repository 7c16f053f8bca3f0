#include "pedeval/judge.hpp"

#include "pedeval/error.hpp"
#include "pedeval/markdown.hpp"
#include "pedeval/parallel.hpp"
#include "pedeval/prompt_markers.hpp"

#include <set>

namespace pedeval {

namespace {

constexpr std::string_view kRetrySuffix = "\n\nRespond with 0, 1, 2, or NA only.";

std::string directive() {
    return "Reason briefly about which band of the rubric the response matches, then give your final answer on "
           "the last line as `" +
           std::string(markers::kJudgeAnswer) + "`, where <token> is one of 0, 1, 2, or NA.";
}

/// Output text before the final "Rating" line.
std::string rationale_of(const std::string& raw) {
    const auto pos = raw.rfind("Rating");
    std::string r = pos == std::string::npos ? raw : raw.substr(0, pos);
    const auto e = r.find_last_not_of(" \t\r\n");
    return e == std::string::npos ? std::string() : r.substr(0, e + 1);
}

}  // namespace

std::vector<JudgeItem> make_judge_items(std::span<const PostResponsePair> pairs, const Corpus& corpus) {
    std::vector<JudgeItem> items;
    items.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const ForumPost* post = corpus.find_post(pair.post_id);
        if (!post) throw NotFoundError("pair " + pair.id + ": post '" + pair.post_id + "' not found");
        JudgeItem item{pair, *post, std::nullopt, std::nullopt};
        if (const CourseInfo* c = corpus.find_course(post->course_id)) item.course = *c;
        if (post->topic_id) {
            if (const DiscussionTopic* t = corpus.find_topic(*post->topic_id)) item.topic = *t;
        }
        items.push_back(std::move(item));
    }
    return items;
}

void to_json(nlohmann::ordered_json& j, const JudgeVerdict& v) {
    j = nlohmann::ordered_json::object();
    j["pair_id"] = v.pair_id;
    j["level"] = level_index(v.level);
    j["rating"] = std::string(rating_token(v.rating));
    j["rationale"] = v.rationale;
    j["program_id"] = v.program_id;
    j["stripped"] = v.stripped;
}

void from_json(const nlohmann::ordered_json& j, JudgeVerdict& v) {
    try {
        v.pair_id = j.at("pair_id").get<std::string>();
        v.level = level_from_index(j.at("level").get<int>());
        auto r = rating_from_token(j.at("rating").get<std::string>());
        if (!r) throw ValidationError("verdict: bad rating token");
        v.rating = *r;
        v.rationale = j.at("rationale").get<std::string>();
        v.program_id = j.at("program_id").get<std::string>();
        v.stripped = j.at("stripped").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("verdict: ") + e.what());
    }
}

RatingRecord verdict_record(const JudgeVerdict& v, std::string_view rater_id) {
    RatingRecord r;
    r.pair_id = v.pair_id;
    r.rater_id = std::string(rater_id);
    r.level = v.level;
    r.rating = v.rating;
    r.provenance = Provenance::Judge;
    return r;
}

std::string render_judge_prompt(const PromptProgram& program, const JudgeItem& item, PedLevel level,
                                bool strip_md) {
    std::string p = program.instruction + "\n";
    if (!program.rules.empty()) {
        p += "\nRules:\n";
        for (const auto& r : program.rules) p += "- " + r + "\n";
    }
    if (!program.exemplars.empty()) {
        p += "\nExamples:\n";
        for (std::size_t i = 0; i < program.exemplars.size(); ++i) {
            const auto& e = program.exemplars[i];
            p += "\nExample " + std::to_string(i + 1) + " (Level " + std::to_string(level_index(e.level)) + ": " +
                 std::string(level_name(e.level)) + ")\n";
            p += "Discussion forum post:\n" + e.post_text + "\n";
            p += "Teaching assistant response:\n" + e.response_text + "\n";
            if (!e.rationale.empty()) p += "Reasoning: " + e.rationale + "\n";
            p += "Rating: " + std::string(rating_token(e.gold)) + "\n";
        }
    }
    p += "\nCourse information:\n";
    if (item.course) {
        p += item.course->name + "\n";
        if (item.course->description && !item.course->description->empty()) p += *item.course->description + "\n";
    } else {
        p += "not available\n";
    }
    p += "\nDiscussion topic:\n";
    if (item.topic) {
        p += item.topic->title + "\n";
        if (item.topic->instructions && !item.topic->instructions->empty()) p += *item.topic->instructions + "\n";
    } else {
        p += "not available\n";
    }
    p += "\nDiscussion forum post:\n" + item.post.text + "\n";
    p += "\nTeaching assistant response:\n" +
         (strip_md ? strip_markdown(item.pair.response_text) : item.pair.response_text) + "\n";
    p += "\nPedagogical rubric:\n" + rubric_text(level);
    p += "\n" + directive() + "\n";
    return p;
}

bool level_applies(const PostResponsePair& pair, PedLevel level) {
    return level != PedLevel::CollaborativeKnowledgeConstruction || pair.condition == Condition::ForumContext;
}

JudgeVerdict judge_pair(Provider& provider, const PipelineConfig& cfg, const PromptProgram& program,
                        const JudgeItem& item, PedLevel level, bool strip_md) {
    if (!level_applies(item.pair, level)) {
        throw PreconditionError("pair " + item.pair.id + ": Level 5 is only judged with forum context");
    }
    const std::string where = "pair " + item.pair.id + " level " + std::to_string(level_index(level));
    GenerationRequest req{cfg.judge_model, render_judge_prompt(program, item, level, strip_md),
                          cfg.judge_temperature, cfg.max_tokens,
                          "judge:" + item.pair.id + ":L" + std::to_string(level_index(level))};
    JudgeVerdict v{item.pair.id, level, Rating::NA, {}, program.id, strip_md || item.pair.markdown_stripped};
    std::string raw = provider.generate(req);
    try {
        v.rating = parse_rating(raw);
        v.rationale = rationale_of(raw);
        return v;
    } catch (const UnparseableError&) {
    }
    req.prompt += kRetrySuffix;
    raw = provider.generate(req);
    try {
        v.rating = parse_rating(raw);
    } catch (const UnparseableError& e) {
        throw UnparseableError(where + ": " + e.what() + " after retry", raw);
    }
    v.rationale = rationale_of(raw);
    return v;
}

std::vector<JudgeVerdict> judge_batch(Provider& provider, const PipelineConfig& cfg, const PromptProgram& program,
                                      std::span<const JudgeItem> items, std::span<const PedLevel> levels,
                                      bool strip_md) {
    std::vector<std::pair<std::size_t, PedLevel>> tasks;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (auto level : levels) {
            if (level_applies(items[i].pair, level)) tasks.emplace_back(i, level);
        }
    }
    return parallel_map(tasks.size(), provider.options().concurrency_limit, [&](std::size_t t) {
        return judge_pair(provider, cfg, program, items[tasks[t].first], tasks[t].second, strip_md);
    });
}

LevelMetrics evaluate_judge(std::span<const JudgeVerdict> verdicts, std::span<const RatingRecord> gold,
                            PedLevel level) {
    const auto resolved = effective_ratings(gold);
    std::vector<Rating> pred, truth;
    std::vector<std::string> missing;
    for (const auto& v : verdicts) {
        if (v.level != level) continue;
        auto it = resolved.find({v.pair_id, level});
        if (it == resolved.end()) {
            missing.push_back(v.pair_id);
            continue;
        }
        pred.push_back(v.rating);
        truth.push_back(it->second);
    }
    if (!missing.empty()) {
        std::string msg = "evaluate_judge: no gold rating at level " + std::to_string(level_index(level)) + " for:";
        for (const auto& id : missing) msg += " " + id;
        throw ValidationError(msg);
    }
    if (pred.empty()) {
        throw ValidationError("evaluate_judge: no verdicts at level " + std::to_string(level_index(level)));
    }
    return LevelMetrics{level, pred.size(), accuracy(pred, truth), weighted_f1(pred, truth)};
}

}  // namespace pedeval
