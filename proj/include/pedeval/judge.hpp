#pragma once

#include "pedeval/config.hpp"
#include "pedeval/corpus.hpp"
#include "pedeval/metrics.hpp"
#include "pedeval/program.hpp"
#include "pedeval/provider.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pedeval {

/// Everything the judge sees about one pair.
struct JudgeItem {
    PostResponsePair pair;
    ForumPost post;
    std::optional<CourseInfo> course;
    std::optional<DiscussionTopic> topic;
};

/// Resolves each pair's post, course and topic. Throws NotFoundError for a
/// pair whose post is missing.
std::vector<JudgeItem> make_judge_items(std::span<const PostResponsePair> pairs, const Corpus& corpus);

struct JudgeVerdict {
    std::string pair_id;
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    Rating rating{Rating::NA};
    std::string rationale;
    std::string program_id;
    bool stripped{false};

    bool operator==(const JudgeVerdict&) const = default;
};

void to_json(nlohmann::ordered_json& j, const JudgeVerdict& v);
void from_json(const nlohmann::ordered_json& j, JudgeVerdict& v);

/// A verdict as a Judge-provenance rating record.
RatingRecord verdict_record(const JudgeVerdict& v, std::string_view rater_id);

/// Sections in order: instruction, rules, exemplars, course information,
/// discussion topic, forum post, response, the level's rubric, and the
/// answer directive. Exemplars carry only their level name; the only band
/// text in the prompt is the target level's. Missing course or topic reads
/// "not available".
std::string render_judge_prompt(const PromptProgram& program, const JudgeItem& item, PedLevel level,
                                bool strip_md = false);

/// Render, generate, parse_rating. On a parse failure the prompt is resent
/// once with "Respond with 0, 1, 2, or NA only." appended. Level 5 on a pair
/// that is not ForumContext throws PreconditionError.
JudgeVerdict judge_pair(Provider& provider, const PipelineConfig& cfg, const PromptProgram& program,
                        const JudgeItem& item, PedLevel level, bool strip_md = false);

/// True when the level is judged for this pair (Level 5 needs forum context).
bool level_applies(const PostResponsePair& pair, PedLevel level);

/// Judges every applicable (item, level), item-major. Output order does not
/// depend on scheduling.
std::vector<JudgeVerdict> judge_batch(Provider& provider, const PipelineConfig& cfg, const PromptProgram& program,
                                      std::span<const JudgeItem> items, std::span<const PedLevel> levels,
                                      bool strip_md = false);

/// Accuracy and weighted F-1 of the verdicts at `level` against the
/// effective gold rating of each pair. Throws ValidationError when no
/// verdict is at that level or when gold is missing (listing pair ids).
LevelMetrics evaluate_judge(std::span<const JudgeVerdict> verdicts, std::span<const RatingRecord> gold,
                            PedLevel level);

}  // namespace pedeval
