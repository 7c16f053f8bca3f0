#pragma once

#include "pedeval/judge.hpp"
#include "pedeval/metrics.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pedeval {

/// One classifier's row of the per-level table.
struct ClassifierRow {
    std::string label;
    std::map<PedLevel, LevelMetrics> levels;

    /// Unweighted means over the levels present; nullopt when none are.
    std::optional<double> average_f1() const;
    std::optional<double> average_accuracy() const;
};

/// Metrics for every level that has verdicts. Throws ValidationError when
/// `verdicts` is empty or a verdict lacks gold.
ClassifierRow evaluate_classifier(const std::string& label, std::span<const JudgeVerdict> verdicts,
                                  std::span<const RatingRecord> gold);

struct ScoreDiffSection {
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    ScoreDiffHistogram histogram;
};

struct Report {
    std::vector<ClassifierRow> rows;
    std::optional<AgreementReport> agreement;
    std::vector<ScoreDiffSection> score_diffs;
};

/// Throws ValidationError when the report has no section at all.
nlohmann::ordered_json report_to_json(const Report& report);

/// Plain text: a table with F-1 and Acc. per level plus an Average column
/// (percentages, one decimal, "--" for levels without verdicts), then the
/// agreement summary and one histogram per level.
std::string format_report(const Report& report);

/// Pair id to alignment key for the score-difference histogram. The key is
/// the post id plus the generator label, so one post may be compared once
/// per generator.
std::map<std::string, std::string> alignment_keys(std::span<const PostResponsePair> pairs);

}  // namespace pedeval
