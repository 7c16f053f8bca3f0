#pragma once

#include "pedeval/corpus.hpp"
#include "pedeval/metrics.hpp"
#include "pedeval/rubric.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <string>
#include <variant>
#include <vector>

namespace pedeval {

enum class TaskState { Open, PartiallyRated, FullyRated, Adjudicating, Final };

std::string_view task_state_name(TaskState s);

struct AnnotationTask {
    std::size_t ordinal{0};  ///< 1-based, in study order
    std::string pair_id;
    Condition condition{Condition::ContextFree};
    std::vector<PedLevel> levels;  ///< 4 levels, or 5 with forum context
    std::array<std::string, 2> raters;
    TaskState state{TaskState::Open};
};

void to_json(nlohmann::ordered_json& j, const AnnotationTask& v);

/// Levels a human rates for pairs generated under `c`.
std::vector<PedLevel> levels_for(Condition c);

enum class DiscrepancyKind { Substantive, Minor };

std::string_view discrepancy_kind_name(DiscrepancyKind k);

struct AdjudicationItem {
    std::string id;  ///< "<pair_id>:L<level>"
    std::string pair_id;
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    Rating rating_a{Rating::NA};
    Rating rating_b{Rating::NA};
    DiscrepancyKind kind{DiscrepancyKind::Minor};
    std::string assignee;  ///< Minor: the single reviewer; Substantive: the adjudicator
    std::optional<Rating> resolution;
    bool needs_discussion{false};
};

void to_json(nlohmann::ordered_json& j, const AdjudicationItem& v);

/// Nullopt for equal ratings, else Minor for distance 1 and Substantive
/// for distance 2 or an NA conflict.
std::optional<DiscrepancyKind> classify_discrepancy(Rating a, Rating b);

/// The value at least two of the three opinions share, if any.
std::optional<Rating> majority_of(std::span<const Rating> opinions);

struct StudySetup {
    std::vector<PostResponsePair> pairs;  ///< task order
    Corpus context;                       ///< posts, courses and topics for pair bundles
    std::string rater_a;
    std::string rater_b;
    std::string adjudicator;
    std::size_t milestone_n{80};
    /// Append-only event log; empty keeps state in memory only.
    std::filesystem::path log_path;
    /// Timestamp source for new records; defaults to the UTC clock.
    std::function<std::string()> clock;
};

struct MilestonePending {
    std::size_t remaining{0};
};

struct MilestoneReport {
    std::vector<std::string> pair_ids;  ///< the window, in completion order
    AgreementReport report;
};

using MilestoneStatus = std::variant<MilestonePending, MilestoneReport>;

struct Progress {
    std::size_t tasks{0};
    std::size_t completed_pairs{0};  ///< rated at every level by both raters
    std::map<TaskState, std::size_t> by_state;
    std::map<std::string, std::size_t> rated_by;  ///< tasks each rater has finished
    std::size_t queue_open{0};
    std::size_t queue_resolved{0};
};

/// The dual-rater workflow. Every task goes to both raters; a (pair, level)
/// both have rated with different values becomes an adjudication item.
/// Minor items are dealt round-robin over (rater_a, rater_b, adjudicator)
/// in the order they arise. State is rebuilt from the log on construction.
/// All public members are thread-safe.
class AnnotationService {
public:
    explicit AnnotationService(StudySetup setup);

    const StudySetup& setup() const { return setup_; }
    std::array<std::string, 3> reviewers() const;

    /// Lowest-ordinal task this rater has not finished. Throws NotFoundError
    /// for an unknown rater.
    std::optional<AnnotationTask> next_task(const std::string& rater_id) const;

    /// Persists one Human rating. Throws NotFoundError (rater, pair),
    /// PreconditionError (level outside the task's set) or ConflictError
    /// (key already rated).
    RatingRecord submit_rating(const std::string& rater_id, const std::string& pair_id, PedLevel level,
                               Rating rating);

    MilestoneStatus milestone_report() const;

    /// Items in the order they arose.
    std::vector<AdjudicationItem> adjudication_queue() const;

    /// Resolves one item. Substantive items need three opinions whose
    /// majority equals `rating`; without a majority the item is flagged
    /// needs_discussion and ValidationError is thrown. Minor items accept
    /// only their assignee. Throws ConflictError on a resolved item.
    RatingRecord resolve(const std::string& item_id, const std::string& resolver_id, Rating rating,
                         std::optional<std::vector<Rating>> opinions = std::nullopt);

    AnnotationTask task(const std::string& pair_id) const;
    std::vector<AnnotationTask> tasks() const;
    Progress progress() const;
    std::vector<RatingRecord> records() const;

    /// Pair payload for raters: post, context, response (raw and stripped)
    /// and the rubric bands of every level of the task.
    nlohmann::ordered_json pair_bundle(const std::string& pair_id) const;

private:
    void apply_rating(const RatingRecord& r);
    void append_log(const nlohmann::ordered_json& event);
    std::size_t task_index(const std::string& pair_id) const;
    AnnotationTask task_locked(std::size_t index) const;
    bool rater_finished(std::size_t index, const std::string& rater) const;
    std::string now() const;

    StudySetup setup_;
    std::map<std::string, std::size_t> index_;
    mutable std::mutex mu_;
    std::vector<RatingRecord> records_;
    std::map<std::tuple<std::string, std::string, PedLevel>, Rating> human_;  // (pair, rater, level)
    std::vector<std::string> completion_order_;
    std::vector<AdjudicationItem> items_;
    std::map<std::string, std::size_t> item_index_;
    std::size_t minor_count_{0};
    std::ofstream log_;
};

}  // namespace pedeval
