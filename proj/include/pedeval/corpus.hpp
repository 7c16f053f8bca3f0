#pragma once

#include "pedeval/rubric.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pedeval {

struct PipelineConfig;

inline constexpr std::string_view kEpochTimestamp = "1970-01-01T00:00:00Z";

struct ForumPost {
    std::string id;
    std::string course_id;
    std::optional<std::string> topic_id;
    std::string author;
    std::string text;
    std::uint32_t thread_position{0};  ///< 0 = first post of its thread
    std::string created_at{kEpochTimestamp};

    bool operator==(const ForumPost&) const = default;
};

struct CourseInfo {
    std::string id;
    std::string name;
    std::optional<std::string> description;

    bool operator==(const CourseInfo&) const = default;
};

struct DiscussionTopic {
    std::string id;
    std::string course_id;
    std::string title;
    std::optional<std::string> instructions;

    bool operator==(const DiscussionTopic&) const = default;
};

enum class Condition { ContextFree, ForumContext, MoocStyle };

std::string_view condition_name(Condition c);
Condition condition_from_name(std::string_view name);

struct PostResponsePair {
    std::string id;
    std::string post_id;
    Condition condition{Condition::ContextFree};
    std::string generator_label;
    std::string response_text;
    std::vector<std::string> similar_post_ids;  ///< rank order; ForumContext only
    bool markdown_stripped{false};

    bool operator==(const PostResponsePair&) const = default;
};

enum class Provenance { Human, Judge, Adjudicated };

std::string_view provenance_name(Provenance p);
Provenance provenance_from_name(std::string_view name);

struct RatingRecord {
    std::string pair_id;
    std::string rater_id;
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    Rating rating{Rating::NA};
    std::string submitted_at{kEpochTimestamp};
    Provenance provenance{Provenance::Human};

    bool operator==(const RatingRecord&) const = default;
};

// JSON in canonical field order. from_json validates field presence, types,
// unknown fields and per-type invariants, throwing ValidationError.
void to_json(nlohmann::ordered_json& j, const ForumPost& v);
void from_json(const nlohmann::ordered_json& j, ForumPost& v);
void to_json(nlohmann::ordered_json& j, const CourseInfo& v);
void from_json(const nlohmann::ordered_json& j, CourseInfo& v);
void to_json(nlohmann::ordered_json& j, const DiscussionTopic& v);
void from_json(const nlohmann::ordered_json& j, DiscussionTopic& v);
void to_json(nlohmann::ordered_json& j, const PostResponsePair& v);
void from_json(const nlohmann::ordered_json& j, PostResponsePair& v);
void to_json(nlohmann::ordered_json& j, const RatingRecord& v);
void from_json(const nlohmann::ordered_json& j, RatingRecord& v);

/// Uniqueness key of a record: its id, or for Human ratings the
/// (pair, rater, level) triple. nullopt means no uniqueness constraint.
std::optional<std::string> record_key(const ForumPost& v);
std::optional<std::string> record_key(const CourseInfo& v);
std::optional<std::string> record_key(const DiscussionTopic& v);
std::optional<std::string> record_key(const PostResponsePair& v);
std::optional<std::string> record_key(const RatingRecord& v);

/// Reads one record per line. Blank lines are skipped. Errors name the
/// 1-based line number; duplicate keys name both lines.
template <typename T>
std::vector<T> read_jsonl(std::istream& in, std::string_view source = "<stream>");

template <typename T>
std::vector<T> read_jsonl_file(const std::filesystem::path& path);

template <typename T>
std::string to_jsonl(std::span<const T> records);

/// Writes via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

template <typename T>
void write_jsonl_file(const std::filesystem::path& path, std::span<const T> records) {
    write_text_atomic(path, to_jsonl<T>(records));
}

enum class EntityKind { Posts, Courses, Topics, Pairs, Ratings };

EntityKind entity_kind_from_name(std::string_view name);

struct Corpus {
    std::vector<ForumPost> posts;
    std::vector<CourseInfo> courses;
    std::vector<DiscussionTopic> topics;
    std::vector<PostResponsePair> pairs;
    std::vector<RatingRecord> ratings;

    const ForumPost* find_post(std::string_view id) const;
    const CourseInfo* find_course(std::string_view id) const;
    const DiscussionTopic* find_topic(std::string_view id) const;
    const PostResponsePair* find_pair(std::string_view id) const;

    /// Cross-entity checks: topics resolve their course when courses are
    /// loaded; pairs reference loaded posts; Level-5 Human ratings only on
    /// ForumContext pairs.
    void validate() const;

    std::size_t size(EntityKind kind) const;
};

/// Loads one entity kind from a JSONL file into an otherwise empty corpus.
Corpus ingest_jsonl(const std::filesystem::path& path, EntityKind kind);

/// Posts that open their thread, in input order.
std::vector<ForumPost> filter_thread_initial(std::span<const ForumPost> posts);

struct TrainTestSplit {
    std::vector<PostResponsePair> train;
    std::vector<PostResponsePair> test;
};

/// Samples cfg.train_ctx_free ContextFree and cfg.train_ctx ForumContext
/// pairs into train by seeded shuffle; everything else is test. Both sides
/// keep input order. Throws ValidationError naming each shortfall.
TrainTestSplit split_train_test(std::span<const PostResponsePair> pairs, const PipelineConfig& cfg);

struct RatingCounts {
    std::size_t na{0};
    std::size_t zero{0};
    std::size_t one{0};
    std::size_t two{0};

    std::size_t total() const { return na + zero + one + two; }
    std::size_t& operator[](Rating r);
    std::size_t operator[](Rating r) const;
    bool operator==(const RatingCounts&) const = default;
};

RatingCounts summarize_rating_distribution(std::span<const RatingRecord> records, PedLevel level);

using RatingKey = std::pair<std::string, PedLevel>;

/// One resolved rating per (pair, level): the last Adjudicated record if
/// any, else the Human rating when all Human raters agree, else the Judge
/// rating when all Judge records agree and no Human record exists.
/// Unresolved disagreements are left out.
std::map<RatingKey, Rating> effective_ratings(std::span<const RatingRecord> records);

}  // namespace pedeval
