#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace pedeval {

/// The five pedagogical levels, ordered by instructional difficulty.
enum class PedLevel : int {
    ClarifyMisunderstandings = 1,
    DisciplinaryUnderstanding = 2,
    HigherOrderThinking = 3,
    MetacognitiveAwareness = 4,
    CollaborativeKnowledgeConstruction = 5,
};

inline constexpr std::array<PedLevel, 5> kAllLevels = {
    PedLevel::ClarifyMisunderstandings, PedLevel::DisciplinaryUnderstanding,
    PedLevel::HigherOrderThinking, PedLevel::MetacognitiveAwareness,
    PedLevel::CollaborativeKnowledgeConstruction};

constexpr int level_index(PedLevel level) noexcept { return static_cast<int>(level); }

/// Throws ValidationError outside 1..5.
PedLevel level_from_index(int index);

std::string_view level_name(PedLevel level);

/// Rubric score. NA means the level does not apply to the post.
enum class Rating { Zero, One, Two, NA };

/// Table order used for class-indexed arrays: 0, 1, 2, NA.
inline constexpr std::array<Rating, 4> kAllRatings = {Rating::Zero, Rating::One, Rating::Two, Rating::NA};

constexpr std::size_t rating_slot(Rating r) noexcept { return static_cast<std::size_t>(r); }

/// "0", "1", "2" or "NA".
std::string_view rating_token(Rating r);

/// Exact token lookup ("0", "1", "2", "NA", case-insensitive for NA).
std::optional<Rating> rating_from_token(std::string_view token);

/// Numeric value for 0/1/2; nullopt for NA.
std::optional<int> rating_value(Rating r);

/// Band description for one level and score, without the heading.
std::string_view band_text(PedLevel level, Rating rating);

/// Band heading as printed in the rubric, e.g. "Not Present (0)".
std::string_view band_heading(Rating rating);

/// All four bands of one level, one per line, headed by the level name.
std::string rubric_text(PedLevel level);

inline constexpr std::string_view kRubricVersion = "2025.1";

/// SHA-256 over the version tag and every level's rubric text.
const std::string& rubric_digest();

/// Parses a judge or model rating.
///
/// The trimmed text is first tried as a bare answer: one or more tokens
/// (0, 1, 2, NA) separated by whitespace or punctuation, all agreeing. Failing
/// that, the last token introduced by the word "rating" whose token lies in
/// the final 200 characters is taken. Throws UnparseableError otherwise,
/// including when bare tokens conflict.
Rating parse_rating(std::string_view raw);

enum class Distance { Zero, One, Two, Substantive };

/// |a - b| for numeric ratings; NA vs NA is Zero; NA vs numeric is Substantive.
Distance rating_distance(Rating a, Rating b);

}  // namespace pedeval
