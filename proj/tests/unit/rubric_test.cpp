#include "support.hpp"

#include "pedeval/error.hpp"
#include "pedeval/rubric.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>

using namespace pedeval;
using namespace pedeval::testing;

namespace {

nlohmann::json golden_bands() { return nlohmann::json::parse(read_file(golden_dir() / "rubric_bands.json")); }

// Markdown documents kept beside the sources (other than the README), when
// the checkout has any. The rubric wording was transcribed from them.
std::optional<std::string> reference_text() {
    std::string text;
    for (const auto& e : std::filesystem::directory_iterator(PEDEVAL_SOURCE_DIR)) {
        if (e.path().extension() != ".md" || e.path().filename() == "README.md") continue;
        text += read_file(e.path());
    }
    if (text.empty()) return std::nullopt;
    return text;
}

}  // namespace

TEST(Rubric, BandsMatchGoldenWording) {
    const auto golden = golden_bands();
    ASSERT_EQ(golden.size(), 5u);
    for (const auto& entry : golden) {
        const PedLevel level = level_from_index(entry["level"].get<int>());
        EXPECT_EQ(level_name(level), entry["name"].get<std::string>());
        for (Rating r : kAllRatings) {
            EXPECT_EQ(band_text(level, r), entry["bands"][std::string(rating_token(r))].get<std::string>())
                << "level " << level_index(level) << " rating " << rating_token(r);
        }
    }
}

TEST(Rubric, GoldenWordingAppearsInReferenceText) {
    const auto text = reference_text();
    if (!text) GTEST_SKIP() << "reference text not present";
    for (const auto& entry : golden_bands()) {
        for (const auto& [rating, band] : entry["bands"].items()) {
            EXPECT_NE(text->find(band.get<std::string>()), std::string::npos)
                << "level " << entry["level"] << " rating " << rating;
        }
    }
}

TEST(Rubric, TextListsBandsStrongestFirst) {
    const std::string t = rubric_text(PedLevel::HigherOrderThinking);
    EXPECT_EQ(t.rfind("Level 3: Higher-Order Thinking\n", 0), 0u);
    const auto strong = t.find("- Strong (2): ");
    const auto weak = t.find("- Weak (1): ");
    const auto none = t.find("- Not Present (0): ");
    const auto na = t.find("- Not Applicable (NA): ");
    EXPECT_LT(strong, weak);
    EXPECT_LT(weak, none);
    EXPECT_LT(none, na);
    EXPECT_NE(na, std::string::npos);
}

TEST(Rubric, DigestIsStableHex) {
    EXPECT_EQ(rubric_digest().size(), 64u);
    EXPECT_EQ(rubric_digest(), rubric_digest());
}

TEST(Rubric, LevelRange) {
    EXPECT_EQ(level_from_index(5), PedLevel::CollaborativeKnowledgeConstruction);
    EXPECT_THROW(level_from_index(0), ValidationError);
    EXPECT_THROW(level_from_index(6), ValidationError);
}

TEST(ParseRating, BareTokens) {
    EXPECT_EQ(parse_rating("2"), Rating::Two);
    EXPECT_EQ(parse_rating("  \"NA\"\n"), Rating::NA);
    EXPECT_EQ(parse_rating("na"), Rating::NA);
    EXPECT_EQ(parse_rating("1, 1"), Rating::One);
    EXPECT_THROW(parse_rating("1 or 2"), UnparseableError);
    EXPECT_THROW(parse_rating("1 2"), UnparseableError);
}

TEST(ParseRating, LastRatingLineWins) {
    EXPECT_EQ(parse_rating("The response is clear.\nRating: 2"), Rating::Two);
    EXPECT_EQ(parse_rating("Initial rating: 0. After review, final rating: NA"), Rating::NA);
    EXPECT_EQ(parse_rating("**Rating:** 1"), Rating::One);
}

TEST(ParseRating, RejectsNoise) {
    EXPECT_THROW(parse_rating(""), UnparseableError);
    EXPECT_THROW(parse_rating("I cannot decide."), UnparseableError);
    EXPECT_THROW(parse_rating("Rating: 3"), UnparseableError);
    EXPECT_THROW(parse_rating("Rating: 10"), UnparseableError);
    EXPECT_THROW(parse_rating("Rating: nab"), UnparseableError);
}

TEST(ParseRating, RatingTokenMustBeNearTheEnd) {
    const std::string tail(250, 'x');
    EXPECT_THROW(parse_rating("Rating: 2 " + tail), UnparseableError);
}

TEST(ParseRating, KeepsRawTextOnFailure) {
    try {
        parse_rating("no idea");
        FAIL();
    } catch (const UnparseableError& e) {
        EXPECT_EQ(e.raw(), "no idea");
    }
}

TEST(RatingDistance, Classes) {
    EXPECT_EQ(rating_distance(Rating::One, Rating::One), Distance::Zero);
    EXPECT_EQ(rating_distance(Rating::NA, Rating::NA), Distance::Zero);
    EXPECT_EQ(rating_distance(Rating::Zero, Rating::One), Distance::One);
    EXPECT_EQ(rating_distance(Rating::Two, Rating::Zero), Distance::Two);
    EXPECT_EQ(rating_distance(Rating::NA, Rating::Zero), Distance::Substantive);
}
