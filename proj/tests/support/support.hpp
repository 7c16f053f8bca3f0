#pragma once

// Shared by the unit tests and the acceptance runner: fixture loading,
// independent oracles and scripted mock models.

#include "pedeval/annotate.hpp"
#include "pedeval/context.hpp"
#include "pedeval/corpus.hpp"
#include "pedeval/judge.hpp"
#include "pedeval/optimize.hpp"
#include "pedeval/provider.hpp"
#include "pedeval/synth.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pedeval::testing {

std::filesystem::path fixture_dir();
std::filesystem::path golden_dir();

/// Fixture posts (thread-initial only unless `with_replies`), courses, topics.
Corpus fixture_corpus(bool with_replies = false);

std::string read_file(const std::filesystem::path& p);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::shared_ptr<Provider> mock_provider(MockResponder responder = {}, std::size_t concurrency = 4);

/// Provider whose embeddings are looked up by exact text. Generation throws.
std::shared_ptr<Provider> table_embedding_provider(std::map<std::string, EmbeddingVector> by_text);

// ---- oracles ---------------------------------------------------------------

/// ICC(2,1) from the textbook sum-of-squares decomposition: the error term is
/// SST - SSR - SSC rather than a residual sum. nullopt for a zero denominator.
std::optional<double> oracle_icc(const std::vector<double>& a, const std::vector<double>& b);

/// Accuracy by counting matches in a list scan.
double oracle_accuracy(const std::vector<Rating>& pred, const std::vector<Rating>& gold);

/// Weighted F1 with every count taken by scanning the label lists.
double oracle_weighted_f1(const std::vector<Rating>& pred, const std::vector<Rating>& gold);

/// Exhaustive nearest neighbours: scores every same-scope post with its own
/// cosine loop, sorts all of them, keeps k.
std::vector<std::string> oracle_top_k(const std::vector<ForumPost>& posts,
                                      const std::vector<EmbeddingVector>& vectors, const ForumPost& target,
                                      std::size_t k);

struct RetrievalCorpus {
    std::vector<ForumPost> posts;
    std::vector<EmbeddingVector> vectors;  ///< parallel to posts
};

/// `n` posts over 3 courses and 6 topics (about a fifth without a topic).
/// Vectors are small non-zero integer vectors, so cosine ties are common.
RetrievalCorpus random_retrieval_corpus(std::uint64_t seed, std::size_t n);

/// Index built through the provider from the corpus' own vectors.
PostIndex index_of(const RetrievalCorpus& corpus);

/// Anchor phrases per prompt kind from the golden file.
std::map<std::string, std::vector<std::string>> prompt_anchors();

/// Lines of the form "<digit>. <Title>: <text>", the shape of a pedagogical goal.
std::size_t count_goal_lines(const std::string& prompt);

// ---- scripted models ---------------------------------------------------------

inline constexpr std::string_view kMagicRule = "Rate by the bracketed gold marker.";

/// Judge that returns the gold hidden as "[gold=X]" in the response under
/// judgement once the prompt carries kMagicRule, and "Rating: 0" before.
/// Introspection prompts are answered with kMagicRule.
MockResponder rigged_judge();

/// Judge that always answers `rating`, whatever the program says.
MockResponder constant_judge(Rating rating);

/// Training set whose responses carry "[gold=X]" markers. Gold values are
/// drawn from `seed`; roughly a quarter are 0 so the baseline is not hopeless.
std::vector<TrainExample> rigged_train_set(std::size_t n, std::uint64_t seed);

/// Real pairs at `level` with the given counts for ratings 0, 1, 2, NA.
std::vector<SynthPair> real_pool(PedLevel level, const std::array<std::size_t, 4>& counts);

// ---- annotation plan ---------------------------------------------------------

struct PlantedDisagreement {
    std::size_t pair_index;
    PedLevel level;
    Rating rating_a;
    Rating rating_b;
    DiscrepancyKind kind;  ///< stated by the plan, not derived
};

struct AnnotationPlan {
    std::vector<PostResponsePair> pairs;
    Corpus context;
    /// Rater A's rating for every (pair index, level).
    std::vector<std::vector<Rating>> ratings_a;
    std::vector<PlantedDisagreement> planted;
};

/// `n` pairs alternating ContextFree / ForumContext with seeded rater-A
/// ratings. Planted disagreements cover distances 1 and 2 and NA conflicts.
AnnotationPlan make_annotation_plan(std::size_t n, std::uint64_t seed, bool plant);

/// Rater B's rating under the plan.
Rating rating_b(const AnnotationPlan& plan, std::size_t pair_index, PedLevel level);

StudySetup study_setup(const AnnotationPlan& plan, std::size_t milestone_n = 80,
                       std::filesystem::path log = {});

/// Submits every rating of one rater for one pair.
void rate_pair(AnnotationService& svc, const AnnotationPlan& plan, std::size_t pair_index, bool rater_b);

// ---- command-line pipeline -------------------------------------------------------

/// Two raters' Human records for every judged (pair, level), derived from
/// the pair id alone, plus an Adjudicated record where they disagree.
std::vector<RatingRecord> derived_gold(std::span<const PostResponsePair> pairs);

struct PipelineRun {
    /// Data files by name relative to the run directory.
    std::map<std::string, std::string> outputs;
    /// Manifests with timestamps dropped and paths made relative.
    std::map<std::string, std::string> manifests;
    std::vector<std::string> failures;  ///< commands that exited non-zero, with stderr
};

/// ingest, triage, index, simulate (both conditions), judge Levels 1-5 and
/// report on the fixture posts through run_cli with the mock provider.
PipelineRun run_mock_pipeline(const std::filesystem::path& dir, std::size_t concurrency);

/// Manifests with concurrency_limit dropped too, for comparing runs at
/// different concurrency.
std::map<std::string, std::string> without_concurrency(const std::map<std::string, std::string>& manifests);

}  // namespace pedeval::testing
