#include "support.hpp"

#include "pedeval/error.hpp"
#include "pedeval/optimize.hpp"

#include <gtest/gtest.h>

using namespace pedeval;
using namespace pedeval::testing;

namespace {

OptimizeConfig small_run(std::uint64_t seed) {
    OptimizeConfig opt;
    opt.seed = seed;
    opt.steps = 4;
    opt.minibatch_size = 6;
    opt.proposals_per_step = 3;
    opt.checkpoint_every = 2;
    return opt;
}

}  // namespace

TEST(Optimize, RiggedJudgeImproves) {
    auto provider = mock_provider(rigged_judge());
    const auto train = rigged_train_set(24, 1);
    const auto result = simba_optimize(*provider, PipelineConfig{}, baseline_program(), train, small_run(1));
    EXPECT_GT(result.best_accuracy, result.baseline_accuracy);
    EXPECT_DOUBLE_EQ(result.best_accuracy, 1.0);
    ASSERT_EQ(result.program.rules.size(), 1u);
    EXPECT_EQ(result.program.rules[0], kMagicRule);
    EXPECT_EQ(result.steps.size(), 4u);
    EXPECT_TRUE(result.steps[0].adopted);
    // Re-scoring the returned program reproduces the reported accuracy.
    EXPECT_DOUBLE_EQ(outcome_accuracy(score_program(*provider, PipelineConfig{}, result.program, train)),
                     result.best_accuracy);
}

TEST(Optimize, ConstantJudgeKeepsBaseline) {
    auto provider = mock_provider(constant_judge(Rating::One));
    const auto train = rigged_train_set(20, 2);
    const auto base = baseline_program();
    const auto result = simba_optimize(*provider, PipelineConfig{}, base, train, small_run(2));
    EXPECT_EQ(result.program.id, base.id);
    EXPECT_EQ(result.best_accuracy, result.baseline_accuracy);
    for (const auto& s : result.steps) EXPECT_FALSE(s.adopted);
}

TEST(Optimize, DeterministicForSeed) {
    auto a = mock_provider(rigged_judge(), 1);
    auto b = mock_provider(rigged_judge(), 8);
    const auto train = rigged_train_set(16, 3);
    const auto ra = simba_optimize(*a, PipelineConfig{}, baseline_program(), train, small_run(3));
    const auto rb = simba_optimize(*b, PipelineConfig{}, baseline_program(), train, small_run(3));
    EXPECT_EQ(ra.program, rb.program);
    EXPECT_EQ(ra.best_accuracy, rb.best_accuracy);
}

TEST(Optimize, CheckpointsOnScheduleAndAtEnd) {
    auto provider = mock_provider(constant_judge(Rating::Zero));
    const auto train = rigged_train_set(10, 4);
    auto opt = small_run(4);
    opt.steps = 5;
    opt.checkpoint_every = 2;
    const auto result = simba_optimize(*provider, PipelineConfig{}, baseline_program(), train, opt);
    std::vector<std::size_t> checkpointed;
    for (const auto& s : result.steps) {
        if (s.checkpoint) checkpointed.push_back(s.step);
    }
    EXPECT_EQ(checkpointed, (std::vector<std::size_t>{2, 4, 5}));
}

TEST(Optimize, RejectsBadConfig) {
    auto provider = mock_provider();
    const auto train = rigged_train_set(4, 5);
    auto opt = small_run(5);
    opt.minibatch_size = 10;
    EXPECT_THROW(simba_optimize(*provider, PipelineConfig{}, baseline_program(), train, opt), ValidationError);
    EXPECT_THROW(simba_optimize(*provider, PipelineConfig{}, baseline_program(), {}, small_run(5)), ValidationError);
    auto mixed = train;
    mixed[1].level = PedLevel::ClarifyMisunderstandings;
    opt = small_run(5);
    opt.minibatch_size = 2;
    opt.strategy = DataStrategy::LevelSpecific;
    EXPECT_THROW(simba_optimize(*provider, PipelineConfig{}, baseline_program(), mixed, opt), ValidationError);
}

TEST(Proposals, AlternateRuleAndExemplar) {
    auto provider = mock_provider(rigged_judge());
    const auto batch = rigged_train_set(8, 6);
    std::vector<ExampleOutcome> outcomes(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        outcomes[i].correct = i % 2 == 0;
        outcomes[i].predicted = batch[i].gold;
    }
    const auto base = baseline_program();
    const auto cands = propose_candidates(*provider, PipelineConfig{}, base, batch, outcomes, 4);
    ASSERT_EQ(cands.size(), 3u);  // the second rule slot repeats the first rule
    EXPECT_EQ(cands[0].rules, std::vector<std::string>{std::string(kMagicRule)});
    ASSERT_EQ(cands[1].exemplars.size(), 1u);
    EXPECT_EQ(cands[1].exemplars[0].pair_id, batch[0].item.pair.id);
    ASSERT_EQ(cands[2].exemplars.size(), 1u);
    EXPECT_EQ(cands[2].exemplars[0].pair_id, batch[2].item.pair.id);
    for (const auto& c : cands) EXPECT_NE(c.id, base.id);
}

TEST(Proposals, NoFailuresMeansNoRules) {
    auto provider = mock_provider(rigged_judge());
    const auto batch = rigged_train_set(4, 7);
    std::vector<ExampleOutcome> outcomes(batch.size(), ExampleOutcome{Rating::Zero, "", true});
    std::vector<std::string> notes;
    const auto cands = propose_candidates(*provider, PipelineConfig{}, baseline_program(), batch, outcomes, 2, &notes);
    ASSERT_EQ(cands.size(), 1u);
    EXPECT_TRUE(cands[0].rules.empty());
}

TEST(Proposals, FailedCallIsNotedAndSkipped) {
    auto provider = mock_provider([](const GenerationRequest& r) -> std::optional<std::string> {
        if (r.tag == "introspect") throw ValidationError("backend refused");
        return std::nullopt;
    });
    const auto batch = rigged_train_set(4, 8);
    std::vector<ExampleOutcome> outcomes(batch.size());
    std::vector<std::string> notes;
    const auto cands = propose_candidates(*provider, PipelineConfig{}, baseline_program(), batch, outcomes, 1, &notes);
    EXPECT_TRUE(cands.empty());
    ASSERT_EQ(notes.size(), 1u);
    EXPECT_NE(notes[0].find("rule slot 0 skipped"), std::string::npos);
}

TEST(Optimize, TrainExamplesSkipLevelFiveWithoutContext) {
    const auto corpus = fixture_corpus();
    PostResponsePair cf{"cf", "p01", Condition::ContextFree, "g", "r", {}, false};
    PostResponsePair fc{"fc", "p01", Condition::ForumContext, "g", "r", {}, false};
    const auto items = make_judge_items(std::vector<PostResponsePair>{cf, fc}, corpus);
    const std::vector<RatingRecord> gold{
        {"cf", "r", PedLevel::CollaborativeKnowledgeConstruction, Rating::One, "", Provenance::Judge},
        {"fc", "r", PedLevel::CollaborativeKnowledgeConstruction, Rating::Two},
        {"fc", "r", PedLevel::ClarifyMisunderstandings, Rating::Zero}};
    const auto ex = make_train_examples(items, gold, kAllLevels);
    ASSERT_EQ(ex.size(), 2u);
    EXPECT_EQ(ex[0].item.pair.id, "fc");
    EXPECT_EQ(ex[0].level, PedLevel::ClarifyMisunderstandings);
    EXPECT_EQ(ex[1].gold, Rating::Two);
}
