#include "support.hpp"

#include "pedeval/annotate.hpp"
#include "pedeval/error.hpp"
#include "pedeval/metrics.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace pedeval;
using namespace pedeval::testing;

namespace {

void rate_all(AnnotationService& svc, const AnnotationPlan& plan) {
    for (std::size_t i = 0; i < plan.pairs.size(); ++i) rate_pair(svc, plan, i, false);
    for (std::size_t i = 0; i < plan.pairs.size(); ++i) rate_pair(svc, plan, i, true);
}

}  // namespace

TEST(Discrepancy, Classes) {
    EXPECT_FALSE(classify_discrepancy(Rating::One, Rating::One));
    EXPECT_FALSE(classify_discrepancy(Rating::NA, Rating::NA));
    EXPECT_EQ(classify_discrepancy(Rating::One, Rating::Two), DiscrepancyKind::Minor);
    EXPECT_EQ(classify_discrepancy(Rating::One, Rating::Zero), DiscrepancyKind::Minor);
    EXPECT_EQ(classify_discrepancy(Rating::Zero, Rating::Two), DiscrepancyKind::Substantive);
    EXPECT_EQ(classify_discrepancy(Rating::NA, Rating::Zero), DiscrepancyKind::Substantive);
    EXPECT_EQ(classify_discrepancy(Rating::Two, Rating::NA), DiscrepancyKind::Substantive);
}

TEST(Discrepancy, Majority) {
    const std::vector<Rating> two_one{Rating::One, Rating::Two, Rating::One};
    EXPECT_EQ(majority_of(two_one), Rating::One);
    const std::vector<Rating> split{Rating::Zero, Rating::Two, Rating::NA};
    EXPECT_FALSE(majority_of(split));
}

TEST(Annotation, LevelsFollowCondition) {
    EXPECT_EQ(levels_for(Condition::ContextFree).size(), 4u);
    EXPECT_EQ(levels_for(Condition::ForumContext).size(), 5u);
    EXPECT_EQ(levels_for(Condition::ForumContext).back(), PedLevel::CollaborativeKnowledgeConstruction);
}

TEST(Annotation, QueueMatchesPlantedPlan) {
    const auto plan = make_annotation_plan(40, 11, true);
    AnnotationService svc(study_setup(plan));
    rate_all(svc, plan);
    const auto queue = svc.adjudication_queue();
    ASSERT_EQ(queue.size(), plan.planted.size());
    std::size_t minor = 0;
    for (std::size_t k = 0; k < queue.size(); ++k) {
        const auto& want = plan.planted[k];
        EXPECT_EQ(queue[k].pair_id, plan.pairs[want.pair_index].id);
        EXPECT_EQ(queue[k].level, want.level);
        EXPECT_EQ(queue[k].kind, want.kind);
        EXPECT_EQ(queue[k].rating_a, want.rating_a);
        EXPECT_EQ(queue[k].rating_b, want.rating_b);
        const std::string expected_assignee =
            want.kind == DiscrepancyKind::Minor ? svc.reviewers()[minor++ % 3] : std::string("adjudicator");
        EXPECT_EQ(queue[k].assignee, expected_assignee) << queue[k].id;
    }
    EXPECT_GT(minor, 3u);
}

TEST(Annotation, MilestoneAtExactlyN) {
    const auto plan = make_annotation_plan(85, 12, true);
    AnnotationService svc(study_setup(plan, 80));
    for (std::size_t i = 0; i < 79; ++i) {
        rate_pair(svc, plan, i, false);
        rate_pair(svc, plan, i, true);
    }
    // A half-rated pair does not count.
    rate_pair(svc, plan, 80, false);
    const auto pending = svc.milestone_report();
    ASSERT_TRUE(std::holds_alternative<MilestonePending>(pending));
    EXPECT_EQ(std::get<MilestonePending>(pending).remaining, 1u);

    rate_pair(svc, plan, 79, false);
    rate_pair(svc, plan, 79, true);
    const auto ready = svc.milestone_report();
    ASSERT_TRUE(std::holds_alternative<MilestoneReport>(ready));
    const auto& rep = std::get<MilestoneReport>(ready);
    ASSERT_EQ(rep.pair_ids.size(), 80u);

    // Independent assembly: rows in (pair id, level) order.
    std::vector<Rating> a, b;
    for (std::size_t i = 0; i < 80; ++i) {
        for (auto l : levels_for(plan.pairs[i].condition)) {
            a.push_back(plan.ratings_a[i][static_cast<std::size_t>(level_index(l) - 1)]);
            b.push_back(rating_b(plan, i, l));
        }
    }
    const auto expected = pedeval::icc(a, b);
    ASSERT_TRUE(expected && rep.report.icc);
    EXPECT_NEAR(*rep.report.icc, *expected, 1e-12);

    // Further completions do not move the window.
    rate_pair(svc, plan, 80, true);
    EXPECT_EQ(std::get<MilestoneReport>(svc.milestone_report()).pair_ids, rep.pair_ids);
}

TEST(Annotation, PerfectAgreementIccIsOne) {
    const auto plan = make_annotation_plan(80, 13, false);
    AnnotationService svc(study_setup(plan, 80));
    rate_all(svc, plan);
    const auto& rep = std::get<MilestoneReport>(svc.milestone_report());
    ASSERT_TRUE(rep.report.icc);
    EXPECT_NEAR(*rep.report.icc, 1.0, 1e-12);
    EXPECT_EQ(rep.report.frac_eq1, 0.0);
    EXPECT_TRUE(svc.adjudication_queue().empty());
    for (const auto& t : svc.tasks()) EXPECT_EQ(t.state, TaskState::Final);
}

TEST(Annotation, TaskStates) {
    const auto plan = make_annotation_plan(10, 14, true);
    AnnotationService svc(study_setup(plan));
    const std::string id = plan.pairs[3].id;  // planted Substantive at Level 3
    EXPECT_EQ(svc.task(id).state, TaskState::Open);
    rate_pair(svc, plan, 3, false);
    EXPECT_EQ(svc.task(id).state, TaskState::PartiallyRated);
    rate_pair(svc, plan, 3, true);
    EXPECT_EQ(svc.task(id).state, TaskState::FullyRated);
    const auto item = svc.adjudication_queue().front();
    EXPECT_EQ(item.id, id + ":L3");
    EXPECT_THROW(svc.resolve(item.id, "adjudicator", Rating::Two,
                             std::vector<Rating>{Rating::Zero, Rating::Two, Rating::One}),
                 ValidationError);
    EXPECT_TRUE(svc.adjudication_queue().front().needs_discussion);
    EXPECT_EQ(svc.task(id).state, TaskState::Adjudicating);
    svc.resolve(item.id, "adjudicator", Rating::Two, std::vector<Rating>{Rating::Two, Rating::Two, Rating::One});
    // Pair 3 has one planted item only (3 % 9 != 4, 3 % 6 != 5, 3 % 5 == 3).
    EXPECT_EQ(svc.task(id).state, TaskState::Final);
}

TEST(Annotation, ResolveRules) {
    const auto plan = make_annotation_plan(12, 15, true);
    AnnotationService svc(study_setup(plan));
    rate_all(svc, plan);
    const auto queue = svc.adjudication_queue();
    const AdjudicationItem* minor = nullptr;
    const AdjudicationItem* substantive = nullptr;
    for (const auto& it : queue) {
        if (it.kind == DiscrepancyKind::Minor && !minor) minor = &it;
        if (it.kind == DiscrepancyKind::Substantive && !substantive) substantive = &it;
    }
    ASSERT_TRUE(minor && substantive);

    const std::string other = minor->assignee == "rater-a" ? "rater-b" : "rater-a";
    EXPECT_THROW(svc.resolve(minor->id, other, Rating::One), PreconditionError);
    EXPECT_THROW(svc.resolve(minor->id, "stranger", Rating::One), NotFoundError);
    const auto rec = svc.resolve(minor->id, minor->assignee, Rating::One);
    EXPECT_EQ(rec.provenance, Provenance::Adjudicated);
    EXPECT_EQ(rec.rater_id, minor->assignee);
    EXPECT_THROW(svc.resolve(minor->id, minor->assignee, Rating::One), ConflictError);

    EXPECT_THROW(svc.resolve(substantive->id, "adjudicator", Rating::One), ValidationError);
    EXPECT_THROW(svc.resolve(substantive->id, "adjudicator", Rating::One,
                             std::vector<Rating>{Rating::Two, Rating::Two, Rating::One}),
                 ValidationError);
    EXPECT_NO_THROW(svc.resolve(substantive->id, "rater-b", Rating::Two,
                                std::vector<Rating>{Rating::Two, Rating::Two, Rating::One}));
    EXPECT_THROW(svc.resolve("nope:L1", "adjudicator", Rating::One), NotFoundError);

    const auto p = svc.progress();
    EXPECT_EQ(p.queue_resolved, 2u);
    EXPECT_EQ(p.queue_open, queue.size() - 2);
    EXPECT_EQ(p.completed_pairs, 12u);
}

TEST(Annotation, SubmitErrors) {
    const auto plan = make_annotation_plan(4, 16, false);
    AnnotationService svc(study_setup(plan));
    const std::string cf = plan.pairs[0].id;
    EXPECT_THROW(svc.submit_rating("stranger", cf, PedLevel::ClarifyMisunderstandings, Rating::One), NotFoundError);
    EXPECT_THROW(svc.submit_rating("adjudicator", cf, PedLevel::ClarifyMisunderstandings, Rating::One),
                 NotFoundError);
    EXPECT_THROW(svc.submit_rating("rater-a", "ann-999", PedLevel::ClarifyMisunderstandings, Rating::One),
                 NotFoundError);
    EXPECT_THROW(svc.submit_rating("rater-a", cf, PedLevel::CollaborativeKnowledgeConstruction, Rating::One),
                 PreconditionError);
    svc.submit_rating("rater-a", cf, PedLevel::ClarifyMisunderstandings, Rating::One);
    EXPECT_THROW(svc.submit_rating("rater-a", cf, PedLevel::ClarifyMisunderstandings, Rating::Two), ConflictError);
    EXPECT_EQ(svc.records().size(), 1u);
}

TEST(Annotation, NextTaskFollowsStudyOrder) {
    const auto plan = make_annotation_plan(3, 17, false);
    AnnotationService svc(study_setup(plan));
    EXPECT_EQ(svc.next_task("rater-a")->ordinal, 1u);
    rate_pair(svc, plan, 0, false);
    EXPECT_EQ(svc.next_task("rater-a")->pair_id, plan.pairs[1].id);
    EXPECT_EQ(svc.next_task("rater-b")->pair_id, plan.pairs[0].id);
    rate_pair(svc, plan, 1, false);
    rate_pair(svc, plan, 2, false);
    EXPECT_FALSE(svc.next_task("rater-a"));
    EXPECT_THROW(svc.next_task("adjudicator"), NotFoundError);
}

TEST(Annotation, LogReplayRestoresState) {
    const auto dir = scratch_dir("annotation-log");
    const auto log = dir / "study" / "events.jsonl";
    const auto plan = make_annotation_plan(20, 18, true);
    std::vector<AdjudicationItem> queue;
    std::vector<RatingRecord> records;
    {
        AnnotationService svc(study_setup(plan, 80, log));
        rate_all(svc, plan);
        const auto first = svc.adjudication_queue().front();
        if (first.kind == DiscrepancyKind::Minor) {
            svc.resolve(first.id, first.assignee, first.rating_a);
        } else {
            EXPECT_THROW(svc.resolve(first.id, "adjudicator", Rating::One,
                                     std::vector<Rating>{Rating::Zero, Rating::One, Rating::Two}),
                         ValidationError);
        }
        queue = svc.adjudication_queue();
        records = svc.records();
    }
    AnnotationService again(study_setup(plan, 80, log));
    EXPECT_EQ(again.records(), records);
    const auto replayed = again.adjudication_queue();
    ASSERT_EQ(replayed.size(), queue.size());
    for (std::size_t i = 0; i < queue.size(); ++i) {
        EXPECT_EQ(replayed[i].id, queue[i].id);
        EXPECT_EQ(replayed[i].assignee, queue[i].assignee);
        EXPECT_EQ(replayed[i].resolution, queue[i].resolution);
        EXPECT_EQ(replayed[i].needs_discussion, queue[i].needs_discussion);
    }
}

TEST(Annotation, CorruptLogIsRejected) {
    const auto dir = scratch_dir("annotation-corrupt");
    const auto plan = make_annotation_plan(2, 19, false);
    {
        std::ofstream(dir / "log.jsonl") << "{\"event\":\"rating\",\"record\":{}}\n";
    }
    try {
        AnnotationService svc(study_setup(plan, 80, dir / "log.jsonl"));
        FAIL();
    } catch (const CorruptionError& e) {
        EXPECT_NE(std::string(e.what()).find("log.jsonl:1"), std::string::npos) << e.what();
    }
}

TEST(Annotation, SetupValidation) {
    const auto plan = make_annotation_plan(2, 20, false);
    auto s = study_setup(plan);
    s.rater_b = s.rater_a;
    EXPECT_THROW(AnnotationService{s}, ValidationError);
    s = study_setup(plan);
    s.pairs.push_back(s.pairs[0]);
    EXPECT_THROW(AnnotationService{s}, ValidationError);
    s = study_setup(plan);
    s.pairs[0].post_id = "missing";
    EXPECT_THROW(AnnotationService{s}, ValidationError);
}

TEST(Annotation, ConcurrentSubmissions) {
    const auto plan = make_annotation_plan(30, 21, true);
    AnnotationService svc(study_setup(plan));
    std::thread ta([&] { for (std::size_t i = 0; i < 30; ++i) rate_pair(svc, plan, i, false); });
    std::thread tb([&] { for (std::size_t i = 0; i < 30; ++i) rate_pair(svc, plan, i, true); });
    ta.join();
    tb.join();
    EXPECT_EQ(svc.progress().completed_pairs, 30u);
    EXPECT_EQ(svc.adjudication_queue().size(), plan.planted.size());
}

TEST(Annotation, PairBundle) {
    const auto plan = make_annotation_plan(2, 22, false);
    AnnotationService svc(study_setup(plan));
    const auto cf = svc.pair_bundle(plan.pairs[0].id);
    EXPECT_EQ(cf["response"], plan.pairs[0].response_text);
    EXPECT_EQ(cf["response_stripped"], "Response 001");
    EXPECT_EQ(cf["rubric"]["levels"].size(), 4u);
    EXPECT_EQ(cf["rubric"]["levels"][0]["bands"].size(), 4u);
    EXPECT_TRUE(cf["topic"].is_null());
    EXPECT_EQ(svc.pair_bundle(plan.pairs[1].id)["rubric"]["levels"].size(), 5u);
    EXPECT_THROW(svc.pair_bundle("nope"), NotFoundError);
}
