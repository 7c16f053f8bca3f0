#pragma once

#include "pedeval/corpus.hpp"
#include "pedeval/rubric.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pedeval {

/// Counts indexed [gold][pred] by rating_slot().
using ConfusionMatrix = std::array<std::array<std::size_t, 4>, 4>;

ConfusionMatrix confusion_matrix(std::span<const Rating> pred, std::span<const Rating> gold);

/// Fraction of exact matches. Throws ValidationError on empty or unequal input.
double accuracy(std::span<const Rating> pred, std::span<const Rating> gold);

/// Support-weighted mean of per-class F1 over `classes`. A class with
/// precision + recall = 0 scores 0; a class with no gold support has weight 0.
double weighted_f1(std::span<const Rating> pred, std::span<const Rating> gold,
                   std::span<const Rating> classes = kAllRatings);

/// ICC(2,1) on an n x 2 numeric matrix: two-way random effects, absolute
/// agreement, single rater. nullopt when the denominator is zero.
/// Throws ValidationError on fewer than 2 rows or unequal columns.
std::optional<double> icc_2_1(std::span<const double> rater_a, std::span<const double> rater_b);

/// ICC(2,1) over rating pairs, dropping any item where either side is NA.
std::optional<double> icc(std::span<const Rating> rater_a, std::span<const Rating> rater_b);

struct LevelMetrics {
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    std::size_t n{0};
    double accuracy{0.0};
    double weighted_f1{0.0};
};

struct AgreementReport {
    std::optional<double> icc;  ///< joint over all levels; nullopt = undefined
    std::size_t n_items{0};
    double frac_gt1{0.0};
    double frac_eq1{0.0};
    std::size_t na_conflicts{0};
    /// Per-level ICC and their mean, reported alongside the joint value.
    std::map<PedLevel, std::optional<double>> icc_by_level;
    std::optional<double> icc_level_mean;
};

/// Counts of distance classes between two raters' aligned records.
/// Records are aligned by (pair_id, level); throws ValidationError listing
/// unmatched keys. Only frac_gt1, frac_eq1, na_conflicts and n_items are set.
AgreementReport discrepancy_stats(std::span<const RatingRecord> a, std::span<const RatingRecord> b);

/// discrepancy_stats plus joint and per-level ICC.
AgreementReport agreement_report(std::span<const RatingRecord> a, std::span<const RatingRecord> b);

/// Histogram of (with-context minus without-context) scores.
struct ScoreDiffHistogram {
    std::array<std::size_t, 5> bins{};  ///< index 0 -> -2 ... index 4 -> +2
    std::size_t excluded{0};            ///< pairs involving NA
    std::size_t aligned{0};

    std::size_t at(int diff) const { return bins.at(static_cast<std::size_t>(diff + 2)); }
    std::size_t binned() const;
    /// Share of binned pairs whose score dropped by 1 or 2.
    double fraction_decreasing() const;
};

/// Position-aligned ratings. Throws ValidationError when empty or unequal.
ScoreDiffHistogram score_diff_distribution(std::span<const Rating> with_ctx,
                                           std::span<const Rating> without_ctx);

/// Aligns records at `level` by the underlying post (pair_id -> post_id via
/// `post_of_pair`). Throws ValidationError when nothing aligns.
ScoreDiffHistogram score_diff_distribution(std::span<const RatingRecord> with_ctx,
                                           std::span<const RatingRecord> without_ctx, PedLevel level,
                                           const std::map<std::string, std::string>& post_of_pair);

}  // namespace pedeval
