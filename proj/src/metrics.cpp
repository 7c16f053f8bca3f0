#include "pedeval/metrics.hpp"

#include "pedeval/error.hpp"

#include <cmath>
#include <set>

namespace pedeval {

namespace {

void check_paired(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                              std::to_string(b) + ")");
    }
    if (a == 0) throw ValidationError(std::string(what) + ": empty input");
}

std::string key_string(const RatingKey& k) {
    return k.first + "@L" + std::to_string(level_index(k.second));
}

std::map<RatingKey, Rating> keyed(std::span<const RatingRecord> records, const char* side) {
    std::map<RatingKey, Rating> out;
    for (const auto& r : records) {
        if (!out.emplace(RatingKey{r.pair_id, r.level}, r.rating).second) {
            throw ValidationError(std::string("discrepancy_stats: duplicate key ") +
                                  key_string({r.pair_id, r.level}) + " in rater " + side);
        }
    }
    return out;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const Rating> pred, std::span<const Rating> gold) {
    check_paired(pred.size(), gold.size(), "confusion_matrix");
    ConfusionMatrix cm{};
    for (std::size_t i = 0; i < pred.size(); ++i) ++cm[rating_slot(gold[i])][rating_slot(pred[i])];
    return cm;
}

double accuracy(std::span<const Rating> pred, std::span<const Rating> gold) {
    check_paired(pred.size(), gold.size(), "accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gold[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double weighted_f1(std::span<const Rating> pred, std::span<const Rating> gold,
                   std::span<const Rating> classes) {
    const ConfusionMatrix cm = confusion_matrix(pred, gold);
    const double n = static_cast<double>(pred.size());
    double total = 0.0;
    for (Rating c : classes) {
        const std::size_t ci = rating_slot(c);
        std::size_t predicted = 0, support = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            predicted += cm[k][ci];
            support += cm[ci][k];
        }
        if (support == 0) continue;
        const double tp = static_cast<double>(cm[ci][ci]);
        const double precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
        const double recall = tp / static_cast<double>(support);
        const double f1 =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        total += static_cast<double>(support) / n * f1;
    }
    return total;
}

std::optional<double> icc_2_1(std::span<const double> rater_a, std::span<const double> rater_b) {
    if (rater_a.size() != rater_b.size()) throw ValidationError("icc: columns differ in length");
    const std::size_t n = rater_a.size();
    if (n < 2) throw ValidationError("icc: need at least 2 usable items, got " + std::to_string(n));
    constexpr double k = 2.0;
    const double nd = static_cast<double>(n);

    double sum_a = 0, sum_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_a += rater_a[i];
        sum_b += rater_b[i];
    }
    const double mean_a = sum_a / nd;
    const double mean_b = sum_b / nd;
    const double grand = (sum_a + sum_b) / (k * nd);

    double ss_rows = 0, ss_err = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double row = (rater_a[i] + rater_b[i]) / k;
        ss_rows += (row - grand) * (row - grand);
        const double ea = rater_a[i] - row - mean_a + grand;
        const double eb = rater_b[i] - row - mean_b + grand;
        ss_err += ea * ea + eb * eb;
    }
    ss_rows *= k;
    const double ss_cols = nd * ((mean_a - grand) * (mean_a - grand) + (mean_b - grand) * (mean_b - grand));

    const double ms_rows = ss_rows / (nd - 1);
    const double ms_cols = ss_cols / (k - 1);
    const double ms_err = ss_err / ((nd - 1) * (k - 1));

    const double denom = ms_rows + (k - 1) * ms_err + (k / nd) * (ms_cols - ms_err);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    return (ms_rows - ms_err) / denom;
}

std::optional<double> icc(std::span<const Rating> rater_a, std::span<const Rating> rater_b) {
    if (rater_a.size() != rater_b.size()) throw ValidationError("icc: rater lists differ in length");
    std::vector<double> a, b;
    for (std::size_t i = 0; i < rater_a.size(); ++i) {
        auto va = rating_value(rater_a[i]);
        auto vb = rating_value(rater_b[i]);
        if (!va || !vb) continue;
        a.push_back(*va);
        b.push_back(*vb);
    }
    return icc_2_1(a, b);
}

AgreementReport discrepancy_stats(std::span<const RatingRecord> a, std::span<const RatingRecord> b) {
    const auto ka = keyed(a, "a");
    const auto kb = keyed(b, "b");
    std::vector<std::string> unmatched;
    for (const auto& [k, _] : ka) {
        if (!kb.count(k)) unmatched.push_back(key_string(k));
    }
    for (const auto& [k, _] : kb) {
        if (!ka.count(k)) unmatched.push_back(key_string(k));
    }
    if (!unmatched.empty()) {
        std::string msg = "discrepancy_stats: misaligned keys:";
        for (const auto& k : unmatched) msg += " " + k;
        throw ValidationError(msg);
    }
    AgreementReport rep;
    rep.n_items = ka.size();
    if (rep.n_items == 0) return rep;
    std::size_t gt1 = 0, eq1 = 0;
    for (const auto& [k, ra] : ka) {
        const Rating rb = kb.at(k);
        switch (rating_distance(ra, rb)) {
            case Distance::Zero: break;
            case Distance::One: ++eq1; break;
            case Distance::Two: ++gt1; break;
            case Distance::Substantive:
                ++gt1;
                ++rep.na_conflicts;
                break;
        }
    }
    rep.frac_gt1 = static_cast<double>(gt1) / static_cast<double>(rep.n_items);
    rep.frac_eq1 = static_cast<double>(eq1) / static_cast<double>(rep.n_items);
    return rep;
}

AgreementReport agreement_report(std::span<const RatingRecord> a, std::span<const RatingRecord> b) {
    AgreementReport rep = discrepancy_stats(a, b);
    const auto ka = keyed(a, "a");
    const auto kb = keyed(b, "b");
    std::vector<Rating> ja, jb;
    std::map<PedLevel, std::pair<std::vector<Rating>, std::vector<Rating>>> per_level;
    for (const auto& [k, ra] : ka) {
        ja.push_back(ra);
        jb.push_back(kb.at(k));
        per_level[k.second].first.push_back(ra);
        per_level[k.second].second.push_back(kb.at(k));
    }
    auto safe_icc = [](const std::vector<Rating>& x, const std::vector<Rating>& y) -> std::optional<double> {
        try {
            return icc(x, y);
        } catch (const ValidationError&) {
            return std::nullopt;
        }
    };
    rep.icc = safe_icc(ja, jb);
    double sum = 0;
    std::size_t defined = 0;
    for (const auto& [level, cols] : per_level) {
        auto v = safe_icc(cols.first, cols.second);
        rep.icc_by_level[level] = v;
        if (v) {
            sum += *v;
            ++defined;
        }
    }
    if (defined > 0) rep.icc_level_mean = sum / static_cast<double>(defined);
    return rep;
}

std::size_t ScoreDiffHistogram::binned() const {
    std::size_t s = 0;
    for (auto b : bins) s += b;
    return s;
}

double ScoreDiffHistogram::fraction_decreasing() const {
    const std::size_t total = binned();
    if (total == 0) return 0.0;
    return static_cast<double>(at(-1) + at(-2)) / static_cast<double>(total);
}

ScoreDiffHistogram score_diff_distribution(std::span<const Rating> with_ctx,
                                           std::span<const Rating> without_ctx) {
    check_paired(with_ctx.size(), without_ctx.size(), "score_diff_distribution");
    ScoreDiffHistogram h;
    h.aligned = with_ctx.size();
    for (std::size_t i = 0; i < with_ctx.size(); ++i) {
        auto w = rating_value(with_ctx[i]);
        auto wo = rating_value(without_ctx[i]);
        if (!w || !wo) {
            ++h.excluded;
            continue;
        }
        ++h.bins[static_cast<std::size_t>(*w - *wo + 2)];
    }
    return h;
}

ScoreDiffHistogram score_diff_distribution(std::span<const RatingRecord> with_ctx,
                                           std::span<const RatingRecord> without_ctx, PedLevel level,
                                           const std::map<std::string, std::string>& post_of_pair) {
    auto by_post = [&](std::span<const RatingRecord> recs, const char* side) {
        std::map<std::string, Rating> out;
        for (const auto& r : recs) {
            if (r.level != level) continue;
            auto it = post_of_pair.find(r.pair_id);
            if (it == post_of_pair.end()) {
                throw ValidationError("score_diff_distribution: unknown pair '" + r.pair_id + "'");
            }
            if (!out.emplace(it->second, r.rating).second) {
                throw ValidationError(std::string("score_diff_distribution: post '") + it->second +
                                      "' rated twice on the " + side + " side");
            }
        }
        return out;
    };
    const auto with_map = by_post(with_ctx, "with-context");
    const auto without_map = by_post(without_ctx, "without-context");
    std::vector<Rating> w, wo;
    for (const auto& [post, r] : with_map) {
        auto it = without_map.find(post);
        if (it == without_map.end()) continue;
        w.push_back(r);
        wo.push_back(it->second);
    }
    if (w.empty()) throw ValidationError("score_diff_distribution: no aligned pairs");
    return score_diff_distribution(w, wo);
}

}  // namespace pedeval
