#include "pedeval/report.hpp"

#include "pedeval/error.hpp"

#include <cstdio>
#include <set>

namespace pedeval {

using nlohmann::ordered_json;

namespace {

std::string pct(std::optional<double> v, int width) {
    char buf[32];
    if (v) {
        std::snprintf(buf, sizeof buf, "%*.1f", width, *v * 100.0);
    } else {
        std::snprintf(buf, sizeof buf, "%*s", width, "--");
    }
    return buf;
}

std::string fixed3(std::optional<double> v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace

std::optional<double> ClassifierRow::average_f1() const {
    if (levels.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& [l, m] : levels) sum += m.weighted_f1;
    return sum / static_cast<double>(levels.size());
}

std::optional<double> ClassifierRow::average_accuracy() const {
    if (levels.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& [l, m] : levels) sum += m.accuracy;
    return sum / static_cast<double>(levels.size());
}

ClassifierRow evaluate_classifier(const std::string& label, std::span<const JudgeVerdict> verdicts,
                                  std::span<const RatingRecord> gold) {
    if (verdicts.empty()) throw ValidationError("report: classifier '" + label + "' has no verdicts");
    std::set<PedLevel> present;
    for (const auto& v : verdicts) present.insert(v.level);
    ClassifierRow row{label, {}};
    for (auto level : present) row.levels[level] = evaluate_judge(verdicts, gold, level);
    return row;
}

ordered_json report_to_json(const Report& report) {
    if (report.rows.empty() && !report.agreement && report.score_diffs.empty()) {
        throw ValidationError("report: nothing to report");
    }
    ordered_json j = ordered_json::object();
    j["classifiers"] = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json r = {{"label", row.label}, {"levels", ordered_json::object()}};
        for (const auto& [l, m] : row.levels) {
            r["levels"][std::to_string(level_index(l))] = {
                {"n", m.n}, {"weighted_f1", m.weighted_f1}, {"accuracy", m.accuracy}};
        }
        r["average"] = {{"weighted_f1", opt(row.average_f1())}, {"accuracy", opt(row.average_accuracy())}};
        j["classifiers"].push_back(std::move(r));
    }
    if (report.agreement) {
        const auto& a = *report.agreement;
        ordered_json by_level = ordered_json::object();
        for (const auto& [l, v] : a.icc_by_level) by_level[std::to_string(level_index(l))] = opt(v);
        j["agreement"] = {{"icc", opt(a.icc)},
                          {"n_items", a.n_items},
                          {"frac_gt1", a.frac_gt1},
                          {"frac_eq1", a.frac_eq1},
                          {"na_conflicts", a.na_conflicts},
                          {"icc_by_level", std::move(by_level)},
                          {"icc_level_mean", opt(a.icc_level_mean)}};
    } else {
        j["agreement"] = nullptr;
    }
    j["score_differences"] = ordered_json::array();
    for (const auto& s : report.score_diffs) {
        ordered_json bins = ordered_json::object();
        for (int d = -2; d <= 2; ++d) bins[(d > 0 ? "+" : "") + std::to_string(d)] = s.histogram.at(d);
        j["score_differences"].push_back({{"level", level_index(s.level)},
                                          {"bins", std::move(bins)},
                                          {"binned", s.histogram.binned()},
                                          {"excluded", s.histogram.excluded},
                                          {"aligned", s.histogram.aligned},
                                          {"fraction_decreasing", s.histogram.fraction_decreasing()}});
    }
    return j;
}

std::string format_report(const Report& report) {
    report_to_json(report);  // same emptiness check
    std::string out;
    if (!report.rows.empty()) {
        std::size_t label_w = 10;
        for (const auto& row : report.rows) label_w = std::max(label_w, row.label.size());
        out += pad("Classifier", label_w);
        for (auto l : kAllLevels) out += " | " + pad("Level " + std::to_string(level_index(l)), 11);
        out += " | Average\n";
        out += pad("", label_w);
        for (std::size_t i = 0; i < kAllLevels.size() + 1; ++i) out += " |   F-1  Acc.";
        out += "\n";
        for (const auto& row : report.rows) {
            out += pad(row.label, label_w);
            for (auto l : kAllLevels) {
                auto it = row.levels.find(l);
                std::optional<double> f1, acc;
                if (it != row.levels.end()) {
                    f1 = it->second.weighted_f1;
                    acc = it->second.accuracy;
                }
                out += " | " + pct(f1, 5) + " " + pct(acc, 5);
            }
            out += " | " + pct(row.average_f1(), 5) + " " + pct(row.average_accuracy(), 5) + "\n";
        }
        out += "Scores are percentages; F-1 is support-weighted.\n";
    }
    if (report.agreement) {
        const auto& a = *report.agreement;
        if (!out.empty()) out += "\n";
        out += "Agreement over " + std::to_string(a.n_items) + " items\n";
        out += "  ICC(2,1) joint: " + fixed3(a.icc) + "\n";
        for (const auto& [l, v] : a.icc_by_level) {
            out += "  ICC(2,1) Level " + std::to_string(level_index(l)) + ": " + fixed3(v) + "\n";
        }
        out += "  ICC(2,1) level mean: " + fixed3(a.icc_level_mean) + "\n";
        out += "  distance > 1: " + pct(a.frac_gt1, 0) + "%\n";
        out += "  distance = 1: " + pct(a.frac_eq1, 0) + "%\n";
        out += "  NA conflicts: " + std::to_string(a.na_conflicts) + "\n";
    }
    for (const auto& s : report.score_diffs) {
        if (!out.empty()) out += "\n";
        out += "Score differences, Level " + std::to_string(level_index(s.level)) +
               " (with context minus without context)\n";
        for (int d = -2; d <= 2; ++d) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "  %+d: %zu\n", d, s.histogram.at(d));
            out += buf;
        }
        out += "  aligned " + std::to_string(s.histogram.aligned) + ", excluded (NA) " +
               std::to_string(s.histogram.excluded) + ", decreasing " +
               pct(s.histogram.fraction_decreasing(), 0) + "%\n";
    }
    return out;
}

std::map<std::string, std::string> alignment_keys(std::span<const PostResponsePair> pairs) {
    std::map<std::string, std::string> out;
    for (const auto& p : pairs) out[p.id] = p.post_id + "|" + p.generator_label;
    return out;
}

}  // namespace pedeval
