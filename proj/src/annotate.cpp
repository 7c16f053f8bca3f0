#include "pedeval/annotate.hpp"

#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/markdown.hpp"

#include <algorithm>

namespace pedeval {

using nlohmann::ordered_json;

std::string_view task_state_name(TaskState s) {
    switch (s) {
        case TaskState::Open: return "Open";
        case TaskState::PartiallyRated: return "PartiallyRated";
        case TaskState::FullyRated: return "FullyRated";
        case TaskState::Adjudicating: return "Adjudicating";
        case TaskState::Final: return "Final";
    }
    return "Open";
}

std::string_view discrepancy_kind_name(DiscrepancyKind k) {
    return k == DiscrepancyKind::Substantive ? "Substantive" : "Minor";
}

std::vector<PedLevel> levels_for(Condition c) {
    std::vector<PedLevel> out(kAllLevels.begin(), kAllLevels.end());
    if (c != Condition::ForumContext) out.pop_back();
    return out;
}

void to_json(ordered_json& j, const AnnotationTask& v) {
    j = ordered_json::object();
    j["ordinal"] = v.ordinal;
    j["pair_id"] = v.pair_id;
    j["condition"] = condition_name(v.condition);
    j["levels"] = ordered_json::array();
    for (auto l : v.levels) j["levels"].push_back(level_index(l));
    j["raters"] = {v.raters[0], v.raters[1]};
    j["state"] = task_state_name(v.state);
}

void to_json(ordered_json& j, const AdjudicationItem& v) {
    j = ordered_json::object();
    j["id"] = v.id;
    j["pair_id"] = v.pair_id;
    j["level"] = level_index(v.level);
    j["rating_a"] = rating_token(v.rating_a);
    j["rating_b"] = rating_token(v.rating_b);
    j["kind"] = discrepancy_kind_name(v.kind);
    j["assignee"] = v.assignee;
    j["resolution"] = v.resolution ? ordered_json(rating_token(*v.resolution)) : ordered_json(nullptr);
    j["needs_discussion"] = v.needs_discussion;
}

std::optional<DiscrepancyKind> classify_discrepancy(Rating a, Rating b) {
    switch (rating_distance(a, b)) {
        case Distance::Zero: return std::nullopt;
        case Distance::One: return DiscrepancyKind::Minor;
        case Distance::Two:
        case Distance::Substantive: return DiscrepancyKind::Substantive;
    }
    return std::nullopt;
}

std::optional<Rating> majority_of(std::span<const Rating> opinions) {
    for (std::size_t i = 0; i < opinions.size(); ++i) {
        const auto n = std::count(opinions.begin(), opinions.end(), opinions[i]);
        if (2 * static_cast<std::size_t>(n) > opinions.size()) return opinions[i];
    }
    return std::nullopt;
}

namespace {

std::string item_id_of(const std::string& pair_id, PedLevel level) {
    return pair_id + ":L" + std::to_string(level_index(level));
}

}  // namespace

AnnotationService::AnnotationService(StudySetup setup) : setup_(std::move(setup)) {
    if (setup_.rater_a.empty() || setup_.rater_b.empty() || setup_.adjudicator.empty()) {
        throw ValidationError("annotation study: rater and adjudicator ids must be non-empty");
    }
    if (setup_.rater_a == setup_.rater_b || setup_.rater_a == setup_.adjudicator ||
        setup_.rater_b == setup_.adjudicator) {
        throw ValidationError("annotation study: the three reviewer ids must be distinct");
    }
    if (setup_.milestone_n == 0) throw ValidationError("annotation study: milestone_n must be positive");
    for (std::size_t i = 0; i < setup_.pairs.size(); ++i) {
        const auto& p = setup_.pairs[i];
        if (!index_.emplace(p.id, i).second) throw ValidationError("annotation study: duplicate pair " + p.id);
        if (!setup_.context.find_post(p.post_id)) {
            throw ValidationError("annotation study: pair " + p.id + " references unknown post " + p.post_id);
        }
    }

    if (setup_.log_path.empty()) return;
    if (std::filesystem::exists(setup_.log_path)) {
        std::ifstream in(setup_.log_path);
        if (!in) throw Error("cannot read annotation log " + setup_.log_path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = setup_.log_path.string() + ":" + std::to_string(lineno);
            try {
                const auto ev = ordered_json::parse(line);
                const auto kind = ev.at("event").get<std::string>();
                if (kind == "rating") {
                    apply_rating(ev.at("record").get<RatingRecord>());
                } else if (kind == "needs_discussion") {
                    auto it = item_index_.find(ev.at("item").get<std::string>());
                    if (it == item_index_.end()) throw CorruptionError("discussion flag for unknown item");
                    items_[it->second].needs_discussion = true;
                } else {
                    throw CorruptionError("unknown event '" + kind + "'");
                }
            } catch (const CorruptionError& e) {
                throw CorruptionError(where + ": " + e.what());
            } catch (const std::exception& e) {
                throw CorruptionError(where + ": " + e.what());
            }
        }
    } else if (setup_.log_path.has_parent_path()) {
        std::filesystem::create_directories(setup_.log_path.parent_path());
    }
    log_.open(setup_.log_path, std::ios::app);
    if (!log_) throw Error("cannot open annotation log " + setup_.log_path.string());
}

std::array<std::string, 3> AnnotationService::reviewers() const {
    return {setup_.rater_a, setup_.rater_b, setup_.adjudicator};
}

std::string AnnotationService::now() const { return setup_.clock ? setup_.clock() : utc_now_rfc3339(); }

void AnnotationService::append_log(const ordered_json& event) {
    if (!log_.is_open()) return;
    log_ << event.dump() << '\n';
    log_.flush();
    if (!log_) throw Error("write to annotation log " + setup_.log_path.string() + " failed");
}

std::size_t AnnotationService::task_index(const std::string& pair_id) const {
    auto it = index_.find(pair_id);
    if (it == index_.end()) throw NotFoundError("unknown pair '" + pair_id + "'");
    return it->second;
}

bool AnnotationService::rater_finished(std::size_t index, const std::string& rater) const {
    const auto& p = setup_.pairs[index];
    for (auto l : levels_for(p.condition)) {
        if (!human_.count({p.id, rater, l})) return false;
    }
    return true;
}

// Consistency checks here guard log replay; the public entry points check
// the same conditions first with user-facing errors.
void AnnotationService::apply_rating(const RatingRecord& r) {
    const std::size_t idx = task_index(r.pair_id);
    const auto& pair = setup_.pairs[idx];
    const auto levels = levels_for(pair.condition);
    if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) {
        throw CorruptionError("rating at a level outside the task");
    }
    if (r.provenance == Provenance::Human) {
        if (r.rater_id != setup_.rater_a && r.rater_id != setup_.rater_b) {
            throw CorruptionError("Human rating from unregistered rater " + r.rater_id);
        }
        if (!human_.emplace(std::tuple{r.pair_id, r.rater_id, r.level}, r.rating).second) {
            throw CorruptionError("duplicate Human rating for " + r.pair_id);
        }
        auto a = human_.find({r.pair_id, setup_.rater_a, r.level});
        auto b = human_.find({r.pair_id, setup_.rater_b, r.level});
        if (a != human_.end() && b != human_.end()) {
            if (auto kind = classify_discrepancy(a->second, b->second)) {
                AdjudicationItem item;
                item.id = item_id_of(r.pair_id, r.level);
                item.pair_id = r.pair_id;
                item.level = r.level;
                item.rating_a = a->second;
                item.rating_b = b->second;
                item.kind = *kind;
                if (*kind == DiscrepancyKind::Minor) {
                    item.assignee = reviewers()[minor_count_++ % 3];
                } else {
                    item.assignee = setup_.adjudicator;
                }
                item_index_.emplace(item.id, items_.size());
                items_.push_back(std::move(item));
            }
            if (rater_finished(idx, setup_.rater_a) && rater_finished(idx, setup_.rater_b)) {
                completion_order_.push_back(r.pair_id);
            }
        }
    } else if (r.provenance == Provenance::Adjudicated) {
        auto it = item_index_.find(item_id_of(r.pair_id, r.level));
        if (it == item_index_.end()) throw CorruptionError("adjudication of a key without disagreement");
        auto& item = items_[it->second];
        if (item.resolution) throw CorruptionError("item " + item.id + " resolved twice");
        item.resolution = r.rating;
    } else {
        throw CorruptionError("Judge ratings do not belong in the annotation log");
    }
    records_.push_back(r);
}

std::optional<AnnotationTask> AnnotationService::next_task(const std::string& rater_id) const {
    if (rater_id != setup_.rater_a && rater_id != setup_.rater_b) {
        throw NotFoundError("unknown rater '" + rater_id + "'");
    }
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < setup_.pairs.size(); ++i) {
        if (!rater_finished(i, rater_id)) return task_locked(i);
    }
    return std::nullopt;
}

RatingRecord AnnotationService::submit_rating(const std::string& rater_id, const std::string& pair_id,
                                              PedLevel level, Rating rating) {
    if (rater_id != setup_.rater_a && rater_id != setup_.rater_b) {
        throw NotFoundError("unknown rater '" + rater_id + "'");
    }
    std::lock_guard lock(mu_);
    const std::size_t idx = task_index(pair_id);
    const auto levels = levels_for(setup_.pairs[idx].condition);
    if (std::find(levels.begin(), levels.end(), level) == levels.end()) {
        throw PreconditionError("pair " + pair_id + ": Level " + std::to_string(level_index(level)) +
                                " is not rated for " + std::string(condition_name(setup_.pairs[idx].condition)) +
                                " pairs");
    }
    if (human_.count({pair_id, rater_id, level})) {
        throw ConflictError("rater " + rater_id + " already rated pair " + pair_id + " at Level " +
                            std::to_string(level_index(level)));
    }
    RatingRecord r{pair_id, rater_id, level, rating, now(), Provenance::Human};
    append_log({{"event", "rating"}, {"record", r}});
    apply_rating(r);
    return r;
}

MilestoneStatus AnnotationService::milestone_report() const {
    std::lock_guard lock(mu_);
    if (completion_order_.size() < setup_.milestone_n) {
        return MilestonePending{setup_.milestone_n - completion_order_.size()};
    }
    MilestoneReport out;
    out.pair_ids.assign(completion_order_.begin(),
                        completion_order_.begin() + static_cast<std::ptrdiff_t>(setup_.milestone_n));
    std::vector<RatingRecord> a, b;
    for (const auto& id : out.pair_ids) {
        for (auto l : levels_for(setup_.pairs[index_.at(id)].condition)) {
            a.push_back({id, setup_.rater_a, l, human_.at({id, setup_.rater_a, l}), {}, Provenance::Human});
            b.push_back({id, setup_.rater_b, l, human_.at({id, setup_.rater_b, l}), {}, Provenance::Human});
        }
    }
    out.report = agreement_report(a, b);
    return out;
}

std::vector<AdjudicationItem> AnnotationService::adjudication_queue() const {
    std::lock_guard lock(mu_);
    return items_;
}

RatingRecord AnnotationService::resolve(const std::string& item_id, const std::string& resolver_id, Rating rating,
                                        std::optional<std::vector<Rating>> opinions) {
    std::lock_guard lock(mu_);
    auto it = item_index_.find(item_id);
    if (it == item_index_.end()) throw NotFoundError("unknown adjudication item '" + item_id + "'");
    auto& item = items_[it->second];
    if (item.resolution) throw ConflictError("item " + item_id + " is already resolved");
    const auto who = reviewers();
    if (std::find(who.begin(), who.end(), resolver_id) == who.end()) {
        throw NotFoundError("unknown reviewer '" + resolver_id + "'");
    }
    if (item.kind == DiscrepancyKind::Substantive) {
        if (!opinions || opinions->size() != 3) {
            throw ValidationError("item " + item_id + ": Substantive items need the three reviewers' opinions");
        }
        const auto majority = majority_of(*opinions);
        if (!majority) {
            if (!item.needs_discussion) {
                append_log({{"event", "needs_discussion"}, {"item", item_id}});
                item.needs_discussion = true;
            }
            throw ValidationError("item " + item_id + ": opinions have no majority; flagged for discussion");
        }
        if (*majority != rating) {
            throw ValidationError("item " + item_id + ": rating " + std::string(rating_token(rating)) +
                                  " differs from the majority " + std::string(rating_token(*majority)));
        }
    } else if (resolver_id != item.assignee) {
        throw PreconditionError("item " + item_id + " is assigned to " + item.assignee + ", not " + resolver_id);
    }
    RatingRecord r{item.pair_id, resolver_id, item.level, rating, now(), Provenance::Adjudicated};
    append_log({{"event", "rating"}, {"record", r}});
    apply_rating(r);
    return r;
}

AnnotationTask AnnotationService::task_locked(std::size_t index) const {
    const auto& p = setup_.pairs[index];
    AnnotationTask t;
    t.ordinal = index + 1;
    t.pair_id = p.id;
    t.condition = p.condition;
    t.levels = levels_for(p.condition);
    t.raters = {setup_.rater_a, setup_.rater_b};

    std::size_t rated = 0;
    for (auto l : t.levels) {
        rated += human_.count({p.id, setup_.rater_a, l}) + human_.count({p.id, setup_.rater_b, l});
    }
    if (rated == 0) {
        t.state = TaskState::Open;
    } else if (rated < 2 * t.levels.size()) {
        t.state = TaskState::PartiallyRated;
    } else {
        bool open = false, touched = false;
        for (auto l : t.levels) {
            auto item = item_index_.find(item_id_of(p.id, l));
            if (item == item_index_.end()) continue;
            const auto& ai = items_[item->second];
            if (ai.resolution || ai.needs_discussion) touched = true;
            if (!ai.resolution) open = true;
        }
        t.state = !open ? TaskState::Final : touched ? TaskState::Adjudicating : TaskState::FullyRated;
    }
    return t;
}

AnnotationTask AnnotationService::task(const std::string& pair_id) const {
    std::lock_guard lock(mu_);
    return task_locked(task_index(pair_id));
}

std::vector<AnnotationTask> AnnotationService::tasks() const {
    std::lock_guard lock(mu_);
    std::vector<AnnotationTask> out;
    for (std::size_t i = 0; i < setup_.pairs.size(); ++i) out.push_back(task_locked(i));
    return out;
}

Progress AnnotationService::progress() const {
    std::lock_guard lock(mu_);
    Progress p;
    p.tasks = setup_.pairs.size();
    p.completed_pairs = completion_order_.size();
    for (auto s : {TaskState::Open, TaskState::PartiallyRated, TaskState::FullyRated, TaskState::Adjudicating,
                   TaskState::Final}) {
        p.by_state[s] = 0;
    }
    for (const auto& r : {setup_.rater_a, setup_.rater_b}) p.rated_by[r] = 0;
    for (std::size_t i = 0; i < setup_.pairs.size(); ++i) {
        ++p.by_state[task_locked(i).state];
        for (const auto& r : {setup_.rater_a, setup_.rater_b}) p.rated_by[r] += rater_finished(i, r);
    }
    for (const auto& item : items_) (item.resolution ? p.queue_resolved : p.queue_open)++;
    return p;
}

std::vector<RatingRecord> AnnotationService::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

ordered_json AnnotationService::pair_bundle(const std::string& pair_id) const {
    const AnnotationTask t = task(pair_id);
    const auto& pair = setup_.pairs[index_.at(pair_id)];
    const ForumPost* post = setup_.context.find_post(pair.post_id);
    ordered_json j = ordered_json::object();
    j["pair_id"] = pair.id;
    j["ordinal"] = t.ordinal;
    j["condition"] = condition_name(pair.condition);
    j["state"] = task_state_name(t.state);
    j["levels"] = ordered_json::array();
    for (auto l : t.levels) j["levels"].push_back(level_index(l));
    j["post"] = {{"id", post->id}, {"text", post->text}};
    const CourseInfo* course = setup_.context.find_course(post->course_id);
    j["course"] = course ? ordered_json(*course) : ordered_json(nullptr);
    const DiscussionTopic* topic = post->topic_id ? setup_.context.find_topic(*post->topic_id) : nullptr;
    j["topic"] = topic ? ordered_json(*topic) : ordered_json(nullptr);
    j["response"] = pair.response_text;
    j["response_stripped"] = strip_markdown(pair.response_text);

    ordered_json rubric = ordered_json::object();
    rubric["version"] = kRubricVersion;
    rubric["digest"] = rubric_digest();
    rubric["levels"] = ordered_json::array();
    for (auto l : t.levels) {
        ordered_json lv = {{"level", level_index(l)}, {"name", level_name(l)}, {"bands", ordered_json::array()}};
        for (Rating r : {Rating::Two, Rating::One, Rating::Zero, Rating::NA}) {
            lv["bands"].push_back({{"rating", rating_token(r)}, {"heading", band_heading(r)}, {"text", band_text(l, r)}});
        }
        rubric["levels"].push_back(std::move(lv));
    }
    j["rubric"] = std::move(rubric);
    return j;
}

}  // namespace pedeval
