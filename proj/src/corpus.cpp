#include "pedeval/corpus.hpp"

#include "pedeval/config.hpp"
#include "pedeval/error.hpp"
#include "pedeval/random.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <initializer_list>
#include <regex>
#include <set>
#include <sstream>
#include <unistd.h>

namespace pedeval {

using nlohmann::ordered_json;

std::string_view condition_name(Condition c) {
    switch (c) {
        case Condition::ContextFree: return "ContextFree";
        case Condition::ForumContext: return "ForumContext";
        case Condition::MoocStyle: return "MoocStyle";
    }
    return "ContextFree";
}

Condition condition_from_name(std::string_view name) {
    if (name == "ContextFree") return Condition::ContextFree;
    if (name == "ForumContext") return Condition::ForumContext;
    if (name == "MoocStyle") return Condition::MoocStyle;
    throw ValidationError("unknown condition '" + std::string(name) + "'");
}

std::string_view provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Human: return "Human";
        case Provenance::Judge: return "Judge";
        case Provenance::Adjudicated: return "Adjudicated";
    }
    return "Human";
}

Provenance provenance_from_name(std::string_view name) {
    if (name == "Human") return Provenance::Human;
    if (name == "Judge") return Provenance::Judge;
    if (name == "Adjudicated") return Provenance::Adjudicated;
    throw ValidationError("unknown provenance '" + std::string(name) + "'");
}

namespace {

void expect_object(const ordered_json& j, std::initializer_list<std::string_view> fields) {
    if (!j.is_object()) throw ValidationError("record must be a JSON object");
    for (const auto& [k, _] : j.items()) {
        if (std::find(fields.begin(), fields.end(), k) == fields.end()) {
            throw ValidationError("unknown field '" + k + "'");
        }
    }
}

std::string req_string(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<std::string> opt_string(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

void require_id(const std::string& id, const char* key) {
    if (id.empty()) throw ValidationError(std::string("field '") + key + "' must be non-empty");
}

std::string timestamp_field(const ordered_json& j, const char* key) {
    auto ts = opt_string(j, key);
    if (!ts) return std::string(kEpochTimestamp);
    static const std::regex kRfc3339(
        R"(^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$)");
    if (!std::regex_match(*ts, kRfc3339)) {
        throw ValidationError(std::string("field '") + key + "' is not an RFC 3339 timestamp");
    }
    return *ts;
}

template <typename T>
const T* find_by_id(const std::vector<T>& items, std::string_view id) {
    auto it = std::find_if(items.begin(), items.end(), [&](const T& v) { return v.id == id; });
    return it == items.end() ? nullptr : &*it;
}

}  // namespace

void to_json(ordered_json& j, const ForumPost& v) {
    j = ordered_json::object();
    j["id"] = v.id;
    j["course_id"] = v.course_id;
    j["topic_id"] = v.topic_id ? ordered_json(*v.topic_id) : ordered_json(nullptr);
    j["author"] = v.author;
    j["text"] = v.text;
    j["thread_position"] = v.thread_position;
    j["created_at"] = v.created_at;
}

void from_json(const ordered_json& j, ForumPost& v) {
    expect_object(j, {"id", "course_id", "topic_id", "author", "text", "thread_position", "created_at"});
    v.id = req_string(j, "id");
    require_id(v.id, "id");
    v.course_id = req_string(j, "course_id");
    v.topic_id = opt_string(j, "topic_id");
    v.author = req_string(j, "author");
    v.text = req_string(j, "text");
    if (blank(v.text)) throw ValidationError("field 'text' is empty after trimming");
    auto it = j.find("thread_position");
    if (it == j.end()) throw ValidationError("missing field 'thread_position'");
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
        throw ValidationError("field 'thread_position' must be a non-negative integer");
    }
    v.thread_position = it->get<std::uint32_t>();
    v.created_at = timestamp_field(j, "created_at");
}

void to_json(ordered_json& j, const CourseInfo& v) {
    j = ordered_json::object();
    j["id"] = v.id;
    j["name"] = v.name;
    j["description"] = v.description ? ordered_json(*v.description) : ordered_json(nullptr);
}

void from_json(const ordered_json& j, CourseInfo& v) {
    expect_object(j, {"id", "name", "description"});
    v.id = req_string(j, "id");
    require_id(v.id, "id");
    v.name = req_string(j, "name");
    v.description = opt_string(j, "description");
}

void to_json(ordered_json& j, const DiscussionTopic& v) {
    j = ordered_json::object();
    j["id"] = v.id;
    j["course_id"] = v.course_id;
    j["title"] = v.title;
    j["instructions"] = v.instructions ? ordered_json(*v.instructions) : ordered_json(nullptr);
}

void from_json(const ordered_json& j, DiscussionTopic& v) {
    expect_object(j, {"id", "course_id", "title", "instructions"});
    v.id = req_string(j, "id");
    require_id(v.id, "id");
    v.course_id = req_string(j, "course_id");
    v.title = req_string(j, "title");
    v.instructions = opt_string(j, "instructions");
}

void to_json(ordered_json& j, const PostResponsePair& v) {
    j = ordered_json::object();
    j["id"] = v.id;
    j["post_id"] = v.post_id;
    j["condition"] = condition_name(v.condition);
    j["generator_label"] = v.generator_label;
    j["response_text"] = v.response_text;
    j["similar_post_ids"] = v.similar_post_ids;
    j["markdown_stripped"] = v.markdown_stripped;
}

void from_json(const ordered_json& j, PostResponsePair& v) {
    expect_object(j, {"id", "post_id", "condition", "generator_label", "response_text",
                      "similar_post_ids", "markdown_stripped"});
    v.id = req_string(j, "id");
    require_id(v.id, "id");
    v.post_id = req_string(j, "post_id");
    v.condition = condition_from_name(req_string(j, "condition"));
    v.generator_label = req_string(j, "generator_label");
    v.response_text = req_string(j, "response_text");
    v.similar_post_ids.clear();
    if (auto it = j.find("similar_post_ids"); it != j.end()) {
        if (!it->is_array()) throw ValidationError("field 'similar_post_ids' must be an array");
        for (const auto& s : *it) {
            if (!s.is_string()) throw ValidationError("field 'similar_post_ids' must hold strings");
            v.similar_post_ids.push_back(s.get<std::string>());
        }
    }
    v.markdown_stripped = false;
    if (auto it = j.find("markdown_stripped"); it != j.end()) {
        if (!it->is_boolean()) throw ValidationError("field 'markdown_stripped' must be a boolean");
        v.markdown_stripped = it->get<bool>();
    }
    if (v.condition == Condition::ForumContext) {
        if (v.similar_post_ids.size() > 10) {
            throw ValidationError("ForumContext pair lists more than 10 similar posts");
        }
        if (std::find(v.similar_post_ids.begin(), v.similar_post_ids.end(), v.post_id) !=
            v.similar_post_ids.end()) {
            throw ValidationError("similar_post_ids contains the pair's own post");
        }
    } else if (!v.similar_post_ids.empty()) {
        throw ValidationError("similar_post_ids must be empty for " +
                              std::string(condition_name(v.condition)) + " pairs");
    }
}

void to_json(ordered_json& j, const RatingRecord& v) {
    j = ordered_json::object();
    j["pair_id"] = v.pair_id;
    j["rater_id"] = v.rater_id;
    j["level"] = level_index(v.level);
    j["rating"] = rating_token(v.rating);
    j["submitted_at"] = v.submitted_at;
    j["provenance"] = provenance_name(v.provenance);
}

void from_json(const ordered_json& j, RatingRecord& v) {
    expect_object(j, {"pair_id", "rater_id", "level", "rating", "submitted_at", "provenance"});
    v.pair_id = req_string(j, "pair_id");
    v.rater_id = req_string(j, "rater_id");
    auto lv = j.find("level");
    if (lv == j.end() || !lv->is_number_integer()) {
        throw ValidationError("field 'level' must be an integer 1-5");
    }
    v.level = level_from_index(lv->get<int>());
    auto rt = j.find("rating");
    if (rt == j.end()) throw ValidationError("missing field 'rating'");
    std::optional<Rating> r;
    if (rt->is_string()) r = rating_from_token(rt->get<std::string>());
    if (rt->is_number_integer()) r = rating_from_token(std::to_string(rt->get<std::int64_t>()));
    if (!r) throw ValidationError("field 'rating' must be 0, 1, 2 or \"NA\"");
    v.rating = *r;
    v.submitted_at = timestamp_field(j, "submitted_at");
    v.provenance = provenance_from_name(req_string(j, "provenance"));
}

std::optional<std::string> record_key(const ForumPost& v) { return v.id; }
std::optional<std::string> record_key(const CourseInfo& v) { return v.id; }
std::optional<std::string> record_key(const DiscussionTopic& v) { return v.id; }
std::optional<std::string> record_key(const PostResponsePair& v) { return v.id; }
std::optional<std::string> record_key(const RatingRecord& v) {
    if (v.provenance != Provenance::Human) return std::nullopt;
    return v.pair_id + "|" + v.rater_id + "|L" + std::to_string(level_index(v.level));
}

template <typename T>
std::vector<T> read_jsonl(std::istream& in, std::string_view source) {
    std::vector<T> out;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank(line)) continue;
        auto where = [&] { return std::string(source) + ": line " + std::to_string(lineno); };
        T record;
        try {
            record = ordered_json::parse(line).get<T>();
        } catch (const ordered_json::exception& e) {
            throw ValidationError(where() + ": malformed JSON: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where() + ": " + e.what());
        }
        if (auto key = record_key(record)) {
            auto [it, inserted] = seen.emplace(*key, lineno);
            if (!inserted) {
                throw ValidationError(std::string(source) + ": duplicate id '" + *key + "' at line " +
                                      std::to_string(it->second) + " and line " +
                                      std::to_string(lineno));
            }
        }
        out.push_back(std::move(record));
    }
    return out;
}

template <typename T>
std::vector<T> read_jsonl_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot read file: " + path.string());
    return read_jsonl<T>(in, path.string());
}

template <typename T>
std::string to_jsonl(std::span<const T> records) {
    std::string out;
    for (const auto& r : records) {
        out += ordered_json(r).dump();
        out += '\n';
    }
    return out;
}

#define PEDEVAL_INSTANTIATE_JSONL(T)                                                  \
    template std::vector<T> read_jsonl<T>(std::istream&, std::string_view);           \
    template std::vector<T> read_jsonl_file<T>(const std::filesystem::path&);         \
    template std::string to_jsonl<T>(std::span<const T>);

PEDEVAL_INSTANTIATE_JSONL(ForumPost)
PEDEVAL_INSTANTIATE_JSONL(CourseInfo)
PEDEVAL_INSTANTIATE_JSONL(DiscussionTopic)
PEDEVAL_INSTANTIATE_JSONL(PostResponsePair)
PEDEVAL_INSTANTIATE_JSONL(RatingRecord)

#undef PEDEVAL_INSTANTIATE_JSONL

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

EntityKind entity_kind_from_name(std::string_view name) {
    if (name == "posts") return EntityKind::Posts;
    if (name == "courses") return EntityKind::Courses;
    if (name == "topics") return EntityKind::Topics;
    if (name == "pairs") return EntityKind::Pairs;
    if (name == "ratings") return EntityKind::Ratings;
    throw ValidationError("unknown entity kind '" + std::string(name) +
                          "' (expected posts|courses|topics|pairs|ratings)");
}

const ForumPost* Corpus::find_post(std::string_view id) const { return find_by_id(posts, id); }
const CourseInfo* Corpus::find_course(std::string_view id) const { return find_by_id(courses, id); }
const DiscussionTopic* Corpus::find_topic(std::string_view id) const { return find_by_id(topics, id); }
const PostResponsePair* Corpus::find_pair(std::string_view id) const { return find_by_id(pairs, id); }

void Corpus::validate() const {
    if (!courses.empty()) {
        for (const auto& t : topics) {
            if (!find_course(t.course_id)) {
                throw ValidationError("topic '" + t.id + "' references unknown course '" + t.course_id + "'");
            }
        }
    }
    if (!posts.empty()) {
        for (const auto& p : pairs) {
            if (!find_post(p.post_id)) {
                throw ValidationError("pair '" + p.id + "' references unknown post '" + p.post_id + "'");
            }
        }
    }
    if (!pairs.empty()) {
        for (const auto& r : ratings) {
            if (r.provenance != Provenance::Human || r.level != PedLevel::CollaborativeKnowledgeConstruction) {
                continue;
            }
            const auto* p = find_pair(r.pair_id);
            if (p && p->condition != Condition::ForumContext) {
                throw ValidationError("Level-5 human rating on non-ForumContext pair '" + r.pair_id + "'");
            }
        }
    }
}

std::size_t Corpus::size(EntityKind kind) const {
    switch (kind) {
        case EntityKind::Posts: return posts.size();
        case EntityKind::Courses: return courses.size();
        case EntityKind::Topics: return topics.size();
        case EntityKind::Pairs: return pairs.size();
        case EntityKind::Ratings: return ratings.size();
    }
    return 0;
}

Corpus ingest_jsonl(const std::filesystem::path& path, EntityKind kind) {
    Corpus c;
    switch (kind) {
        case EntityKind::Posts: c.posts = read_jsonl_file<ForumPost>(path); break;
        case EntityKind::Courses: c.courses = read_jsonl_file<CourseInfo>(path); break;
        case EntityKind::Topics: c.topics = read_jsonl_file<DiscussionTopic>(path); break;
        case EntityKind::Pairs: c.pairs = read_jsonl_file<PostResponsePair>(path); break;
        case EntityKind::Ratings: c.ratings = read_jsonl_file<RatingRecord>(path); break;
    }
    return c;
}

std::vector<ForumPost> filter_thread_initial(std::span<const ForumPost> posts) {
    std::vector<ForumPost> out;
    std::copy_if(posts.begin(), posts.end(), std::back_inserter(out),
                 [](const ForumPost& p) { return p.thread_position == 0; });
    return out;
}

TrainTestSplit split_train_test(std::span<const PostResponsePair> pairs, const PipelineConfig& cfg) {
    std::vector<std::size_t> cf, ctx;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].condition == Condition::ContextFree) cf.push_back(i);
        if (pairs[i].condition == Condition::ForumContext) ctx.push_back(i);
    }
    std::string shortfall;
    if (cf.size() < cfg.train_ctx_free) {
        shortfall += "ContextFree shortfall " + std::to_string(cfg.train_ctx_free - cf.size());
    }
    if (ctx.size() < cfg.train_ctx) {
        if (!shortfall.empty()) shortfall += "; ";
        shortfall += "ForumContext shortfall " + std::to_string(cfg.train_ctx - ctx.size());
    }
    if (!shortfall.empty()) throw ValidationError("split_train_test: " + shortfall);

    Rng rng(cfg.seed);
    rng.shuffle(cf);
    rng.shuffle(ctx);
    std::vector<bool> in_train(pairs.size(), false);
    for (std::size_t i = 0; i < cfg.train_ctx_free; ++i) in_train[cf[i]] = true;
    for (std::size_t i = 0; i < cfg.train_ctx; ++i) in_train[ctx[i]] = true;

    TrainTestSplit split;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        (in_train[i] ? split.train : split.test).push_back(pairs[i]);
    }
    return split;
}

std::size_t& RatingCounts::operator[](Rating r) {
    switch (r) {
        case Rating::Zero: return zero;
        case Rating::One: return one;
        case Rating::Two: return two;
        case Rating::NA: return na;
    }
    return na;
}

std::size_t RatingCounts::operator[](Rating r) const { return const_cast<RatingCounts&>(*this)[r]; }

RatingCounts summarize_rating_distribution(std::span<const RatingRecord> records, PedLevel level) {
    RatingCounts counts;
    for (const auto& r : records) {
        if (r.level == level) ++counts[r.rating];
    }
    return counts;
}

std::map<RatingKey, Rating> effective_ratings(std::span<const RatingRecord> records) {
    struct Votes {
        std::optional<Rating> adjudicated;
        std::set<Rating> human;
        std::set<Rating> judge;
    };
    std::map<RatingKey, Votes> votes;
    for (const auto& r : records) {
        auto& v = votes[{r.pair_id, r.level}];
        switch (r.provenance) {
            case Provenance::Adjudicated: v.adjudicated = r.rating; break;
            case Provenance::Human: v.human.insert(r.rating); break;
            case Provenance::Judge: v.judge.insert(r.rating); break;
        }
    }
    std::map<RatingKey, Rating> out;
    for (const auto& [key, v] : votes) {
        if (v.adjudicated) {
            out.emplace(key, *v.adjudicated);
        } else if (!v.human.empty()) {
            if (v.human.size() == 1) out.emplace(key, *v.human.begin());
        } else if (v.judge.size() == 1) {
            out.emplace(key, *v.judge.begin());
        }
    }
    return out;
}

}  // namespace pedeval
