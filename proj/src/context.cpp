#include "pedeval/context.hpp"

#include "pedeval/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace pedeval {

PostIndex::PostIndex(std::vector<IndexEntry> entries, std::map<std::string, std::vector<std::string>> by_topic,
                     std::map<std::string, std::vector<std::string>> by_course)
    : entries_(std::move(entries)), by_topic_(std::move(by_topic)), by_course_(std::move(by_course)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        entries_[i].vector.validate();
        if (!position_.emplace(entries_[i].post_id, i).second) {
            throw ValidationError("index: duplicate post id '" + entries_[i].post_id + "'");
        }
    }
    for (const auto* scopes : {&by_topic_, &by_course_}) {
        for (const auto& [scope, ids] : *scopes) {
            for (const auto& id : ids) {
                if (!position_.count(id)) {
                    throw ValidationError("index: scope '" + scope + "' names unindexed post '" + id + "'");
                }
            }
        }
    }
}

const EmbeddingVector* PostIndex::find(std::string_view post_id) const {
    auto it = position_.find(std::string(post_id));
    return it == position_.end() ? nullptr : &entries_[it->second].vector;
}

std::vector<std::string> PostIndex::candidate_pool(const ForumPost& target) const {
    const auto& scopes = target.topic_id ? by_topic_ : by_course_;
    const std::string& key = target.topic_id ? *target.topic_id : target.course_id;
    std::vector<std::string> pool;
    if (auto it = scopes.find(key); it != scopes.end()) {
        for (const auto& id : it->second) {
            if (id != target.id) pool.push_back(id);
        }
    }
    return pool;
}

void PostIndex::save(const std::filesystem::path& dir) const {
    std::string lines;
    for (const auto& e : entries_) {
        nlohmann::ordered_json j;
        j["post_id"] = e.post_id;
        j["vector"] = e.vector.values;
        lines += j.dump() + "\n";
    }
    write_text_atomic(dir / "vectors.jsonl", lines);
    nlohmann::ordered_json scopes;
    scopes["topics"] = by_topic_;
    scopes["courses"] = by_course_;
    write_text_atomic(dir / "scopes.json", scopes.dump(2) + "\n");
}

PostIndex PostIndex::load(const std::filesystem::path& dir) {
    std::ifstream vin(dir / "vectors.jsonl");
    if (!vin) throw NotFoundError("cannot read " + (dir / "vectors.jsonl").string());
    std::vector<IndexEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(vin, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            entries.push_back({j.at("post_id").get<std::string>(), {j.at("vector").get<std::vector<double>>()}});
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError((dir / "vectors.jsonl").string() + ": line " + std::to_string(lineno) + ": " +
                                  e.what());
        }
    }
    std::ifstream sin(dir / "scopes.json");
    if (!sin) throw NotFoundError("cannot read " + (dir / "scopes.json").string());
    std::stringstream ss;
    ss << sin.rdbuf();
    try {
        auto s = nlohmann::json::parse(ss.str());
        return PostIndex(std::move(entries), s.at("topics").get<std::map<std::string, std::vector<std::string>>>(),
                         s.at("courses").get<std::map<std::string, std::vector<std::string>>>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError((dir / "scopes.json").string() + ": " + e.what());
    }
}

PostIndex build_index(Provider& provider, std::span<const ForumPost> posts) {
    if (posts.empty()) throw ValidationError("build_index: no posts");
    std::set<std::string> seen;
    for (const auto& p : posts) {
        if (!seen.insert(p.id).second) throw ValidationError("build_index: duplicate post id '" + p.id + "'");
    }
    std::vector<std::string> texts;
    texts.reserve(posts.size());
    for (const auto& p : posts) texts.push_back(p.text);

    std::vector<EmbeddingVector> vectors;
    try {
        vectors = provider.embed(texts);
    } catch (const Error&) {
        // Find the post responsible: successes land in the cache, so this
        // costs at most one extra call per post.
        for (const auto& p : posts) {
            try {
                provider.embed(std::span<const std::string>(&p.text, 1));
            } catch (const ProviderError& e) {
                throw ProviderError("embedding post '" + p.id + "': " + e.what(), e.attempts());
            } catch (const NotFoundError& e) {
                throw NotFoundError("embedding post '" + p.id + "': " + e.what());
            } catch (const Error& e) {
                throw ValidationError("embedding post '" + p.id + "': " + e.what());
            }
        }
        throw;
    }

    std::vector<IndexEntry> entries;
    std::map<std::string, std::vector<std::string>> by_topic, by_course;
    for (std::size_t i = 0; i < posts.size(); ++i) {
        entries.push_back({posts[i].id, std::move(vectors[i])});
        if (posts[i].topic_id) by_topic[*posts[i].topic_id].push_back(posts[i].id);
        by_course[posts[i].course_id].push_back(posts[i].id);
    }
    return PostIndex(std::move(entries), std::move(by_topic), std::move(by_course));
}

std::vector<std::string> top_k_similar(const PostIndex& index, const ForumPost& target,
                                       const EmbeddingVector& query, std::size_t k) {
    if (k == 0) throw ValidationError("top_k_similar: k must be >= 1");
    struct Scored {
        double score;
        const std::string* id;
    };
    const std::vector<std::string> pool = index.candidate_pool(target);
    std::vector<Scored> scored;
    scored.reserve(pool.size());
    for (const auto& id : pool) {
        scored.push_back({cosine(query, *index.find(id)), &id});
    }
    const auto better = [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return *a.id < *b.id;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(*scored[i].id);
    return out;
}

std::vector<std::string> top_k_similar(const PostIndex& index, const ForumPost& target, std::size_t k) {
    const EmbeddingVector* v = index.find(target.id);
    if (!v) throw NotFoundError("top_k_similar: post '" + target.id + "' is not indexed");
    return top_k_similar(index, target, *v, k);
}

std::vector<std::string> top_k_similar(const PostIndex& index, Provider& provider, const ForumPost& target,
                                       std::size_t k) {
    if (const EmbeddingVector* v = index.find(target.id)) return top_k_similar(index, target, *v, k);
    auto q = provider.embed(std::span<const std::string>(&target.text, 1));
    return top_k_similar(index, target, q.front(), k);
}

}  // namespace pedeval
