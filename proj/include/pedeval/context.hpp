#pragma once

#include "pedeval/corpus.hpp"
#include "pedeval/provider.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pedeval {

struct IndexEntry {
    std::string post_id;
    EmbeddingVector vector;
};

/// Embeddings of post texts plus topic and course scopes. Immutable once
/// built; queries are read-only.
class PostIndex {
public:
    PostIndex() = default;
    PostIndex(std::vector<IndexEntry> entries, std::map<std::string, std::vector<std::string>> by_topic,
              std::map<std::string, std::vector<std::string>> by_course);

    const std::vector<IndexEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const EmbeddingVector* find(std::string_view post_id) const;

    /// Same topic when the target has one, else same course. Target excluded.
    std::vector<std::string> candidate_pool(const ForumPost& target) const;

    const std::map<std::string, std::vector<std::string>>& topics() const { return by_topic_; }
    const std::map<std::string, std::vector<std::string>>& courses() const { return by_course_; }

    /// `dir/vectors.jsonl` with one {post_id, vector} per line and
    /// `dir/scopes.json` with the topic and course maps.
    void save(const std::filesystem::path& dir) const;
    static PostIndex load(const std::filesystem::path& dir);

private:
    std::vector<IndexEntry> entries_;
    std::map<std::string, std::size_t> position_;
    std::map<std::string, std::vector<std::string>> by_topic_;
    std::map<std::string, std::vector<std::string>> by_course_;
};

/// Embeds every post's text in one batch. Throws ValidationError on an empty
/// list or duplicate ids. A failed embedding is reported with the post id.
PostIndex build_index(Provider& provider, std::span<const ForumPost> posts);

/// Up to k pool members by descending cosine similarity to `query`, ties by
/// ascending post id. An empty pool gives an empty list.
std::vector<std::string> top_k_similar(const PostIndex& index, const ForumPost& target,
                                       const EmbeddingVector& query, std::size_t k);

/// As above with the target's indexed vector. Throws NotFoundError when the
/// target is not indexed.
std::vector<std::string> top_k_similar(const PostIndex& index, const ForumPost& target, std::size_t k);

/// Uses the indexed vector when present, otherwise embeds the target text.
std::vector<std::string> top_k_similar(const PostIndex& index, Provider& provider, const ForumPost& target,
                                       std::size_t k);

}  // namespace pedeval
