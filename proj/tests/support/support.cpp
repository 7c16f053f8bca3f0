#include "support.hpp"

#include "pedeval/cli.hpp"
#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/prompt_markers.hpp"
#include "pedeval/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#ifndef PEDEVAL_TEST_DATA_DIR
#error "PEDEVAL_TEST_DATA_DIR must point at tests/"
#endif

namespace pedeval::testing {

namespace fs = std::filesystem;

fs::path fixture_dir() { return fs::path(PEDEVAL_TEST_DATA_DIR) / "fixtures"; }
fs::path golden_dir() { return fs::path(PEDEVAL_TEST_DATA_DIR) / "golden"; }

Corpus fixture_corpus(bool with_replies) {
    Corpus c;
    c.posts = read_jsonl_file<ForumPost>(fixture_dir() / "posts.jsonl");
    if (!with_replies) c.posts = filter_thread_initial(c.posts);
    c.courses = read_jsonl_file<CourseInfo>(fixture_dir() / "courses.jsonl");
    c.topics = read_jsonl_file<DiscussionTopic>(fixture_dir() / "topics.jsonl");
    return c;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFoundError("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("pedeval-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::shared_ptr<Provider> mock_provider(MockResponder responder, std::size_t concurrency) {
    ProviderOptions opts;
    opts.mode = ProviderMode::Mock;
    opts.concurrency_limit = concurrency;
    return make_provider(opts, std::move(responder));
}

namespace {

class TableBackend : public Backend {
public:
    explicit TableBackend(std::map<std::string, EmbeddingVector> table) : table_(std::move(table)) {}
    std::string complete(const GenerationRequest&) override { throw Error("table backend cannot generate"); }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts, const std::string&) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) out.push_back(table_.at(t));
        return out;
    }

private:
    std::map<std::string, EmbeddingVector> table_;
};

}  // namespace

std::shared_ptr<Provider> table_embedding_provider(std::map<std::string, EmbeddingVector> by_text) {
    return std::make_shared<Provider>(std::make_shared<TableBackend>(std::move(by_text)), ProviderOptions{});
}

std::optional<double> oracle_icc(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    const double k = 2.0;
    std::vector<std::vector<double>> x(n, std::vector<double>(2));
    for (std::size_t i = 0; i < n; ++i) x[i] = {a[i], b[i]};

    double grand = 0;
    for (const auto& row : x) grand += row[0] + row[1];
    grand /= (k * n);

    double sst = 0, ssr = 0, ssc = 0;
    for (const auto& row : x) {
        for (double v : row) sst += (v - grand) * (v - grand);
        const double rm = (row[0] + row[1]) / k;
        ssr += k * (rm - grand) * (rm - grand);
    }
    for (std::size_t j = 0; j < 2; ++j) {
        double cm = 0;
        for (const auto& row : x) cm += row[j];
        cm /= n;
        ssc += n * (cm - grand) * (cm - grand);
    }
    const double sse = sst - ssr - ssc;
    const double msr = ssr / (n - 1.0);
    const double msc = ssc / (k - 1.0);
    const double mse = sse / ((n - 1.0) * (k - 1.0));
    const double denom = msr + (k - 1.0) * mse + k * (msc - mse) / n;
    if (std::abs(denom) < 1e-12) return std::nullopt;
    return (msr - mse) / denom;
}

double oracle_accuracy(const std::vector<Rating>& pred, const std::vector<Rating>& gold) {
    std::size_t same = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == gold[i]) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(pred.size());
}

double oracle_weighted_f1(const std::vector<Rating>& pred, const std::vector<Rating>& gold) {
    const std::vector<Rating> classes{Rating::Zero, Rating::One, Rating::Two, Rating::NA};
    double total = 0.0;
    for (Rating c : classes) {
        std::size_t tp = 0, predicted = 0, support = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == c && gold[i] == c) ++tp;
            if (pred[i] == c) ++predicted;
            if (gold[i] == c) ++support;
        }
        if (support == 0) continue;
        // Same final arithmetic as the library so the comparison can be exact.
        const double p = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
        const double r = static_cast<double>(tp) / static_cast<double>(support);
        const double f1 = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        total += static_cast<double>(support) / static_cast<double>(pred.size()) * f1;
    }
    return total;
}

std::vector<std::string> oracle_top_k(const std::vector<ForumPost>& posts,
                                      const std::vector<EmbeddingVector>& vectors, const ForumPost& target,
                                      std::size_t k) {
    std::size_t ti = posts.size();
    for (std::size_t i = 0; i < posts.size(); ++i) {
        if (posts[i].id == target.id) ti = i;
    }
    const auto& q = vectors.at(ti).values;
    std::vector<std::pair<double, std::string>> scored;
    for (std::size_t i = 0; i < posts.size(); ++i) {
        const auto& p = posts[i];
        if (p.id == target.id) continue;
        const bool same_scope = target.topic_id ? p.topic_id == target.topic_id : p.course_id == target.course_id;
        if (!same_scope) continue;
        const auto& v = vectors[i].values;
        double dot = 0, nq = 0, nv = 0;
        for (std::size_t d = 0; d < q.size(); ++d) {
            dot += q[d] * v[d];
            nq += q[d] * q[d];
            nv += v[d] * v[d];
        }
        scored.emplace_back(dot / (std::sqrt(nq) * std::sqrt(nv)), p.id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
    return out;
}

RetrievalCorpus random_retrieval_corpus(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    RetrievalCorpus c;
    const std::size_t dim = 2 + rng.below(4);
    for (std::size_t i = 0; i < n; ++i) {
        ForumPost p;
        p.id = "q" + std::to_string(rng.below(1000000)) + "-" + std::to_string(i);
        p.course_id = "c" + std::to_string(rng.below(3));
        if (rng.below(5) != 0) p.topic_id = p.course_id + "-t" + std::to_string(rng.below(2));
        p.author = "s";
        p.text = "text of " + p.id;
        EmbeddingVector v;
        do {
            v.values.assign(dim, 0.0);
            for (auto& x : v.values) x = static_cast<double>(static_cast<int>(rng.below(5)) - 2);
        } while (v.norm() == 0.0);
        c.posts.push_back(std::move(p));
        c.vectors.push_back(std::move(v));
    }
    return c;
}

PostIndex index_of(const RetrievalCorpus& corpus) {
    std::map<std::string, EmbeddingVector> table;
    for (std::size_t i = 0; i < corpus.posts.size(); ++i) table[corpus.posts[i].text] = corpus.vectors[i];
    auto provider = table_embedding_provider(std::move(table));
    return build_index(*provider, corpus.posts);
}

std::map<std::string, std::vector<std::string>> prompt_anchors() {
    const auto j = nlohmann::json::parse(read_file(golden_dir() / "prompt_anchors.json"));
    return j.get<std::map<std::string, std::vector<std::string>>>();
}

std::size_t count_goal_lines(const std::string& prompt) {
    static const std::regex goal(R"(^[1-9]\. [A-Z][A-Za-z -]+: \S)");
    std::size_t n = 0;
    std::istringstream in(prompt);
    for (std::string line; std::getline(in, line);) n += std::regex_search(line, goal) ? 1 : 0;
    return n;
}

MockResponder rigged_judge() {
    return [](const GenerationRequest& req) -> std::optional<std::string> {
        const std::string& p = req.prompt;
        if (p.find(markers::kIntrospection) != std::string::npos) return std::string(kMagicRule);
        if (p.find("Pedagogical rubric:") == std::string::npos) return std::nullopt;
        if (p.find(kMagicRule) == std::string::npos) return std::string("Rating: 0");
        const auto section = p.rfind("\nTeaching assistant response:\n");
        const auto marker = p.find("[gold=", section);
        const auto close = p.find(']', marker);
        return "Rating: " + p.substr(marker + 6, close - marker - 6);
    };
}

MockResponder constant_judge(Rating rating) {
    return [rating](const GenerationRequest& req) -> std::optional<std::string> {
        if (req.prompt.find(markers::kIntrospection) != std::string::npos) {
            return std::string("Always consider the rubric band wording.");
        }
        return "Rating: " + std::string(rating_token(rating));
    };
}

std::vector<TrainExample> rigged_train_set(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Rating gold = kAllRatings[rng.below(4)];
        TrainExample ex;
        ex.item.post = {"rp" + std::to_string(i), "c1", std::nullopt, "s", "Question number " + std::to_string(i) + "?",
                        0, std::string(kEpochTimestamp)};
        ex.item.pair.id = "rig-" + std::to_string(i);
        ex.item.pair.post_id = ex.item.post.id;
        ex.item.pair.condition = Condition::ContextFree;
        ex.item.pair.generator_label = "fixture";
        ex.item.pair.response_text =
            "Answer " + std::to_string(i) + " [gold=" + std::string(rating_token(gold)) + "]";
        ex.level = PedLevel::DisciplinaryUnderstanding;
        ex.gold = gold;
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<SynthPair> real_pool(PedLevel level, const std::array<std::size_t, 4>& counts) {
    std::vector<SynthPair> out;
    for (std::size_t slot = 0; slot < 4; ++slot) {
        for (std::size_t i = 0; i < counts[slot]; ++i) {
            const std::string tag = std::string(rating_token(kAllRatings[slot])) + "-" + std::to_string(i);
            out.push_back({"Real student post " + tag + "?", "Real response " + tag + ".", level, kAllRatings[slot],
                           PairSource::Real, std::nullopt});
        }
    }
    return out;
}

AnnotationPlan make_annotation_plan(std::size_t n, std::uint64_t seed, bool plant) {
    AnnotationPlan plan;
    plan.context.courses.push_back({"c1", "Course One", std::nullopt});
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "%03zu", i + 1);
        plan.context.posts.push_back(
            {std::string("ap-") + id, "c1", std::nullopt, "s", "Post " + std::string(id) + "?", 0,
             std::string(kEpochTimestamp)});
        PostResponsePair pair;
        pair.id = std::string("ann-") + id;
        pair.post_id = std::string("ap-") + id;
        pair.condition = i % 2 == 0 ? Condition::ContextFree : Condition::ForumContext;
        pair.generator_label = "fixture";
        pair.response_text = "**Response** " + std::string(id);
        plan.pairs.push_back(pair);

        std::vector<Rating> row;
        for (std::size_t l = 0; l < levels_for(pair.condition).size(); ++l) {
            // NA is rarer than numeric ratings, as in real annotations.
            const auto draw = rng.below(10);
            row.push_back(draw < 3 ? Rating::Zero : draw < 6 ? Rating::One : draw < 9 ? Rating::Two : Rating::NA);
        }
        plan.ratings_a.push_back(std::move(row));

        if (!plant) continue;
        auto put = [&](PedLevel level, Rating a, Rating b, DiscrepancyKind kind) {
            plan.ratings_a[i][static_cast<std::size_t>(level_index(level) - 1)] = a;
            plan.planted.push_back({i, level, a, b, kind});
        };
        if (i % 9 == 4) put(PedLevel::ClarifyMisunderstandings, Rating::NA, Rating::One, DiscrepancyKind::Substantive);
        if (i % 5 == 1) put(PedLevel::DisciplinaryUnderstanding, Rating::One, Rating::Two, DiscrepancyKind::Minor);
        if (i % 5 == 3) put(PedLevel::HigherOrderThinking, Rating::Zero, Rating::Two, DiscrepancyKind::Substantive);
        if (i % 6 == 5) put(PedLevel::MetacognitiveAwareness, Rating::Two, Rating::One, DiscrepancyKind::Minor);
    }
    return plan;
}

Rating rating_b(const AnnotationPlan& plan, std::size_t pair_index, PedLevel level) {
    for (const auto& d : plan.planted) {
        if (d.pair_index == pair_index && d.level == level) return d.rating_b;
    }
    return plan.ratings_a[pair_index][static_cast<std::size_t>(level_index(level) - 1)];
}

StudySetup study_setup(const AnnotationPlan& plan, std::size_t milestone_n, fs::path log) {
    StudySetup s;
    s.pairs = plan.pairs;
    s.context = plan.context;
    s.rater_a = "rater-a";
    s.rater_b = "rater-b";
    s.adjudicator = "adjudicator";
    s.milestone_n = milestone_n;
    s.log_path = std::move(log);
    s.clock = [] { return std::string("2025-01-01T00:00:00Z"); };
    return s;
}

void rate_pair(AnnotationService& svc, const AnnotationPlan& plan, std::size_t i, bool b) {
    const auto& pair = plan.pairs[i];
    for (auto level : levels_for(pair.condition)) {
        const Rating r = b ? rating_b(plan, i, level) : plan.ratings_a[i][static_cast<std::size_t>(level_index(level) - 1)];
        svc.submit_rating(b ? "rater-b" : "rater-a", pair.id, level, r);
    }
}

std::vector<RatingRecord> derived_gold(std::span<const PostResponsePair> pairs) {
    std::vector<RatingRecord> out;
    const std::string at = "2025-01-01T00:00:00Z";
    for (const auto& pair : pairs) {
        for (auto level : levels_for(pair.condition)) {
            const auto h = digest_u64(pair.id + "|" + std::to_string(level_index(level)));
            const Rating a = kAllRatings[h % 4];
            // About one item in six gets a neighbouring rating from rater B.
            const Rating b = (h >> 8) % 6 == 0 ? kAllRatings[(h % 4 + 1) % 4] : a;
            out.push_back({pair.id, "rater-a", level, a, at, Provenance::Human});
            out.push_back({pair.id, "rater-b", level, b, at, Provenance::Human});
            if (a != b) out.push_back({pair.id, "adjudicator", level, a, at, Provenance::Adjudicated});
        }
    }
    return out;
}

namespace {

std::string normalize_manifest(const std::string& text, const fs::path& dir) {
    auto m = nlohmann::ordered_json::parse(text);
    m.erase("started_at");
    m.erase("finished_at");
    const std::string prefix = dir.string() + "/";
    for (const char* section : {"inputs", "outputs"}) {
        nlohmann::ordered_json rel = nlohmann::ordered_json::object();
        for (auto& [k, v] : m[section].items()) {
            std::string key = k;
            if (key.rfind(prefix, 0) == 0) key = key.substr(prefix.size());
            const std::string fixtures = fixture_dir().string() + "/";
            if (key.rfind(fixtures, 0) == 0) key = "fixtures/" + key.substr(fixtures.size());
            rel[key] = v;
        }
        m[section] = rel;
    }
    return m.dump(2);
}

}  // namespace

PipelineRun run_mock_pipeline(const fs::path& dir, std::size_t concurrency) {
    PipelineRun result;
    const std::string d = dir.string() + "/";
    const std::string fx = fixture_dir().string() + "/";
    const std::vector<std::string> global{"--provider", "mock", "--concurrency", std::to_string(concurrency)};
    auto run = [&](std::vector<std::string> args) {
        std::vector<std::string> full = global;
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        if (run_cli(full, out, err) != 0) result.failures.push_back(args.front() + ": " + err.str());
    };
    const std::string ctx_posts = d + "posts.jsonl", ctx_courses = d + "courses.jsonl", ctx_topics = d + "topics.jsonl";

    run({"ingest", "--kind", "posts", "--input", fx + "posts.jsonl", "--out", ctx_posts, "--thread-initial"});
    run({"ingest", "--kind", "courses", "--input", fx + "courses.jsonl", "--out", ctx_courses});
    run({"ingest", "--kind", "topics", "--input", fx + "topics.jsonl", "--out", ctx_topics});
    run({"triage", "--posts", ctx_posts, "--topics", ctx_topics, "--out", d + "labels.jsonl", "--academic-out",
         d + "academic.jsonl"});
    run({"index", "--posts", ctx_posts, "--out", d + "index"});
    run({"simulate", "--posts", ctx_posts, "--courses", ctx_courses, "--topics", ctx_topics, "--index", d + "index",
         "--condition", "both", "--out", d + "pairs.jsonl"});
    run({"judge", "--posts", ctx_posts, "--courses", ctx_courses, "--topics", ctx_topics, "--pairs",
         d + "pairs.jsonl", "--level", "1", "--level", "2", "--level", "3", "--level", "4", "--level", "5", "--out",
         d + "verdicts.jsonl"});
    if (result.failures.empty()) {
        const auto pairs = read_jsonl_file<PostResponsePair>(dir / "pairs.jsonl");
        const auto gold = derived_gold(pairs);
        write_jsonl_file<RatingRecord>(dir / "ratings.jsonl", gold);
        run({"report", "--verdicts", "baseline=" + d + "verdicts.jsonl", "--ratings", d + "ratings.jsonl",
             "--rater-a", "rater-a", "--rater-b", "rater-b", "--pairs", d + "pairs.jsonl", "--diff-level", "1",
             "--diff-level", "2", "--out", d + "report"});
    }

    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), dir).generic_string();
        const std::string body = read_file(e.path());
        const auto name = e.path().filename().string();
        const bool manifest = name == "manifest.json" || name.ends_with(".manifest.json");
        if (manifest) {
            result.manifests[rel] = normalize_manifest(body, dir);
        } else {
            result.outputs[rel] = body;
        }
    }
    return result;
}

std::map<std::string, std::string> without_concurrency(const std::map<std::string, std::string>& manifests) {
    std::map<std::string, std::string> out;
    for (const auto& [name, text] : manifests) {
        auto m = nlohmann::ordered_json::parse(text);
        m.erase("concurrency_limit");
        out[name] = m.dump(2);
    }
    return out;
}

}  // namespace pedeval::testing
