#include "pedeval/cli.hpp"

#include "pedeval/annotate_server.hpp"
#include "pedeval/config.hpp"
#include "pedeval/context.hpp"
#include "pedeval/corpus.hpp"
#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/judge.hpp"
#include "pedeval/optimize.hpp"
#include "pedeval/program.hpp"
#include "pedeval/report.hpp"
#include "pedeval/simulate.hpp"
#include "pedeval/synth.hpp"
#include "pedeval/triage.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

namespace pedeval {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
    if (dynamic_cast<const UnparseableError*>(&e)) return "UnparseableError";
    if (dynamic_cast<const NotFoundError*>(&e)) return "NotFoundError";
    if (dynamic_cast<const ConflictError*>(&e)) return "ConflictError";
    if (dynamic_cast<const CorruptionError*>(&e)) return "CorruptionError";
    if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
    if (dynamic_cast<const ProviderError*>(&e)) return "ProviderError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return "FilesystemError";
    return "InternalError";
}

void error_line(std::ostream& err, std::string_view kind, std::string_view message) {
    err << ordered_json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

template <typename T>
std::vector<T> read_records(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot read file: " + path.string());
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(ordered_json::parse(line).get<T>());
        } catch (const ordered_json::exception& e) {
            throw ValidationError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
std::string dump_records(std::span<const T> records) {
    std::string out;
    for (const auto& r : records) out += ordered_json(r).dump() + "\n";
    return out;
}

/// Per-invocation state: resolved configuration plus the manifest being built.
struct Run {
    std::string command;
    PipelineConfig cfg;
    ProviderMode mode{ProviderMode::Mock};
    std::optional<fs::path> cache_dir;
    ordered_json inputs = ordered_json::object();
    ordered_json outputs = ordered_json::object();
    std::string started_at = utc_now_rfc3339();
    std::ostream* out{nullptr};

    void input(const fs::path& p) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p)) {
                // A directory's own manifest carries timestamps, not content.
                if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) inputs[f.string()] = file_sha256_hex(f);
        } else {
            inputs[p.string()] = file_sha256_hex(p);
        }
    }

    void write(const fs::path& p, std::string_view content) {
        write_text_atomic(p, content);
        outputs[p.string()] = sha256_hex(content);
    }

    void output_dir(const fs::path& dir) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) outputs[f.string()] = file_sha256_hex(f);
    }

    std::shared_ptr<Provider> provider() const {
        ProviderOptions opts;
        opts.mode = mode;
        opts.cache_dir = cache_dir;
        opts.concurrency_limit = cfg.concurrency_limit;
        opts.embedding_model = cfg.embedding_model;
        return make_provider(opts);
    }

    void finish(const fs::path& manifest_path) {
        ordered_json m = ordered_json::object();
        m["command"] = command;
        m["version"] = std::string(kVersion);
        m["rubric_digest"] = rubric_digest();
        m["config_digest"] = config_digest(cfg);
        m["seed"] = cfg.seed;
        m["provider_mode"] = provider_mode_name(mode);
        m["concurrency_limit"] = cfg.concurrency_limit;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        m["started_at"] = started_at;
        m["finished_at"] = utc_now_rfc3339();
        write_text_atomic(manifest_path, m.dump(2) + "\n");
    }
};

fs::path sidecar(const fs::path& out) {
    fs::path p = out;
    p += ".manifest.json";
    return p;
}

/// Optional context tables shared by several commands.
struct ContextFiles {
    std::string posts, courses, topics;

    Corpus load(Run& run, bool posts_required = true) const {
        Corpus c;
        if (!posts.empty()) {
            c.posts = read_jsonl_file<ForumPost>(posts);
            run.input(posts);
        } else if (posts_required) {
            throw ValidationError("--posts is required");
        }
        if (!courses.empty()) {
            c.courses = read_jsonl_file<CourseInfo>(courses);
            run.input(courses);
        }
        if (!topics.empty()) {
            c.topics = read_jsonl_file<DiscussionTopic>(topics);
            run.input(topics);
        }
        return c;
    }

    void add_to(CLI::App* sc) {
        sc->add_option("--posts", posts, "Posts JSONL");
        sc->add_option("--courses", courses, "Courses JSONL");
        sc->add_option("--topics", topics, "Topics JSONL");
    }
};

// Option storage for each subcommand; it must outlive parsing.
struct IngestArgs {
    std::string kind;
    std::string input;
    std::string output;
    bool thread_initial{false};
};

struct TriageArgs {
    ContextFiles ctx;
    std::string output;
    std::string academic_out;
};

struct IndexArgs {
    std::string posts;
    std::string output;
};

struct SimulateArgs {
    ContextFiles ctx;
    std::string index_dir;
    std::string condition{"both"};
    std::string label;
    std::string output;
};

struct JudgeArgs {
    ContextFiles ctx;
    std::string pairs;
    std::string program_path;
    std::string output;
    std::vector<int> levels;
    bool strip{false};
};

struct OptimizeArgs {
    ContextFiles ctx;
    std::string pairs;
    std::string ratings;
    std::string output;
    std::string strategy{"all-levels"};
    std::vector<int> levels;
    OptimizeConfig opt;
};

struct SynthesizeArgs {
    ContextFiles ctx;
    std::string pairs;
    std::string ratings;
    std::string output;
    int level{0};
};

struct ExportSftArgs {
    std::string input;
    std::string out_dir;
    int level{0};
    bool stratify{false};
};

struct EvaluateArgs {
    std::string verdicts;
    std::string ratings;
    std::string output;
};

struct ReportArgs {
    std::vector<std::string> verdict_specs;
    std::string ratings;
    std::string rater_a;
    std::string rater_b;
    std::string pairs;
    std::string diff_from{"verdicts"};
    std::string output;
    std::vector<int> diff_levels;
};

struct AnnotateServeArgs {
    ContextFiles ctx;
    std::string pairs;
    std::string rater_a;
    std::string rater_b;
    std::string adjudicator;
    std::string log_path;
    std::string host{"127.0.0.1"};
    std::string static_dir;
    int port{8080};
    std::size_t milestone{0};
};

struct RubricArgs {
    int level{0};
};

std::vector<PedLevel> to_levels(const std::vector<int>& raw) {
    std::vector<PedLevel> out;
    if (raw.empty()) return {kAllLevels.begin(), kAllLevels.end()};
    std::set<int> seen;
    for (int l : raw) {
        if (seen.insert(l).second) out.push_back(level_from_index(l));
    }
    return out;
}

std::atomic<AnnotationServer*> g_server{nullptr};

extern "C" void stop_server(int) {
    if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulate, annotate and judge the pedagogical quality of teaching assistant responses", "pedeval"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string provider_name = "mock", cache_dir, config_path;
    std::size_t concurrency = 0;
    std::uint64_t seed = 0;
    app.add_option("--provider", provider_name, "mock, replay or live")
        ->check(CLI::IsMember({"mock", "replay", "live"}));
    app.add_option("--cache", cache_dir, "Provider cache directory");
    auto* concurrency_opt = app.add_option("--concurrency", concurrency, "In-flight provider calls")
                                ->check(CLI::PositiveNumber);
    app.add_option("--config", config_path, "TOML configuration");
    auto* seed_opt = app.add_option("--seed", seed, "Overrides the configured seed");

    Run run;
    std::function<void()> action;

    IngestArgs ingest_args;
    TriageArgs triage_args;
    IndexArgs index_args;
    SimulateArgs simulate_args;
    JudgeArgs judge_args;
    OptimizeArgs optimize_args;
    SynthesizeArgs synthesize_args;
    ExportSftArgs export_sft_args;
    EvaluateArgs evaluate_args;
    ReportArgs report_args;
    AnnotateServeArgs annotate_serve_args;
    RubricArgs rubric_args;

    // ingest
    {
        auto* sc = app.add_subcommand("ingest", "Validate one entity file and write it in canonical form");
        sc->add_option("--kind", ingest_args.kind, "posts, courses, topics, pairs or ratings")->required();
        sc->add_option("--input", ingest_args.input)->required();
        sc->add_option("--out", ingest_args.output)->required();
        sc->add_flag("--thread-initial", ingest_args.thread_initial, "Keep only posts that open their thread");
        sc->callback([&] {
            action = [&] {
                const auto k = entity_kind_from_name(ingest_args.kind);
                if (ingest_args.thread_initial && k != EntityKind::Posts) {
                    throw ValidationError("--thread-initial applies to posts only");
                }
                Corpus c = ingest_jsonl(ingest_args.input, k);
                run.input(ingest_args.input);
                std::string text;
                switch (k) {
                    case EntityKind::Posts: {
                        auto posts = ingest_args.thread_initial ? filter_thread_initial(c.posts) : c.posts;
                        text = to_jsonl<ForumPost>(posts);
                        *run.out << "posts: " << posts.size() << "\n";
                        break;
                    }
                    case EntityKind::Courses: text = to_jsonl<CourseInfo>(c.courses); break;
                    case EntityKind::Topics: text = to_jsonl<DiscussionTopic>(c.topics); break;
                    case EntityKind::Pairs: text = to_jsonl<PostResponsePair>(c.pairs); break;
                    case EntityKind::Ratings: text = to_jsonl<RatingRecord>(c.ratings); break;
                }
                run.write(ingest_args.output, text);
                run.finish(sidecar(ingest_args.output));
            };
        });
    }

    // triage
    {
        auto* sc = app.add_subcommand("triage", "Classify posts into the five forum categories");
        triage_args.ctx.add_to(sc);
        sc->add_option("--out", triage_args.output, "Labels JSONL")->required();
        sc->add_option("--academic-out", triage_args.academic_out, "Posts labelled Academic Question");
        sc->callback([&] {
            action = [&] {
                Corpus c = triage_args.ctx.load(run);
                auto provider = run.provider();
                const auto cats = classify_posts(*provider, run.cfg, c.posts, c.topics);
                std::vector<PostLabel> labels;
                std::vector<ForumPost> academic;
                for (std::size_t i = 0; i < cats.size(); ++i) {
                    labels.push_back({c.posts[i].id, cats[i]});
                    if (cats[i] == PostCategory::AcademicQuestion) academic.push_back(c.posts[i]);
                }
                run.write(triage_args.output, dump_records<PostLabel>(labels));
                if (!triage_args.academic_out.empty()) run.write(triage_args.academic_out, to_jsonl<ForumPost>(academic));
                *run.out << "posts: " << labels.size() << ", academic questions: " << academic.size() << "\n";
                run.finish(sidecar(triage_args.output));
            };
        });
    }

    // index
    {
        auto* sc = app.add_subcommand("index", "Embed posts into a similarity index");
        sc->add_option("--posts", index_args.posts)->required();
        sc->add_option("--out", index_args.output, "Index directory")->required();
        sc->callback([&] {
            action = [&] {
                auto all = read_jsonl_file<ForumPost>(index_args.posts);
                run.input(index_args.posts);
                auto provider = run.provider();
                const PostIndex index = build_index(*provider, all);
                index.save(index_args.output);
                run.output_dir(index_args.output);
                *run.out << "indexed: " << index.size() << "\n";
                run.finish(fs::path(index_args.output) / "manifest.json");
            };
        });
    }

    // simulate
    {
        auto* sc = app.add_subcommand("simulate", "Generate teaching assistant responses");
        simulate_args.ctx.add_to(sc);
        sc->add_option("--index", simulate_args.index_dir, "Index directory (needed for forum context)");
        sc->add_option("--condition", simulate_args.condition, "context-free, forum-context, mooc or both")
            ->check(CLI::IsMember({"context-free", "forum-context", "mooc", "both"}));
        sc->add_option("--label", simulate_args.label, "Generator model label (default: configured simulation model)");
        sc->add_option("--out", simulate_args.output, "Pairs JSONL")->required();
        sc->callback([&] {
            action = [&] {
                Corpus c = simulate_args.ctx.load(run);
                std::optional<PostIndex> index;
                if (!simulate_args.index_dir.empty()) {
                    index = PostIndex::load(simulate_args.index_dir);
                    run.input(simulate_args.index_dir);
                }
                const std::string gen = simulate_args.label.empty() ? run.cfg.simulation_model : simulate_args.label;
                std::vector<SimulationJob> jobs;
                if (simulate_args.condition == "mooc") {
                    jobs = mooc_jobs(gen, c.posts);
                } else {
                    if (simulate_args.condition != "forum-context") {
                        auto j = condition_jobs(Condition::ContextFree, gen, c.posts);
                        jobs.insert(jobs.end(), j.begin(), j.end());
                    }
                    if (simulate_args.condition != "context-free") {
                        auto j = condition_jobs(Condition::ForumContext, gen, c.posts);
                        jobs.insert(jobs.end(), j.begin(), j.end());
                    }
                }
                SimulationEnv env(c.posts, c.courses, c.topics, index ? &*index : nullptr);
                auto provider = run.provider();
                const auto pairs = run_simulation(*provider, run.cfg, jobs, env);
                run.write(simulate_args.output, to_jsonl<PostResponsePair>(pairs));
                *run.out << "pairs: " << pairs.size() << "\n";
                run.finish(sidecar(simulate_args.output));
            };
        });
    }

    // judge
    {
        auto* sc = app.add_subcommand("judge", "Rate pairs against the rubric with a judge program");
        judge_args.ctx.add_to(sc);
        sc->add_option("--pairs", judge_args.pairs)->required();
        sc->add_option("--program", judge_args.program_path, "Program JSON (default: baseline)");
        sc->add_option("--level", judge_args.levels, "Levels to judge (repeatable; default all)");
        sc->add_flag("--strip-markdown", judge_args.strip, "Strip markdown from responses first");
        sc->add_option("--out", judge_args.output, "Verdicts JSONL")->required();
        sc->callback([&] {
            action = [&] {
                Corpus c = judge_args.ctx.load(run);
                c.pairs = read_jsonl_file<PostResponsePair>(judge_args.pairs);
                run.input(judge_args.pairs);
                PromptProgram program = baseline_program();
                if (!judge_args.program_path.empty()) {
                    std::ifstream in(judge_args.program_path, std::ios::binary);
                    if (!in) throw NotFoundError("cannot read file: " + judge_args.program_path);
                    program = deserialize_program(std::string(std::istreambuf_iterator<char>(in), {}));
                    run.input(judge_args.program_path);
                }
                const auto items = make_judge_items(c.pairs, c);
                const auto lv = to_levels(judge_args.levels);
                auto provider = run.provider();
                const auto verdicts = judge_batch(*provider, run.cfg, program, items, lv, judge_args.strip);
                run.write(judge_args.output, dump_records<JudgeVerdict>(verdicts));
                *run.out << "verdicts: " << verdicts.size() << " (program " << program.id.substr(0, 12) << ")\n";
                run.finish(sidecar(judge_args.output));
            };
        });
    }

    // optimize
    {
        auto* sc = app.add_subcommand("optimize", "Improve the judge program by mini-batch hill climbing");
        optimize_args.ctx.add_to(sc);
        sc->add_option("--pairs", optimize_args.pairs, "Training pairs JSONL")->required();
        sc->add_option("--ratings", optimize_args.ratings, "Gold ratings JSONL")->required();
        sc->add_option("--level", optimize_args.levels, "Levels to train on (repeatable; default all)");
        sc->add_option("--strategy", optimize_args.strategy, "all-levels or level-specific")
            ->check(CLI::IsMember({"all-levels", "level-specific"}));
        sc->add_option("--steps", optimize_args.opt.steps);
        sc->add_option("--minibatch", optimize_args.opt.minibatch_size);
        sc->add_option("--proposals", optimize_args.opt.proposals_per_step);
        sc->add_option("--checkpoint-every", optimize_args.opt.checkpoint_every);
        sc->add_option("--out", optimize_args.output, "Program JSON")->required();
        sc->callback([&] {
            action = [&] {
                Corpus c = optimize_args.ctx.load(run);
                c.pairs = read_jsonl_file<PostResponsePair>(optimize_args.pairs);
                run.input(optimize_args.pairs);
                const auto gold = read_jsonl_file<RatingRecord>(optimize_args.ratings);
                run.input(optimize_args.ratings);
                const auto lv = to_levels(optimize_args.levels);
                optimize_args.opt.strategy = optimize_args.strategy == "level-specific" ? DataStrategy::LevelSpecific : DataStrategy::AllLevels;
                optimize_args.opt.seed = run.cfg.seed;
                const auto items = make_judge_items(c.pairs, c);
                const auto train = make_train_examples(items, gold, lv);
                auto provider = run.provider();
                const auto result = simba_optimize(*provider, run.cfg, baseline_program(), train, optimize_args.opt);
                run.write(optimize_args.output, serialize_program(result.program));
                char buf[128];
                std::snprintf(buf, sizeof buf, "train accuracy: baseline %.3f, best %.3f\n",
                              result.baseline_accuracy, result.best_accuracy);
                *run.out << buf << "program: " << result.program.id << "\n";
                run.finish(sidecar(optimize_args.output));
            };
        });
    }

    // synthesize
    {
        auto* sc = app.add_subcommand("synthesize", "Balance one level's ratings with synthetic pairs");
        synthesize_args.ctx.add_to(sc);
        sc->add_option("--pairs", synthesize_args.pairs, "Annotated pairs JSONL")->required();
        sc->add_option("--ratings", synthesize_args.ratings, "Gold ratings JSONL")->required();
        sc->add_option("--level", synthesize_args.level)->required();
        sc->add_option("--out", synthesize_args.output, "Dataset JSONL")->required();
        sc->callback([&] {
            action = [&] {
                const PedLevel lv = level_from_index(synthesize_args.level);
                Corpus c = synthesize_args.ctx.load(run);
                c.pairs = read_jsonl_file<PostResponsePair>(synthesize_args.pairs);
                run.input(synthesize_args.pairs);
                const auto gold = read_jsonl_file<RatingRecord>(synthesize_args.ratings);
                run.input(synthesize_args.ratings);
                const auto items = make_judge_items(c.pairs, c);
                const auto real = real_pairs_for_level(items, gold, lv);
                auto provider = run.provider();
                const auto result = balance_dataset(*provider, real, lv, run.cfg);
                run.write(synthesize_args.output, dump_records<SynthPair>(result.pairs));
                for (const auto& s : result.stats) {
                    *run.out << "rating " << rating_token(s.rating) << ": real " << s.real << ", synthetic "
                             << s.synthesized << ", calls " << s.calls << "\n";
                }
                run.finish(sidecar(synthesize_args.output));
            };
        });
    }

    // export-sft
    {
        auto* sc = app.add_subcommand("export-sft", "Write prompt/completion files for fine-tuning");
        sc->add_option("--input", export_sft_args.input, "Dataset JSONL from synthesize")->required();
        sc->add_option("--level", export_sft_args.level)->required();
        sc->add_option("--out-dir", export_sft_args.out_dir)->required();
        sc->add_flag("--stratify", export_sft_args.stratify, "Split each rating separately");
        sc->callback([&] {
            action = [&] {
                const PedLevel lv = level_from_index(export_sft_args.level);
                const auto data = read_records<SynthPair>(export_sft_args.input);
                run.input(export_sft_args.input);
                const auto split = export_sft(data, lv, run.cfg, run.cfg.seed, export_sft_args.stratify);
                const std::string stem = "level" + std::to_string(export_sft_args.level);
                run.write(fs::path(export_sft_args.out_dir) / (stem + "_train.jsonl"), dump_records<SftRecord>(split.train));
                run.write(fs::path(export_sft_args.out_dir) / (stem + "_val.jsonl"), dump_records<SftRecord>(split.validation));
                *run.out << "train: " << split.train.size() << ", validation: " << split.validation.size() << "\n";
                run.finish(fs::path(export_sft_args.out_dir) / "manifest.json");
            };
        });
    }

    // evaluate
    {
        auto* sc = app.add_subcommand("evaluate", "Per-level weighted F-1 and accuracy of verdicts");
        sc->add_option("--verdicts", evaluate_args.verdicts)->required();
        sc->add_option("--ratings", evaluate_args.ratings, "Gold ratings JSONL")->required();
        sc->add_option("--out", evaluate_args.output, "Metrics JSON")->required();
        sc->callback([&] {
            action = [&] {
                const auto v = read_records<JudgeVerdict>(evaluate_args.verdicts);
                run.input(evaluate_args.verdicts);
                const auto gold = read_jsonl_file<RatingRecord>(evaluate_args.ratings);
                run.input(evaluate_args.ratings);
                Report r;
                r.rows.push_back(evaluate_classifier(fs::path(evaluate_args.verdicts).stem().string(), v, gold));
                run.write(evaluate_args.output, report_to_json(r).dump(2) + "\n");
                *run.out << format_report(r);
                run.finish(sidecar(evaluate_args.output));
            };
        });
    }

    // report
    {
        auto* sc = app.add_subcommand("report", "Per-level table, agreement and score-difference histograms");
        sc->add_option("--verdicts", report_args.verdict_specs, "[label=]verdicts.jsonl (repeatable)");
        sc->add_option("--ratings", report_args.ratings, "Gold ratings JSONL");
        sc->add_option("--rater-a", report_args.rater_a, "First rater id for the agreement section");
        sc->add_option("--rater-b", report_args.rater_b, "Second rater id for the agreement section");
        sc->add_option("--pairs", report_args.pairs, "Pairs JSONL for score differences");
        sc->add_option("--diff-level", report_args.diff_levels, "Levels for score differences (repeatable)");
        sc->add_option("--diff-from", report_args.diff_from, "verdicts (first classifier) or gold")
            ->check(CLI::IsMember({"verdicts", "gold"}));
        sc->add_option("--out", report_args.output, "Output prefix; writes .json and .txt")->required();
        sc->callback([&] {
            action = [&] {
                std::vector<RatingRecord> gold;
                if (!report_args.ratings.empty()) {
                    gold = read_jsonl_file<RatingRecord>(report_args.ratings);
                    run.input(report_args.ratings);
                }
                Report r;
                std::vector<std::vector<JudgeVerdict>> all_verdicts;
                for (const auto& spec : report_args.verdict_specs) {
                    const auto eq = spec.find('=');
                    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
                    const std::string label = eq == std::string::npos ? fs::path(path).stem().string() : spec.substr(0, eq);
                    all_verdicts.push_back(read_records<JudgeVerdict>(path));
                    run.input(path);
                    if (!report_args.ratings.empty()) r.rows.push_back(evaluate_classifier(label, all_verdicts.back(), gold));
                }
                if (report_args.rater_a.empty() != report_args.rater_b.empty()) {
                    throw ValidationError("--rater-a and --rater-b go together");
                }
                if (!report_args.rater_a.empty()) {
                    std::vector<RatingRecord> a, b;
                    for (const auto& g : gold) {
                        if (g.provenance != Provenance::Human) continue;
                        if (g.rater_id == report_args.rater_a) a.push_back(g);
                        if (g.rater_id == report_args.rater_b) b.push_back(g);
                    }
                    r.agreement = agreement_report(a, b);
                }
                if (!report_args.diff_levels.empty()) {
                    if (report_args.pairs.empty()) throw ValidationError("--diff-level needs --pairs");
                    const auto all_pairs = read_jsonl_file<PostResponsePair>(report_args.pairs);
                    run.input(report_args.pairs);
                    std::vector<RatingRecord> source;
                    if (report_args.diff_from == "verdicts") {
                        if (all_verdicts.empty()) throw ValidationError("--diff-from verdicts needs --verdicts");
                        for (const auto& v : all_verdicts.front()) source.push_back(verdict_record(v, "judge"));
                    } else {
                        if (gold.empty()) throw ValidationError("--diff-from gold needs --ratings");
                        for (const auto& [key, rating] : effective_ratings(gold)) {
                            source.push_back({key.first, "gold", key.second, rating, std::string(kEpochTimestamp),
                                              Provenance::Adjudicated});
                        }
                    }
                    std::map<std::string, Condition> condition_of;
                    for (const auto& p : all_pairs) condition_of[p.id] = p.condition;
                    std::vector<RatingRecord> with, without;
                    for (const auto& rec : source) {
                        auto it = condition_of.find(rec.pair_id);
                        if (it == condition_of.end()) continue;
                        if (it->second == Condition::ForumContext) with.push_back(rec);
                        if (it->second == Condition::ContextFree) without.push_back(rec);
                    }
                    const auto keys = alignment_keys(all_pairs);
                    for (auto l : to_levels(report_args.diff_levels)) {
                        r.score_diffs.push_back({l, score_diff_distribution(with, without, l, keys)});
                    }
                }
                const std::string text = format_report(r);
                run.write(report_args.output + ".json", report_to_json(r).dump(2) + "\n");
                run.write(report_args.output + ".txt", text);
                *run.out << text;
                run.finish(report_args.output + ".manifest.json");
            };
        });
    }

    // annotate-serve
    {
        auto* sc = app.add_subcommand("annotate-serve", "Serve the dual-rater annotation workflow over HTTP");
        annotate_serve_args.ctx.add_to(sc);
        sc->add_option("--pairs", annotate_serve_args.pairs, "Pairs to annotate, in task order")->required();
        sc->add_option("--rater-a", annotate_serve_args.rater_a)->required();
        sc->add_option("--rater-b", annotate_serve_args.rater_b)->required();
        sc->add_option("--adjudicator", annotate_serve_args.adjudicator)->required();
        sc->add_option("--log", annotate_serve_args.log_path, "Append-only event log")->required();
        sc->add_option("--host", annotate_serve_args.host);
        sc->add_option("--port", annotate_serve_args.port);
        sc->add_option("--milestone", annotate_serve_args.milestone, "Completed pairs before the agreement check (default: config)");
        sc->add_option("--static", annotate_serve_args.static_dir, "Directory with the rater UI");
        sc->callback([&] {
            action = [&] {
                StudySetup setup;
                setup.context = annotate_serve_args.ctx.load(run);
                setup.pairs = read_jsonl_file<PostResponsePair>(annotate_serve_args.pairs);
                setup.rater_a = annotate_serve_args.rater_a;
                setup.rater_b = annotate_serve_args.rater_b;
                setup.adjudicator = annotate_serve_args.adjudicator;
                setup.milestone_n = annotate_serve_args.milestone ? annotate_serve_args.milestone : run.cfg.milestone_n;
                setup.log_path = annotate_serve_args.log_path;
                AnnotationService service(std::move(setup));
                AnnotationServer server(service, annotate_serve_args.static_dir.empty() ? std::nullopt
                                                                    : std::optional<fs::path>(annotate_serve_args.static_dir));
                const int bound = server.bind(annotate_serve_args.host, annotate_serve_args.port);
                *run.out << "listening on http://" << annotate_serve_args.host << ":" << bound << std::endl;
                g_server = &server;
                auto prev_int = std::signal(SIGINT, stop_server);
                auto prev_term = std::signal(SIGTERM, stop_server);
                server.serve();
                std::signal(SIGINT, prev_int);
                std::signal(SIGTERM, prev_term);
                g_server = nullptr;
            };
        });
    }

    // rubric
    {
        auto* sc = app.add_subcommand("rubric", "Print the rubric");
        sc->add_option("--level", rubric_args.level, "One level (default all)");
        sc->callback([&] {
            action = [&] {
                if (rubric_args.level != 0) {
                    *run.out << rubric_text(level_from_index(rubric_args.level));
                    return;
                }
                for (std::size_t i = 0; i < kAllLevels.size(); ++i) {
                    if (i) *run.out << "\n";
                    *run.out << rubric_text(kAllLevels[i]);
                }
            };
        });
    }

    // version
    {
        auto* sc = app.add_subcommand("version", "Print the code version and rubric digest");
        sc->callback([&] {
            action = [&] {
                *run.out << "pedeval " << kVersion << "\n"
                         << "rubric " << kRubricVersion << " " << rubric_digest() << "\n";
            };
        });
    }

    std::vector<const char*> argv{"pedeval"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        error_line(err, "UsageError", e.what());
        err << app.help();
        return 2;
    }

    run.out = &out;
    run.command = app.get_subcommands().front()->get_name();
    try {
        if (!config_path.empty()) {
            run.cfg = load_config(config_path);
            run.input(config_path);
        }
        if (seed_opt->count()) run.cfg.seed = seed;
        if (concurrency_opt->count()) run.cfg.concurrency_limit = concurrency;
        run.cfg.validate();
        run.mode = provider_mode_from_name(provider_name);
        if (!cache_dir.empty()) run.cache_dir = fs::path(cache_dir);
        action();
    } catch (const UnparseableError& e) {
        error_line(err, error_kind(e), e.what());
        return 1;
    } catch (const std::exception& e) {
        error_line(err, error_kind(e), e.what());
        return 1;
    }
    return 0;
}

}  // namespace pedeval
