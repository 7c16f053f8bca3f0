#include "pedeval/optimize.hpp"

#include "pedeval/error.hpp"
#include "pedeval/parallel.hpp"
#include "pedeval/prompt_markers.hpp"
#include "pedeval/random.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pedeval {

namespace {

constexpr std::size_t kMaxRuleWords = 40;
constexpr std::size_t kMaxFailuresShown = 6;

/// First non-empty line, list bullets and quotes removed, cut to 40 words.
std::string clean_rule(const std::string& raw) {
    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line)) {
        const auto b = line.find_first_not_of(" \t\r-*\"'");
        if (b == std::string::npos) continue;
        line = line.substr(b);
        while (!line.empty() && (line.back() == '"' || line.back() == '\'' || line.back() == '\r' ||
                                 line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        std::istringstream words(line);
        std::string w, out;
        std::size_t n = 0;
        while (words >> w && n < kMaxRuleWords) {
            if (!out.empty()) out += ' ';
            out += w;
            ++n;
        }
        if (!out.empty()) return out;
    }
    return {};
}

bool same_example(const Exemplar& e, const TrainExample& t) {
    return e.pair_id == t.item.pair.id && e.level == t.level;
}

}  // namespace

std::vector<TrainExample> make_train_examples(std::span<const JudgeItem> items, std::span<const RatingRecord> gold,
                                              std::span<const PedLevel> levels) {
    const auto resolved = effective_ratings(gold);
    std::vector<TrainExample> out;
    for (const auto& item : items) {
        for (auto level : levels) {
            if (!level_applies(item.pair, level)) continue;
            auto it = resolved.find({item.pair.id, level});
            if (it == resolved.end()) continue;
            out.push_back({item, level, it->second});
        }
    }
    return out;
}

std::vector<ExampleOutcome> score_program(Provider& provider, const PipelineConfig& cfg,
                                          const PromptProgram& program, std::span<const TrainExample> examples) {
    return parallel_map(examples.size(), provider.options().concurrency_limit, [&](std::size_t i) {
        ExampleOutcome o;
        try {
            auto v = judge_pair(provider, cfg, program, examples[i].item, examples[i].level);
            o.predicted = v.rating;
            o.rationale = v.rationale;
            o.correct = v.rating == examples[i].gold;
        } catch (const UnparseableError&) {
        }
        return o;
    });
}

double outcome_accuracy(std::span<const ExampleOutcome> outcomes) {
    if (outcomes.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& o : outcomes) hits += o.correct;
    return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

std::string render_introspection_prompt(const PromptProgram& program, std::span<const TrainExample> failures,
                                        std::span<const ExampleOutcome> outcomes) {
    std::string p =
        "You are improving the instructions of a judge that rates teaching assistant responses against a "
        "pedagogical rubric.\n\nCurrent instruction:\n" +
        program.instruction + "\n";
    p += "\nCurrent rules:\n";
    if (program.rules.empty()) p += "(none)\n";
    for (const auto& r : program.rules) p += "- " + r + "\n";
    p += "\nThe judge rated these cases incorrectly:\n";
    for (std::size_t i = 0; i < failures.size(); ++i) {
        const auto& f = failures[i];
        p += "\nCase " + std::to_string(i + 1) + " (Level " + std::to_string(level_index(f.level)) + ": " +
             std::string(level_name(f.level)) + ")\n";
        p += "Discussion forum post:\n" + f.item.post.text + "\n";
        p += "Teaching assistant response:\n" + f.item.pair.response_text + "\n";
        p += "Judge rating: " +
             (outcomes[i].predicted ? std::string(rating_token(*outcomes[i].predicted)) : std::string("unparseable")) +
             "\n";
        p += "Correct rating: " + std::string(rating_token(f.gold)) + "\n";
    }
    p += "\n" + std::string(markers::kIntrospection) +
         " of at most 40 words that would prevent these errors. Reply with the rule only.\n";
    return p;
}

std::vector<PromptProgram> propose_candidates(Provider& provider, const PipelineConfig& cfg,
                                              const PromptProgram& parent, std::span<const TrainExample> minibatch,
                                              std::span<const ExampleOutcome> outcomes, std::size_t proposals,
                                              std::vector<std::string>* notes) {
    if (outcomes.size() != minibatch.size()) throw ValidationError("propose_candidates: outcomes do not match minibatch");
    auto note = [&](std::string s) {
        if (notes) notes->push_back(std::move(s));
    };
    std::vector<std::size_t> failed, passed;
    for (std::size_t i = 0; i < minibatch.size(); ++i) (outcomes[i].correct ? passed : failed).push_back(i);

    std::vector<PromptProgram> out;
    std::set<std::string> ids{parent.id};
    std::size_t rule_slots = 0, exemplar_slots = 0;
    for (std::size_t slot = 0; slot < proposals; ++slot) {
        PromptProgram cand = parent;
        if (slot % 2 == 0) {
            const std::size_t r = rule_slots++;
            if (failed.empty()) continue;
            // Each rule slot starts from a different failure so that slots
            // send different prompts.
            std::vector<TrainExample> shown;
            std::vector<ExampleOutcome> shown_outcomes;
            for (std::size_t k = 0; k < std::min(failed.size(), kMaxFailuresShown); ++k) {
                const auto i = failed[(r + k) % failed.size()];
                shown.push_back(minibatch[i]);
                shown_outcomes.push_back(outcomes[i]);
            }
            GenerationRequest req{cfg.judge_model, render_introspection_prompt(parent, shown, shown_outcomes),
                                  cfg.judge_temperature, cfg.max_tokens, "introspect"};
            std::string rule;
            try {
                rule = clean_rule(provider.generate(req));
            } catch (const Error& e) {
                note("rule slot " + std::to_string(slot) + " skipped: " + e.what());
                continue;
            }
            if (rule.empty()) {
                note("rule slot " + std::to_string(slot) + " skipped: empty rule");
                continue;
            }
            cand.rules.push_back(rule);
        } else {
            std::size_t found = passed.size();
            std::size_t eligible = 0;
            for (std::size_t k = 0; k < passed.size(); ++k) {
                const auto& ex = minibatch[passed[k]];
                const bool used = std::any_of(parent.exemplars.begin(), parent.exemplars.end(),
                                              [&](const Exemplar& e) { return same_example(e, ex); });
                if (used) continue;
                if (eligible++ == exemplar_slots) {
                    found = k;
                    break;
                }
            }
            ++exemplar_slots;
            if (found == passed.size()) continue;
            const auto& ex = minibatch[passed[found]];
            cand.exemplars.push_back({ex.item.pair.id, ex.item.post.text, ex.item.pair.response_text, ex.level,
                                      ex.gold, outcomes[passed[found]].rationale});
        }
        cand.refresh_id();
        if (ids.insert(cand.id).second) out.push_back(std::move(cand));
    }
    return out;
}

OptimizeResult simba_optimize(Provider& provider, const PipelineConfig& cfg, const PromptProgram& baseline,
                              std::span<const TrainExample> train, const OptimizeConfig& opt) {
    if (train.empty()) throw ValidationError("simba_optimize: empty training set");
    if (opt.minibatch_size == 0 || opt.minibatch_size > train.size()) {
        throw ValidationError("simba_optimize: minibatch_size must lie in [1, " + std::to_string(train.size()) + "]");
    }
    if (opt.proposals_per_step == 0) throw ValidationError("simba_optimize: proposals_per_step must be positive");
    if (opt.checkpoint_every == 0) throw ValidationError("simba_optimize: checkpoint_every must be positive");
    if (opt.strategy == DataStrategy::LevelSpecific) {
        for (const auto& t : train) {
            if (t.level != train.front().level) {
                throw ValidationError("simba_optimize: LevelSpecific training data spans several levels");
            }
        }
    }

    OptimizeResult result;
    result.program = baseline;
    result.baseline_accuracy = outcome_accuracy(score_program(provider, cfg, baseline, train));
    result.best_accuracy = result.baseline_accuracy;

    PromptProgram incumbent = baseline;
    Rng rng(opt.seed);
    for (std::size_t step = 1; step <= opt.steps; ++step) {
        StepRecord rec;
        rec.step = step;
        std::vector<TrainExample> batch;
        for (auto i : rng.sample_indices(train.size(), opt.minibatch_size)) batch.push_back(train[i]);

        const auto parent_outcomes = score_program(provider, cfg, incumbent, batch);
        rec.parent_accuracy = outcome_accuracy(parent_outcomes);
        auto candidates =
            propose_candidates(provider, cfg, incumbent, batch, parent_outcomes, opt.proposals_per_step, &result.notes);
        rec.candidates = candidates.size();

        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const double acc = outcome_accuracy(score_program(provider, cfg, candidates[c], batch));
            if (!best || acc > rec.best_candidate) {
                best = c;
                rec.best_candidate = acc;
            }
        }
        if (best && rec.best_candidate > rec.parent_accuracy) {
            incumbent = std::move(candidates[*best]);
            rec.adopted = true;
        }

        if (step % opt.checkpoint_every == 0 || step == opt.steps) {
            const double acc = outcome_accuracy(score_program(provider, cfg, incumbent, train));
            rec.checkpoint = acc;
            if (acc > result.best_accuracy) {
                result.best_accuracy = acc;
                result.program = incumbent;
            }
        }
        result.steps.push_back(rec);
    }
    return result;
}

}  // namespace pedeval
