#pragma once

#include "pedeval/config.hpp"
#include "pedeval/judge.hpp"
#include "pedeval/program.hpp"
#include "pedeval/provider.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pedeval {

enum class DataStrategy { AllLevels, LevelSpecific };

struct OptimizeConfig {
    std::size_t minibatch_size{8};
    std::size_t steps{12};
    std::size_t proposals_per_step{4};
    DataStrategy strategy{DataStrategy::AllLevels};
    std::uint64_t seed{20250101};
    std::size_t checkpoint_every{4};
};

/// One labelled (pair, level) the judge is trained on.
struct TrainExample {
    JudgeItem item;
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    Rating gold{Rating::NA};
};

/// Every (item, level) with an effective gold rating, item-major. Level 5
/// is skipped for pairs without forum context.
std::vector<TrainExample> make_train_examples(std::span<const JudgeItem> items, std::span<const RatingRecord> gold,
                                              std::span<const PedLevel> levels);

struct ExampleOutcome {
    std::optional<Rating> predicted;  ///< nullopt when the output never parsed
    std::string rationale;
    bool correct{false};
};

/// Judges each example with `program`. Unparseable outputs count as wrong.
std::vector<ExampleOutcome> score_program(Provider& provider, const PipelineConfig& cfg,
                                          const PromptProgram& program, std::span<const TrainExample> examples);

double outcome_accuracy(std::span<const ExampleOutcome> outcomes);

/// Prompt asking for one rule (at most 40 words) that would fix `failures`.
std::string render_introspection_prompt(const PromptProgram& program, std::span<const TrainExample> failures,
                                        std::span<const ExampleOutcome> outcomes);

/// Candidate programs for one step. Slots alternate rule, exemplar, rule,
/// ... A rule slot asks the model to summarise the failures into a rule; an
/// exemplar slot appends a correctly judged minibatch item not yet used as
/// an exemplar. Slots with nothing to work from, or whose provider call
/// fails, are skipped (noted in `notes`). Candidates are distinct from the
/// parent and from each other.
std::vector<PromptProgram> propose_candidates(Provider& provider, const PipelineConfig& cfg,
                                              const PromptProgram& parent, std::span<const TrainExample> minibatch,
                                              std::span<const ExampleOutcome> outcomes, std::size_t proposals,
                                              std::vector<std::string>* notes = nullptr);

struct StepRecord {
    std::size_t step{0};
    double parent_accuracy{0.0};    ///< on the minibatch
    double best_candidate{0.0};     ///< on the minibatch; 0 when no candidates
    std::size_t candidates{0};
    bool adopted{false};
    std::optional<double> checkpoint;  ///< full-train accuracy when checkpointed
};

struct OptimizeResult {
    PromptProgram program;
    double baseline_accuracy{0.0};
    double best_accuracy{0.0};
    std::vector<StepRecord> steps;
    std::vector<std::string> notes;
};

/// Mini-batch hill climbing over rules and exemplars. Each step samples a
/// seeded minibatch, scores the incumbent and its candidates there, and
/// adopts the best candidate only if it is strictly better. The incumbent is
/// scored on the full training set every `checkpoint_every` steps and after
/// the last step; the best of those (and the baseline) is returned.
OptimizeResult simba_optimize(Provider& provider, const PipelineConfig& cfg, const PromptProgram& baseline,
                              std::span<const TrainExample> train, const OptimizeConfig& opt);

}  // namespace pedeval
