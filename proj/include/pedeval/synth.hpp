#pragma once

#include "pedeval/config.hpp"
#include "pedeval/judge.hpp"
#include "pedeval/provider.hpp"
#include "pedeval/rubric.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pedeval {

enum class PairSource { Real, Synthetic };

struct SynthPair {
    std::string post_text;
    std::string response_text;
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    Rating target_rating{Rating::NA};
    PairSource source{PairSource::Real};
    std::optional<std::string> provenance;  ///< request digest for Synthetic pairs

    /// SHA-256 over post and response text; used for duplicate detection.
    std::string content_digest() const;
    bool operator==(const SynthPair&) const = default;
};

void to_json(nlohmann::ordered_json& j, const SynthPair& v);
void from_json(const nlohmann::ordered_json& j, SynthPair& v);

/// The rubric band text for one level and rating.
std::string_view level_rating_description(PedLevel level, Rating rating);

/// Real annotated pairs at `level`, labelled with their effective gold
/// rating. Items without gold at that level are skipped.
std::vector<SynthPair> real_pairs_for_level(std::span<const JudgeItem> items, std::span<const RatingRecord> gold,
                                            PedLevel level);

/// n in-context examples drawn without replacement. When the (level,
/// rating) sub-pool holds more than `remaining_need` pairs (and at least n)
/// only it is sampled; otherwise the whole pool is. Throws ValidationError
/// when the pool has fewer than n pairs.
std::vector<SynthPair> sample_in_context(std::span<const SynthPair> pool, PedLevel level, Rating rating,
                                         std::size_t n, std::size_t remaining_need, std::uint64_t seed);

/// Generation prompt. The band text is stated as the requirement for the
/// response; `variation` keeps repeated batches from sharing a cache key.
std::string render_synth_prompt(PedLevel level, Rating rating, std::span<const SynthPair> shots,
                                std::size_t pairs_wanted, std::uint64_t variation);

/// Splits `===PAIR===` blocks with POST: and RESPONSE: headers. Throws
/// UnparseableError unless exactly `expected` well-formed blocks are found.
std::vector<std::pair<std::string, std::string>> parse_synth_output(std::string_view raw, std::size_t expected);

/// One provider call producing cfg.pairs_per_synth_call Synthetic pairs
/// tagged with (level, rating). Requires cfg.shots_per_synth_call shots.
std::vector<SynthPair> synthesize_batch(Provider& provider, const PipelineConfig& cfg, PedLevel level,
                                        Rating rating, std::span<const SynthPair> shots, std::uint64_t variation = 0);

struct ComboStats {
    Rating rating{Rating::NA};
    std::size_t real{0};
    std::size_t synthesized{0};
    std::size_t calls{0};
    std::size_t duplicates_dropped{0};
};

struct BalanceResult {
    std::vector<SynthPair> pairs;      ///< real pairs in input order, then synthetic by rating 0, 1, 2, NA
    std::array<ComboStats, 4> stats;  ///< indexed by rating_slot
};

/// Tops every rating at `level` up to cfg.synth_cap_per_combo. A rating
/// with `need` missing pairs gets ceil(need / pairs_per_synth_call) batches
/// and the overshoot of the last batch is dropped. Pairs duplicating any
/// real or earlier synthetic pair are dropped and replaced by extra batches.
BalanceResult balance_dataset(Provider& provider, std::span<const SynthPair> real, PedLevel level,
                              const PipelineConfig& cfg);

struct SftRecord {
    std::string prompt;
    std::string completion;
    bool operator==(const SftRecord&) const = default;
};

void to_json(nlohmann::ordered_json& j, const SftRecord& v);

/// Fine-tuning prompt for one pair and the level's rubric.
std::string render_sft_prompt(const SynthPair& pair, PedLevel level);

struct SftSplit {
    std::vector<SftRecord> train;
    std::vector<SftRecord> validation;
};

/// Seeded shuffle, then the validation share (floored) goes to validation.
/// With `stratify` the split is done per rating. Throws ValidationError on
/// an empty dataset or pairs from another level.
SftSplit export_sft(std::span<const SynthPair> dataset, PedLevel level, const PipelineConfig& cfg,
                    std::uint64_t seed, bool stratify = false);

}  // namespace pedeval
