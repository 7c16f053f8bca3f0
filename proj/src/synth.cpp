#include "pedeval/synth.hpp"

#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"
#include "pedeval/parallel.hpp"
#include "pedeval/prompt_markers.hpp"
#include "pedeval/random.hpp"
#include "pedeval/simulate.hpp"

#include <set>

namespace pedeval {

namespace {

constexpr std::string_view kSftTemplate =
    "Given the following discussion forum post from a student and the response from a teaching assistant:\n"
    "\n"
    "---\n"
    "<POST_RESPONSE_PAIR>\n"
    "---\n"
    "\n"
    "Assess the response from the teaching assistant with the following rubric:\n"
    "\n"
    "---\n"
    "<RUBRIC>\n"
    "---\n"
    "\n"
    "Provide your rating directly as \"0\", \"1\", \"2\", or \"NA\".";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string combo_name(PedLevel level, Rating rating) {
    return "level " + std::to_string(level_index(level)) + " rating " + std::string(rating_token(rating));
}

std::uint64_t combo_seed(std::uint64_t seed, PedLevel level, Rating rating, std::uint64_t batch) {
    return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(level_index(level))),
                    mix_seed(rating_slot(rating), batch));
}

}  // namespace

std::string SynthPair::content_digest() const {
    return sha256_hex(post_text + std::string(1, '\x1f') + response_text);
}

void to_json(nlohmann::ordered_json& j, const SynthPair& v) {
    j = nlohmann::ordered_json::object();
    j["post_text"] = v.post_text;
    j["response_text"] = v.response_text;
    j["level"] = level_index(v.level);
    j["target_rating"] = std::string(rating_token(v.target_rating));
    j["source"] = v.source == PairSource::Real ? "Real" : "Synthetic";
    j["provenance"] = v.provenance ? nlohmann::ordered_json(*v.provenance) : nlohmann::ordered_json(nullptr);
}

void from_json(const nlohmann::ordered_json& j, SynthPair& v) {
    try {
        v.post_text = j.at("post_text").get<std::string>();
        v.response_text = j.at("response_text").get<std::string>();
        v.level = level_from_index(j.at("level").get<int>());
        auto r = rating_from_token(j.at("target_rating").get<std::string>());
        if (!r) throw ValidationError("synth pair: bad target_rating");
        v.target_rating = *r;
        const auto source = j.at("source").get<std::string>();
        if (source == "Real") {
            v.source = PairSource::Real;
        } else if (source == "Synthetic") {
            v.source = PairSource::Synthetic;
        } else {
            throw ValidationError("synth pair: source must be Real or Synthetic");
        }
        v.provenance.reset();
        if (j.contains("provenance") && !j["provenance"].is_null()) v.provenance = j["provenance"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("synth pair: ") + e.what());
    }
    if (v.source == PairSource::Synthetic && !v.provenance) {
        throw ValidationError("synth pair: Synthetic pairs need a provenance digest");
    }
}

std::string_view level_rating_description(PedLevel level, Rating rating) { return band_text(level, rating); }

std::vector<SynthPair> real_pairs_for_level(std::span<const JudgeItem> items, std::span<const RatingRecord> gold,
                                            PedLevel level) {
    const auto resolved = effective_ratings(gold);
    std::vector<SynthPair> out;
    for (const auto& item : items) {
        if (!level_applies(item.pair, level)) continue;
        auto it = resolved.find({item.pair.id, level});
        if (it == resolved.end()) continue;
        out.push_back({item.post.text, item.pair.response_text, level, it->second, PairSource::Real, std::nullopt});
    }
    return out;
}

std::vector<SynthPair> sample_in_context(std::span<const SynthPair> pool, PedLevel level, Rating rating,
                                         std::size_t n, std::size_t remaining_need, std::uint64_t seed) {
    if (pool.size() < n) {
        throw ValidationError("sample_in_context: pool of " + std::to_string(pool.size()) + " cannot supply " +
                              std::to_string(n) + " examples");
    }
    std::vector<const SynthPair*> sub;
    for (const auto& p : pool) {
        if (p.level == level && p.target_rating == rating) sub.push_back(&p);
    }
    Rng rng(seed);
    std::vector<SynthPair> out;
    if (sub.size() > remaining_need && sub.size() >= n) {
        for (auto i : rng.sample_indices(sub.size(), n)) out.push_back(*sub[i]);
    } else {
        for (auto i : rng.sample_indices(pool.size(), n)) out.push_back(pool[i]);
    }
    return out;
}

std::string render_synth_prompt(PedLevel level, Rating rating, std::span<const SynthPair> shots,
                                std::size_t pairs_wanted, std::uint64_t variation) {
    std::string p =
        "You create training data for a classifier that rates teaching assistant responses to student "
        "discussion forum posts.\n\n";
    p += "Pedagogical level: Level " + std::to_string(level_index(level)) + ": " + std::string(level_name(level)) + "\n";
    p += "Target rating: " + std::string(band_heading(rating)) + "\n";
    p += "Requirement for the VTA response: " + std::string(level_rating_description(level, rating)) + "\n";
    p += "\nExample post-response pairs:\n";
    for (std::size_t i = 0; i < shots.size(); ++i) {
        p += "\nExample " + std::to_string(i + 1) + "\n";
        p += std::string(markers::kSynthPost) + " " + shots[i].post_text + "\n";
        p += std::string(markers::kSynthResponse) + " " + shots[i].response_text + "\n";
    }
    p += "\nWrite exactly " + std::to_string(pairs_wanted) +
         " new post-response pairs. Each new response must meet the requirement above. Start every pair with a "
         "line containing only " +
         std::string(markers::kSynthDelimiter) + ", then a line beginning with " + std::string(markers::kSynthPost) +
         " and a line beginning with " + std::string(markers::kSynthResponse) + ".\n";
    p += "\nVariation: " + std::to_string(variation) + "\n";
    return p;
}

std::vector<std::pair<std::string, std::string>> parse_synth_output(std::string_view raw, std::size_t expected) {
    std::vector<std::pair<std::string, std::string>> out;
    std::vector<std::string_view> blocks;
    std::size_t pos = raw.find(markers::kSynthDelimiter);
    while (pos != std::string_view::npos) {
        const std::size_t start = pos + markers::kSynthDelimiter.size();
        const std::size_t next = raw.find(markers::kSynthDelimiter, start);
        blocks.push_back(raw.substr(start, next == std::string_view::npos ? std::string_view::npos : next - start));
        pos = next;
    }
    for (auto block : blocks) {
        const auto p = block.find(markers::kSynthPost);
        const auto r = block.find(markers::kSynthResponse);
        if (p == std::string_view::npos || r == std::string_view::npos || r < p) {
            throw UnparseableError("synth output: block lacks POST:/RESPONSE: headers", std::string(raw));
        }
        std::string post = trim(block.substr(p + markers::kSynthPost.size(), r - p - markers::kSynthPost.size()));
        std::string response = trim(block.substr(r + markers::kSynthResponse.size()));
        if (post.empty() || response.empty()) {
            throw UnparseableError("synth output: empty post or response", std::string(raw));
        }
        out.emplace_back(std::move(post), std::move(response));
    }
    if (out.size() != expected) {
        throw UnparseableError("synth output: expected " + std::to_string(expected) + " pairs, parsed " +
                                   std::to_string(out.size()),
                               std::string(raw));
    }
    return out;
}

std::vector<SynthPair> synthesize_batch(Provider& provider, const PipelineConfig& cfg, PedLevel level,
                                        Rating rating, std::span<const SynthPair> shots, std::uint64_t variation) {
    if (shots.size() != cfg.shots_per_synth_call) {
        throw ValidationError("synthesize_batch: expected " + std::to_string(cfg.shots_per_synth_call) +
                              " shots, got " + std::to_string(shots.size()));
    }
    GenerationRequest req{cfg.synth_model,
                          render_synth_prompt(level, rating, shots, cfg.pairs_per_synth_call, variation),
                          cfg.simulation_temperature, cfg.max_tokens, "synth:" + combo_name(level, rating)};
    const std::string digest = request_digest(req);
    const auto parsed = parse_synth_output(provider.generate(req), cfg.pairs_per_synth_call);
    std::vector<SynthPair> out;
    for (const auto& [post, response] : parsed) {
        out.push_back({post, response, level, rating, PairSource::Synthetic, digest});
    }
    return out;
}

BalanceResult balance_dataset(Provider& provider, std::span<const SynthPair> real, PedLevel level,
                              const PipelineConfig& cfg) {
    std::set<std::string> real_digests;
    std::array<std::size_t, 4> counts{};
    for (const auto& p : real) {
        if (p.level != level) {
            throw ValidationError("balance_dataset: pair at level " + std::to_string(level_index(p.level)) +
                                  " in a level " + std::to_string(level_index(level)) + " dataset");
        }
        ++counts[rating_slot(p.target_rating)];
        real_digests.insert(p.content_digest());
    }

    struct ComboOutput {
        ComboStats stats;
        std::vector<SynthPair> pairs;
    };
    auto run_combo = [&](std::size_t slot) {
        const Rating rating = kAllRatings[slot];
        ComboOutput out;
        out.stats.rating = rating;
        out.stats.real = counts[slot];
        const std::size_t need = cfg.synth_cap_per_combo > counts[slot] ? cfg.synth_cap_per_combo - counts[slot] : 0;
        const std::size_t per_call = cfg.pairs_per_synth_call;
        const std::size_t planned = (need + per_call - 1) / per_call;
        const std::size_t max_calls = 2 * planned + 3;
        std::set<std::string> seen = real_digests;
        std::uint64_t batch = 0;
        try {
            while (out.pairs.size() < need) {
                if (out.stats.calls >= max_calls) {
                    throw Error("gave up after " + std::to_string(out.stats.calls) + " calls with " +
                                std::to_string(out.pairs.size()) + " of " + std::to_string(need) +
                                " distinct pairs");
                }
                const std::size_t remaining = need - out.pairs.size();
                const auto shots = sample_in_context(real, level, rating, cfg.shots_per_synth_call, remaining,
                                                     combo_seed(cfg.seed, level, rating, batch));
                auto produced = synthesize_batch(provider, cfg, level, rating, shots, batch);
                ++out.stats.calls;
                ++batch;
                for (auto& p : produced) {
                    if (out.pairs.size() >= need) break;  // overshoot of the last batch
                    if (!seen.insert(p.content_digest()).second) {
                        ++out.stats.duplicates_dropped;
                        continue;
                    }
                    out.pairs.push_back(std::move(p));
                }
            }
        } catch (const ProviderError& e) {
            throw ProviderError(combo_name(level, rating) + ": " + e.what(), e.attempts());
        } catch (const UnparseableError& e) {
            throw UnparseableError(combo_name(level, rating) + ": " + e.what(), e.raw());
        } catch (const ValidationError& e) {
            throw ValidationError(combo_name(level, rating) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(combo_name(level, rating) + ": " + e.what());
        }
        out.stats.synthesized = out.pairs.size();
        return out;
    };
    auto combos = parallel_map(kAllRatings.size(), provider.options().concurrency_limit, run_combo);

    BalanceResult result;
    result.pairs.assign(real.begin(), real.end());
    // Synthetic pairs from different ratings may still collide; the earlier
    // rating keeps its copy and the later one is regenerated is not worth
    // the complexity at these sizes, so such a collision is an error.
    std::set<std::string> all = real_digests;
    for (std::size_t slot = 0; slot < combos.size(); ++slot) {
        result.stats[slot] = combos[slot].stats;
        for (auto& p : combos[slot].pairs) {
            if (!all.insert(p.content_digest()).second) {
                throw Error(combo_name(level, kAllRatings[slot]) + ": synthetic pair duplicates another rating's pair");
            }
            result.pairs.push_back(std::move(p));
        }
    }
    return result;
}

void to_json(nlohmann::ordered_json& j, const SftRecord& v) {
    j = nlohmann::ordered_json::object();
    j["prompt"] = v.prompt;
    j["completion"] = v.completion;
}

std::string render_sft_prompt(const SynthPair& pair, PedLevel level) {
    std::string rubric = rubric_text(level);
    while (!rubric.empty() && rubric.back() == '\n') rubric.pop_back();
    return fill_template(kSftTemplate,
                         {{"POST_RESPONSE_PAIR", "Student post:\n" + pair.post_text +
                                                     "\n\nTeaching assistant response:\n" + pair.response_text},
                          {"RUBRIC", rubric}});
}

SftSplit export_sft(std::span<const SynthPair> dataset, PedLevel level, const PipelineConfig& cfg,
                    std::uint64_t seed, bool stratify) {
    if (dataset.empty()) throw ValidationError("export_sft: empty dataset");
    for (const auto& p : dataset) {
        if (p.level != level) {
            throw ValidationError("export_sft: pair at level " + std::to_string(level_index(p.level)) +
                                  " in a level " + std::to_string(level_index(level)) + " export");
        }
    }
    auto record = [&](const SynthPair& p) { return SftRecord{render_sft_prompt(p, level), std::string(rating_token(p.target_rating))}; };
    SftSplit out;
    Rng rng(seed);
    auto split_group = [&](std::vector<std::size_t> idx) {
        rng.shuffle(idx);
        const std::size_t n_val = cfg.sft_train_ratio.validation_size(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            (k < n_val ? out.validation : out.train).push_back(record(dataset[idx[k]]));
        }
    };
    if (stratify) {
        for (auto rating : kAllRatings) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < dataset.size(); ++i) {
                if (dataset[i].target_rating == rating) idx.push_back(i);
            }
            split_group(std::move(idx));
        }
    } else {
        std::vector<std::size_t> idx(dataset.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        split_group(std::move(idx));
    }
    return out;
}

}  // namespace pedeval
