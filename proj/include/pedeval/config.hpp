#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace pedeval {

/// Held-out share as an exact ratio train:validation.
struct SplitRatio {
    std::uint32_t train{85};
    std::uint32_t validation{15};

    /// floor(n * validation / (train + validation)), in integer arithmetic.
    std::size_t validation_size(std::size_t n) const;
    bool operator==(const SplitRatio&) const = default;
};

struct PipelineConfig {
    std::size_t retrieval_k{10};
    std::size_t milestone_n{80};
    std::size_t train_ctx_free{150};
    std::size_t train_ctx{150};
    std::size_t synth_cap_per_combo{300};
    SplitRatio sft_train_ratio{};
    std::size_t shots_per_synth_call{5};
    std::size_t pairs_per_synth_call{3};
    std::uint64_t seed{20250101};

    // Generation settings. Not fixed by any published value.
    std::string simulation_model{"llama-3-70b-instruct"};
    std::string judge_model{"gpt-4o-mini"};
    std::string triage_model{"gpt-4o-mini"};
    std::string synth_model{"gpt-4.1-nano"};
    std::string embedding_model{"text-embedding-3-small"};
    double simulation_temperature{0.7};
    double judge_temperature{0.0};
    std::size_t max_tokens{1024};
    std::size_t concurrency_limit{4};

    /// Throws ValidationError unless all counts are positive and the
    /// validation share lies strictly between 0 and 1.
    void validate() const;

    bool operator==(const PipelineConfig&) const = default;
};

/// Reads a TOML file with optional [pipeline] and [generation] tables.
/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config_toml(std::string_view text);

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

/// SHA-256 of config_to_json(cfg).dump().
std::string config_digest(const PipelineConfig& cfg);

}  // namespace pedeval
