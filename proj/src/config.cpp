#include "pedeval/config.hpp"

#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"

#include <toml.hpp>

#include <fstream>
#include <sstream>

namespace pedeval {

std::size_t SplitRatio::validation_size(std::size_t n) const {
    return n * validation / (static_cast<std::size_t>(train) + validation);
}

void PipelineConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ValidationError(std::string("config: ") + name + " must be positive");
    };
    positive(retrieval_k, "retrieval_k");
    positive(milestone_n, "milestone_n");
    positive(train_ctx_free, "train_ctx_free");
    positive(train_ctx, "train_ctx");
    positive(synth_cap_per_combo, "synth_cap_per_combo");
    positive(shots_per_synth_call, "shots_per_synth_call");
    positive(pairs_per_synth_call, "pairs_per_synth_call");
    positive(max_tokens, "max_tokens");
    positive(concurrency_limit, "concurrency_limit");
    if (sft_train_ratio.train == 0 || sft_train_ratio.validation == 0) {
        throw ValidationError("config: sft_train_ratio must lie strictly between 0 and 1");
    }
    if (simulation_temperature < 0 || judge_temperature < 0) {
        throw ValidationError("config: temperatures must be >= 0");
    }
}

namespace {

template <typename T>
void read_count(const toml::table& t, std::string_view key, T& out) {
    if (auto node = t.get(key)) {
        auto v = node->value<std::int64_t>();
        if (!v || *v < 0) {
            throw ValidationError("config: '" + std::string(key) + "' must be a non-negative integer");
        }
        out = static_cast<T>(*v);
    }
}

void read_string(const toml::table& t, std::string_view key, std::string& out) {
    if (auto node = t.get(key)) {
        auto v = node->value<std::string>();
        if (!v) throw ValidationError("config: '" + std::string(key) + "' must be a string");
        out = *v;
    }
}

void read_double(const toml::table& t, std::string_view key, double& out) {
    if (auto node = t.get(key)) {
        auto v = node->value<double>();
        if (!v) throw ValidationError("config: '" + std::string(key) + "' must be a number");
        out = *v;
    }
}

void reject_unknown(const toml::table& t, std::string_view table,
                    std::initializer_list<std::string_view> known) {
    for (const auto& [k, _] : t) {
        bool ok = false;
        for (auto name : known) ok = ok || k.str() == name;
        if (!ok) {
            throw ValidationError("config: unknown key '" + std::string(k.str()) + "' in [" +
                                  std::string(table) + "]");
        }
    }
}

}  // namespace

PipelineConfig parse_config_toml(std::string_view text) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ValidationError(std::string("config: ") + std::string(e.description()));
    }
    PipelineConfig cfg;
    reject_unknown(root, "root", {"pipeline", "generation"});
    if (auto* p = root["pipeline"].as_table()) {
        reject_unknown(*p, "pipeline",
                       {"retrieval_k", "milestone_n", "train_ctx_free", "train_ctx",
                        "synth_cap_per_combo", "sft_train_ratio", "shots_per_synth_call",
                        "pairs_per_synth_call", "seed"});
        read_count(*p, "retrieval_k", cfg.retrieval_k);
        read_count(*p, "milestone_n", cfg.milestone_n);
        read_count(*p, "train_ctx_free", cfg.train_ctx_free);
        read_count(*p, "train_ctx", cfg.train_ctx);
        read_count(*p, "synth_cap_per_combo", cfg.synth_cap_per_combo);
        read_count(*p, "shots_per_synth_call", cfg.shots_per_synth_call);
        read_count(*p, "pairs_per_synth_call", cfg.pairs_per_synth_call);
        read_count(*p, "seed", cfg.seed);
        if (auto* ratio = (*p)["sft_train_ratio"].as_array()) {
            if (ratio->size() != 2 || !ratio->get(0)->is_integer() || !ratio->get(1)->is_integer()) {
                throw ValidationError("config: sft_train_ratio must be [train, validation] integers");
            }
            cfg.sft_train_ratio.train = static_cast<std::uint32_t>(*ratio->get(0)->value<std::int64_t>());
            cfg.sft_train_ratio.validation =
                static_cast<std::uint32_t>(*ratio->get(1)->value<std::int64_t>());
        }
    }
    if (auto* g = root["generation"].as_table()) {
        reject_unknown(*g, "generation",
                       {"simulation_model", "judge_model", "triage_model", "synth_model",
                        "embedding_model", "simulation_temperature", "judge_temperature",
                        "max_tokens", "concurrency_limit"});
        read_string(*g, "simulation_model", cfg.simulation_model);
        read_string(*g, "judge_model", cfg.judge_model);
        read_string(*g, "triage_model", cfg.triage_model);
        read_string(*g, "synth_model", cfg.synth_model);
        read_string(*g, "embedding_model", cfg.embedding_model);
        read_double(*g, "simulation_temperature", cfg.simulation_temperature);
        read_double(*g, "judge_temperature", cfg.judge_temperature);
        read_count(*g, "max_tokens", cfg.max_tokens);
        read_count(*g, "concurrency_limit", cfg.concurrency_limit);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot read config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_toml(ss.str());
}

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg) {
    nlohmann::ordered_json j;
    j["retrieval_k"] = cfg.retrieval_k;
    j["milestone_n"] = cfg.milestone_n;
    j["train_ctx_free"] = cfg.train_ctx_free;
    j["train_ctx"] = cfg.train_ctx;
    j["synth_cap_per_combo"] = cfg.synth_cap_per_combo;
    j["sft_train_ratio"] = {cfg.sft_train_ratio.train, cfg.sft_train_ratio.validation};
    j["shots_per_synth_call"] = cfg.shots_per_synth_call;
    j["pairs_per_synth_call"] = cfg.pairs_per_synth_call;
    j["seed"] = cfg.seed;
    j["simulation_model"] = cfg.simulation_model;
    j["judge_model"] = cfg.judge_model;
    j["triage_model"] = cfg.triage_model;
    j["synth_model"] = cfg.synth_model;
    j["embedding_model"] = cfg.embedding_model;
    j["simulation_temperature"] = cfg.simulation_temperature;
    j["judge_temperature"] = cfg.judge_temperature;
    j["max_tokens"] = cfg.max_tokens;
    // concurrency_limit is excluded: outputs do not depend on it.
    return j;
}

std::string config_digest(const PipelineConfig& cfg) { return sha256_hex(config_to_json(cfg).dump()); }

}  // namespace pedeval
