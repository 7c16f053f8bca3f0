#include "pedeval/program.hpp"

#include "pedeval/digest.hpp"
#include "pedeval/error.hpp"

namespace pedeval {

namespace {

constexpr std::string_view kBaselineInstruction =
    "Given a discussion forum post and the corresponding teaching assistant response, classify how well this "
    "response adheres to pedagogical goals specified with a rubric. Provide your classification as integers.";

nlohmann::ordered_json content_json(const PromptProgram& p) {
    nlohmann::ordered_json j;
    j["instruction"] = p.instruction;
    j["rules"] = p.rules;
    j["exemplars"] = nlohmann::ordered_json::array();
    for (const auto& e : p.exemplars) j["exemplars"].push_back(e);
    return j;
}

const nlohmann::ordered_json& field(const nlohmann::ordered_json& j, const char* name) {
    if (!j.contains(name)) throw ValidationError(std::string("program: missing field '") + name + "'");
    return j[name];
}

std::string string_field(const nlohmann::ordered_json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_string()) throw ValidationError(std::string("program: field '") + name + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

void to_json(nlohmann::ordered_json& j, const Exemplar& e) {
    j = nlohmann::ordered_json::object();
    j["pair_id"] = e.pair_id;
    j["post_text"] = e.post_text;
    j["response_text"] = e.response_text;
    j["level"] = level_index(e.level);
    j["gold"] = std::string(rating_token(e.gold));
    j["rationale"] = e.rationale;
}

void from_json(const nlohmann::ordered_json& j, Exemplar& e) {
    if (!j.is_object()) throw ValidationError("program: exemplar must be an object");
    e.pair_id = string_field(j, "pair_id");
    e.post_text = string_field(j, "post_text");
    e.response_text = string_field(j, "response_text");
    const auto& level = field(j, "level");
    if (!level.is_number_integer()) throw ValidationError("program: exemplar level must be an integer");
    e.level = level_from_index(level.get<int>());
    auto gold = rating_from_token(string_field(j, "gold"));
    if (!gold) throw ValidationError("program: exemplar gold must be 0, 1, 2 or NA");
    e.gold = *gold;
    e.rationale = string_field(j, "rationale");
}

std::string compute_program_id(const PromptProgram& program) { return sha256_hex(content_json(program).dump()); }

PromptProgram PromptProgram::make(std::string instruction, std::vector<std::string> rules,
                                  std::vector<Exemplar> exemplars) {
    PromptProgram p{{}, std::move(instruction), std::move(rules), std::move(exemplars)};
    p.refresh_id();
    return p;
}

void PromptProgram::refresh_id() { id = compute_program_id(*this); }

PromptProgram baseline_program() { return PromptProgram::make(std::string(kBaselineInstruction)); }

std::string serialize_program(const PromptProgram& program) {
    nlohmann::ordered_json j;
    j["id"] = compute_program_id(program);
    const auto content = content_json(program);
    for (const auto& [k, v] : content.items()) j[k] = v;
    return j.dump(2) + "\n";
}

PromptProgram deserialize_program(std::string_view text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("program: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("program: expected an object");
    for (const auto& [k, _] : j.items()) {
        if (k != "id" && k != "instruction" && k != "rules" && k != "exemplars") {
            throw ValidationError("program: unknown field '" + k + "'");
        }
    }
    PromptProgram p;
    p.id = string_field(j, "id");
    p.instruction = string_field(j, "instruction");
    const auto& rules = field(j, "rules");
    if (!rules.is_array()) throw ValidationError("program: rules must be an array");
    for (const auto& r : rules) {
        if (!r.is_string()) throw ValidationError("program: rules must be strings");
        p.rules.push_back(r.get<std::string>());
    }
    const auto& exemplars = field(j, "exemplars");
    if (!exemplars.is_array()) throw ValidationError("program: exemplars must be an array");
    for (const auto& e : exemplars) p.exemplars.push_back(e.get<Exemplar>());
    const std::string expected = compute_program_id(p);
    if (expected != p.id) {
        throw CorruptionError("program: stored id " + p.id + " does not match content digest " + expected);
    }
    return p;
}

}  // namespace pedeval
