#pragma once

#include "pedeval/rubric.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace pedeval {

/// A labelled example shown to the judge.
struct Exemplar {
    std::string pair_id;
    std::string post_text;
    std::string response_text;
    PedLevel level{PedLevel::ClarifyMisunderstandings};
    Rating gold{Rating::NA};
    std::string rationale;

    bool operator==(const Exemplar&) const = default;
};

/// Judge instructions. The unit that prompt optimization mutates.
struct PromptProgram {
    std::string id;  ///< SHA-256 of the canonical content (everything but the id)
    std::string instruction;
    std::vector<std::string> rules;
    std::vector<Exemplar> exemplars;

    /// Builds a program and computes its id.
    static PromptProgram make(std::string instruction, std::vector<std::string> rules = {},
                              std::vector<Exemplar> exemplars = {});
    void refresh_id();

    bool operator==(const PromptProgram&) const = default;
};

std::string compute_program_id(const PromptProgram& program);

/// Zero-shot judge program.
PromptProgram baseline_program();

/// Pretty-printed JSON with the id first.
std::string serialize_program(const PromptProgram& program);

/// Throws CorruptionError when the stored id does not match the content and
/// ValidationError on malformed input.
PromptProgram deserialize_program(std::string_view text);

void to_json(nlohmann::ordered_json& j, const Exemplar& e);
void from_json(const nlohmann::ordered_json& j, Exemplar& e);

}  // namespace pedeval
