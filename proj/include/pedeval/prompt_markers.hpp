#pragma once

// Fixed strings shared by the prompt renderers and the mock backend, which
// uses them to recognise what kind of prompt it was given.

#include <string_view>

namespace pedeval::markers {

inline constexpr std::string_view kJudgeAnswer = "Rating: <token>";
inline constexpr std::string_view kTriage =
    "Classify the discussion forum post into one of the following categories";
inline constexpr std::string_view kTriagePost = "Post content:\n";
inline constexpr std::string_view kTriageGuidelines = "\n\nInstructor guidelines for this post:";
inline constexpr std::string_view kSynthDelimiter = "===PAIR===";
inline constexpr std::string_view kSynthPost = "POST:";
inline constexpr std::string_view kSynthResponse = "RESPONSE:";
inline constexpr std::string_view kIntrospection = "Write one new imperative rule";

}  // namespace pedeval::markers
