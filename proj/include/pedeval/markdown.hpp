#pragma once

#include <string>
#include <string_view>

namespace pedeval {

/// Characters that can trigger a rewrite. Text containing none of them is
/// returned unchanged (list markers need '+', '.' or ')', blank-line runs '\n').
inline constexpr std::string_view kMarkdownMarkerChars = "#*_`~-+[|.)\n";

/// Removes Markdown formatting line by line:
///   1. fence lines (``` or ~~~) dropped, fenced content kept
///   2. heading prefixes `#`..`######` removed
///   3. paired `**`, `__`, `*`, `_` removed (underscores only at word edges)
///   4. list markers `- `, `* `, `+ `, `1. ` at line start removed
///   5. links and images `[t](u)` replaced by `t`
///   6. table rows reduced to their cells joined by spaces; delimiter rows dropped
///   7. runs of two or more blank lines collapsed to one
/// The pass repeats until nothing changes. Every rule shortens the text, so
/// this terminates and the result is idempotent.
std::string strip_markdown(std::string_view text);

}  // namespace pedeval
