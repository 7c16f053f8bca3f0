#include "pedeval/markdown.hpp"

#include <optional>
#include <regex>
#include <vector>

namespace pedeval {

namespace {

const std::regex& fence_re() {
    static const std::regex re(R"(^ {0,3}(```|~~~).*$)");
    return re;
}

const std::regex& heading_re() {
    static const std::regex re(R"(^ {0,3}#{1,6}( +|$))");
    return re;
}

const std::regex& list_re() {
    static const std::regex re(R"(^[ \t]*([-*+]|[0-9]{1,9}[.)])[ \t]+)");
    return re;
}

const std::regex& link_re() {
    static const std::regex re(R"(!?\[([^\[\]\n]*)\]\(([^()\n]*)\))");
    return re;
}

const std::regex& table_delim_re() {
    static const std::regex re(R"(^[ \t]*\|[ \t|:-]*-[ \t|:-]*$)");
    return re;
}

std::string strip_emphasis(const std::string& line) {
    static const std::regex bold_star(R"(\*\*([^\s*](?:.*?[^\s*])??)\*\*)");
    static const std::regex bold_under(R"((^|[^A-Za-z0-9_])__([^\s_](?:.*?[^\s_])??)__(?![A-Za-z0-9_]))");
    static const std::regex it_star(R"(\*([^\s*](?:.*?[^\s*])??)\*)");
    static const std::regex it_under(R"((^|[^A-Za-z0-9_])_([^\s_](?:.*?[^\s_])??)_(?![A-Za-z0-9_]))");
    std::string s = std::regex_replace(line, bold_star, "$1");
    s = std::regex_replace(s, bold_under, "$1$2");
    s = std::regex_replace(s, it_star, "$1");
    s = std::regex_replace(s, it_under, "$1$2");
    return s;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

/// nullopt drops the line.
std::optional<std::string> rewrite_line(std::string line) {
    if (line.find_first_of("`~") != std::string::npos && std::regex_match(line, fence_re())) return std::nullopt;
    if (line.find('#') != std::string::npos) line = std::regex_replace(line, heading_re(), "");
    if (line.find_first_of("*_") != std::string::npos) line = strip_emphasis(line);
    line = std::regex_replace(line, list_re(), "");
    if (line.find('[') != std::string::npos) line = std::regex_replace(line, link_re(), "$1");
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '|') {
        if (std::regex_match(line, table_delim_re())) return std::nullopt;
        std::string joined;
        std::size_t start = first + 1;
        while (start <= line.size()) {
            auto bar = line.find('|', start);
            if (bar == std::string::npos) bar = line.size();
            std::string cell = trim(line.substr(start, bar - start));
            if (!cell.empty()) {
                if (!joined.empty()) joined += ' ';
                joined += cell;
            }
            start = bar + 1;
        }
        line = joined;
    }
    return line;
}

std::string one_pass(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (true) {
        const auto nl = text.find('\n', pos);
        if (auto rewritten = rewrite_line(std::string(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos)))) {
            lines.push_back(std::move(*rewritten));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < lines.size();) {
        std::size_t run = 0;
        while (i + run < lines.size() && blank(lines[i + run])) ++run;
        if (run >= 2) {
            kept.emplace_back();
            i += run;
        } else {
            kept.push_back(std::move(lines[i]));
            ++i;
        }
    }
    std::string out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i > 0) out += '\n';
        out += kept[i];
    }
    return out;
}

}  // namespace

std::string strip_markdown(std::string_view text) {
    std::string current(text);
    while (true) {
        std::string next = one_pass(current);
        if (next == current) return next;
        current = std::move(next);
    }
}

}  // namespace pedeval
