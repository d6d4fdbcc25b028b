#include "amod/chain.hpp"

#include "amod/error.hpp"

#include <array>
#include <optional>

namespace amod {

namespace {

constexpr std::array<std::string_view, 3> kSections{"RULE", "ANALOGY", "REASONING"};
constexpr std::array<std::string_view, 3> kSectionNames{"rule", "analogy", "reasoning"};
constexpr std::string_view kDecisionPrefix = "Decision: ";

std::string open_tag(std::string_view s) { return "<" + std::string(s) + ">"; }
std::string close_tag(std::string_view s) { return "</" + std::string(s) + ">"; }

struct TagHit {
    std::size_t section;
    bool closing;
    std::size_t length;
};

std::optional<TagHit> reserved_tag_at(std::string_view text, std::size_t pos) {
    if (pos >= text.size() || text[pos] != '<') return std::nullopt;
    for (std::size_t s = 0; s < kSections.size(); ++s) {
        const auto open = open_tag(kSections[s]);
        if (text.substr(pos, open.size()) == open) return TagHit{s, false, open.size()};
        const auto close = close_tag(kSections[s]);
        if (text.substr(pos, close.size()) == close) return TagHit{s, true, close.size()};
    }
    return std::nullopt;
}

[[noreturn]] void fail(std::size_t offset, const std::string& expected, const std::string& message) {
    throw ChainParseError(offset, expected, message);
}

[[noreturn]] void fail_expected(std::size_t offset, const std::string& expected) {
    fail(offset, expected, "expected " + expected);
}

// Parses one chain starting at `pos`; returns the offset just past the decision.
std::size_t parse_one(std::string_view text, std::size_t pos, HierarchicalChain& out) {
    std::array<std::string*, 3> targets{&out.rule, &out.analogy, &out.reasoning};
    for (std::size_t s = 0; s < kSections.size(); ++s) {
        if (s > 0) {
            if (pos >= text.size() || text[pos] != '\n') fail_expected(pos, "newline");
            ++pos;
        }
        const auto open = open_tag(kSections[s]);
        if (text.substr(pos, open.size()) != open) {
            if (auto hit = reserved_tag_at(text, pos); hit && !hit->closing && hit->section < s)
                fail(pos, open, "duplicate " + open_tag(kSections[hit->section]));
            fail_expected(pos, open);
        }
        pos += open.size();

        std::string& content = *targets[s];
        const std::size_t content_start = pos;
        bool closed = false;
        while (pos < text.size()) {
            const char c = text[pos];
            if (c == '\\') {
                if (pos + 1 >= text.size()) fail(pos, close_tag(kSections[s]), "dangling escape");
                content.push_back(text[pos + 1]);
                pos += 2;
                continue;
            }
            if (auto hit = reserved_tag_at(text, pos)) {
                if (hit->closing && hit->section == s) {
                    pos += hit->length;
                    closed = true;
                    break;
                }
                if (!hit->closing && hit->section <= s)
                    fail(pos, close_tag(kSections[s]), "duplicate " + open_tag(kSections[hit->section]));
                fail_expected(pos, close_tag(kSections[s]));
            }
            content.push_back(c);
            ++pos;
        }
        if (!closed) fail_expected(pos, close_tag(kSections[s]));
        if (content.empty()) fail(content_start, "content", "empty section: " + std::string(kSectionNames[s]));
    }

    if (pos >= text.size() || text[pos] != '\n') fail_expected(pos, "newline");
    ++pos;
    if (text.substr(pos, kDecisionPrefix.size()) != kDecisionPrefix)
        fail_expected(pos, std::string(kDecisionPrefix));
    pos += kDecisionPrefix.size();
    const auto end = std::min(text.find('\n', pos), text.size());
    if (end == pos) fail_expected(pos, "category");
    out.decision = std::string(text.substr(pos, end - pos));
    return end;
}

}  // namespace

std::string escape_section(std::string_view content) {
    std::string out;
    out.reserve(content.size() + 8);
    for (std::size_t i = 0; i < content.size(); ++i) {
        if (content[i] == '\\') {
            out += "\\\\";
        } else {
            if (reserved_tag_at(content, i)) out.push_back('\\');
            out.push_back(content[i]);
        }
    }
    return out;
}

std::string assemble_hierarchical_chain(const std::string& rule, const std::string& analogy,
                                        const std::string& reasoning, const std::string& decision) {
    const std::array<const std::string*, 3> sections{&rule, &analogy, &reasoning};
    for (std::size_t s = 0; s < sections.size(); ++s)
        if (sections[s]->empty()) throw Error("empty section: " + std::string(kSectionNames[s]));
    if (decision.empty()) throw Error("empty section: decision");
    if (decision.find('\n') != std::string::npos) throw Error("decision must be a single line");

    std::string out;
    for (std::size_t s = 0; s < sections.size(); ++s) {
        out += open_tag(kSections[s]);
        out += escape_section(*sections[s]);
        out += close_tag(kSections[s]);
        out += '\n';
    }
    out += kDecisionPrefix;
    out += decision;
    return out;
}

std::string assemble_hierarchical_chain(const HierarchicalChain& chain) {
    return assemble_hierarchical_chain(chain.rule, chain.analogy, chain.reasoning, chain.decision);
}

HierarchicalChain parse_hierarchical_chain(std::string_view text) {
    HierarchicalChain chain;
    const auto end = parse_one(text, 0, chain);
    if (end != text.size()) fail_expected(end, "end of input");
    return chain;
}

std::vector<HierarchicalChain> split_chains(std::string_view text) {
    std::vector<HierarchicalChain> out;
    std::size_t pos = 0;
    while (true) {
        HierarchicalChain chain;
        pos = parse_one(text, pos, chain);
        out.push_back(std::move(chain));
        if (pos == text.size()) break;
        ++pos;  // the separating line feed
    }
    return out;
}

}  // namespace amod
