#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace amod {

/// Rule, analogy and reasoning sections plus the terminal decision.
///
/// Serialized form (NL is a single line feed):
///
///     <RULE>rule</RULE> NL <ANALOGY>analogy</ANALOGY> NL
///     <REASONING>reasoning</REASONING> NL Decision: <category>
///
/// Inside sections a backslash is written as "\\" and any reserved tag is
/// prefixed with a backslash, so contents may hold arbitrary text.
struct HierarchicalChain {
    std::string rule;
    std::string analogy;
    std::string reasoning;
    std::string decision;

    bool operator==(const HierarchicalChain&) const = default;
};

/// Throws Error("empty section: <name>") for an empty section or decision.
std::string assemble_hierarchical_chain(const std::string& rule, const std::string& analogy,
                                        const std::string& reasoning, const std::string& decision);
std::string assemble_hierarchical_chain(const HierarchicalChain& chain);

/// Throws ChainParseError with the first offending byte offset on any grammar violation.
HierarchicalChain parse_hierarchical_chain(std::string_view text);

/// Parses chains joined by single line feeds.
std::vector<HierarchicalChain> split_chains(std::string_view text);

std::string escape_section(std::string_view content);

}  // namespace amod
