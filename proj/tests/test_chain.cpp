#include "amod/chain.hpp"
#include "amod/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace amod;

namespace {

std::size_t offset_of_failure(std::string_view text) {
    try {
        parse_hierarchical_chain(text);
    } catch (const ChainParseError& e) {
        return e.offset();
    }
    FAIL("parse unexpectedly succeeded: " << text);
    return 0;
}

}  // namespace

TEST_CASE("serialized form") {
    const auto text = assemble_hierarchical_chain("r", "a", "c", "Bias");
    CHECK(text == "<RULE>r</RULE>\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: Bias");
    const auto back = parse_hierarchical_chain(text);
    CHECK(back == HierarchicalChain{"r", "a", "c", "Bias"});
}

TEST_CASE("reserved tags inside content") {
    const HierarchicalChain x{"see </RULE> here", "<ANALOGY> nested", "a \\ backslash </REASONING>", "Harmless"};
    const auto text = assemble_hierarchical_chain(x);
    CHECK(text.find("\\</RULE>") != std::string::npos);
    CHECK(parse_hierarchical_chain(text) == x);
    CHECK(escape_section("<RULE>") == "\\<RULE>");
    CHECK(escape_section("a\\b") == "a\\\\b");
}

TEST_CASE("empty sections") {
    CHECK_THROWS_WITH(assemble_hierarchical_chain("r", "a", "", "Bias"), "empty section: reasoning");
    CHECK_THROWS_WITH(assemble_hierarchical_chain("", "a", "c", "Bias"), "empty section: rule");
    CHECK_THROWS_WITH(assemble_hierarchical_chain("r", "a", "c", ""), "empty section: decision");
    CHECK_THROWS(assemble_hierarchical_chain("r", "a", "c", "two\nlines"));
    CHECK_THROWS_AS(parse_hierarchical_chain("<RULE></RULE>\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: B"),
                    ChainParseError);
}

TEST_CASE("order and duplicates") {
    SUBCASE("analogy first") {
        const std::string text = "<ANALOGY>a</ANALOGY>\n<RULE>r</RULE>\n<REASONING>c</REASONING>\nDecision: Bias";
        try {
            parse_hierarchical_chain(text);
            FAIL("expected failure");
        } catch (const ChainParseError& e) {
            CHECK(std::string(e.what()).find("expected <RULE>") == 0);
            CHECK(e.offset() == 0);
            CHECK(e.expected() == "<RULE>");
        }
    }
    SUBCASE("rule twice") {
        const std::string text = "<RULE>r</RULE>\n<RULE>x</RULE>\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: Bias";
        try {
            parse_hierarchical_chain(text);
            FAIL("expected failure");
        } catch (const ChainParseError& e) {
            CHECK(std::string(e.what()).find("duplicate <RULE>") == 0);
            CHECK(e.offset() == 15);
        }
    }
    SUBCASE("unescaped open tag inside a section") {
        CHECK(offset_of_failure("<RULE>r<RULE></RULE>\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: B") == 7);
    }
    SUBCASE("missing close") {
        CHECK(offset_of_failure("<RULE>r\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: B") == 8);
    }
    SUBCASE("missing decision") {
        const std::string text = "<RULE>r</RULE>\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>";
        CHECK(offset_of_failure(text) == text.size());
        CHECK(offset_of_failure(text + "\nDecision: ") == text.size() + 11);
    }
    SUBCASE("trailing content") {
        const std::string text = "<RULE>r</RULE>\n<ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: B\nmore";
        CHECK(offset_of_failure(text) == text.size() - 5);
    }
    SUBCASE("dangling escape") {
        CHECK(offset_of_failure("<RULE>r\\") == 7);
    }
    SUBCASE("missing separator") {
        CHECK(offset_of_failure("<RULE>r</RULE><ANALOGY>a</ANALOGY>\n<REASONING>c</REASONING>\nDecision: B") == 14);
    }
}

TEST_CASE("concatenated chains split back") {
    const HierarchicalChain a{"r1", "a1", "c1", "Bias"};
    const HierarchicalChain b{"r2 </RULE>", "a2\nmore", "c2", "Harmless"};
    const auto joined = assemble_hierarchical_chain(a) + "\n" + assemble_hierarchical_chain(b);
    const auto parts = split_chains(joined);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0] == a);
    CHECK(parts[1] == b);
    CHECK_THROWS_AS(parse_hierarchical_chain(joined), ChainParseError);
}

TEST_CASE("fuzzed round trips") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        const HierarchicalChain x{oracles::fuzz_section(rng), oracles::fuzz_section(rng), oracles::fuzz_section(rng),
                                  oracles::fuzz_decision(rng)};
        const auto text = assemble_hierarchical_chain(x);
        REQUIRE(parse_hierarchical_chain(text) == x);
    }
}

TEST_CASE("fuzzed corruptions never crash and report offsets within the input") {
    std::mt19937_64 rng(11);
    int rejected = 0;
    for (int i = 0; i < 3000; ++i) {
        auto text = assemble_hierarchical_chain(oracles::fuzz_section(rng), oracles::fuzz_section(rng),
                                                oracles::fuzz_section(rng), "Bias");
        const auto at = rng() % text.size();
        if (rng() % 2) text.erase(at, 1 + rng() % 4);
        else text.insert(at, "</ANALOGY>");
        try {
            parse_hierarchical_chain(text);
        } catch (const ChainParseError& e) {
            ++rejected;
            REQUIRE(e.offset() <= text.size());
        }
    }
    CHECK(rejected > 1000);
}
