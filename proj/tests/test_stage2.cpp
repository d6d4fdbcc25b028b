#include "amod/error.hpp"
#include "amod/stage2.hpp"
#include "pipeline_fixture.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace amod;
using testing_support::PipelineFixture;

TEST_CASE("virtual analogies parsed from model output") {
    const auto schema = fine_grained_schema();
    const std::string output =
        "Here are cases.\nExample 1: a post about rigged ballots\nLabel: Politics\n"
        "Example 2: odds for tonight's match\nLabel: gambling\nExample 3: a slur about a group\nLabel: Bias\n";
    const auto got = parse_virtual_analogies(output, "inst7", schema);
    REQUIRE(got.size() == 3);
    CHECK(got[0].id == "virt:inst7:1");
    CHECK(got[1].id == "virt:inst7:2");
    CHECK(got[2].id == "virt:inst7:3");
    CHECK(got[1].label == "Gambling");
    CHECK(got[2].text == "a slur about a group");
    for (const auto& a : got) CHECK(a.origin == AnalogyOrigin::generated);

    CHECK(parse_virtual_analogies("Just some prose without markers.", "inst7", schema).empty());
    CHECK(parse_virtual_analogies("Example 1: no label follows", "i", schema).empty());
}

TEST_CASE("generate_virtual_analogies errors on prose") {
    MockScript s;
    s.id = "coa";
    MockRule r;
    r.pattern = "Task: virtual analogies";
    r.response = "I would rather not list examples.";
    s.rules.push_back(r);
    Gateway gw;
    const auto h = gw.register_mock(s, ModelKind::coa);
    const auto templates = TemplateSet::load(AMOD_TEMPLATE_DIR);
    CHECK_THROWS_WITH_AS(generate_virtual_analogies(gw, h, {"i", "text", "Bias", {}}, templates, fine_grained_schema()),
                         "no analogies parsed", ParseError);
}

TEST_CASE("rule text between delimiters") {
    CHECK(extract_rule_text("Category: Bias\nRULE: Content implying ability from scores is bias. END") ==
          "Content implying ability from scores is bias.");
    CHECK(extract_rule_text("RULE: first END\nRULE: second END") == "second");
    CHECK_FALSE(extract_rule_text("RULE:  END"));
    CHECK_FALSE(extract_rule_text("no delimiters here"));
}

TEST_CASE("rule records carry provenance") {
    const ModerationInstance inst{"i9", "text", "Bias", {}};
    const std::vector<AnalogyExample> analogies{{"virt:i9:1", "a", "Bias", AnalogyOrigin::generated, {}},
                                                {"virt:i9:2", "b", "Bias", AnalogyOrigin::generated, {}}};
    const auto rule = rule_from_output(inst, analogies, "aux-model", "Category: Bias\nRULE: Scores imply bias. END");
    CHECK(rule.rule_id == "rule:i9");
    CHECK(rule.text == "Scores imply bias.");
    CHECK(rule.analogy_ids == std::vector<std::string>{"virt:i9:1", "virt:i9:2"});
    CHECK(rule.inducer_model == "aux-model");
    CHECK(rule.status == RuleStatus::unverified);

    const auto bad = rule_from_output(inst, analogies, "aux-model", "Category: Bias\nRULE: END");
    CHECK(bad.status == RuleStatus::discarded);
    CHECK(bad.reason == "unparseable");
}

TEST_CASE("label consistency") {
    const auto schema = fine_grained_schema();
    CHECK(verify_label_consistency("Category: Bias", "Bias", schema).consistent);
    const auto wrong = verify_label_consistency("Category: Harmless", "Bias", schema, "x");
    CHECK_FALSE(wrong.consistent);
    CHECK(wrong.extracted_category == "Harmless");
    CHECK(wrong.instance_id == "x");
    const auto none = verify_label_consistency("nothing to see", "Bias", schema);
    CHECK_FALSE(none.consistent);
    CHECK_FALSE(none.extracted_category);
    CHECK_FALSE(verify_label_consistency(std::string("\0\xff\n:", 4), "Bias", schema).consistent);
}

TEST_CASE("manual review sampling") {
    auto make = [](std::size_t n) {
        std::vector<ModerationRule> rules(n);
        for (std::size_t i = 0; i < n; ++i) {
            rules[i].rule_id = "rule:" + std::to_string(i);
            rules[i].status = RuleStatus::accepted;
        }
        return rules;
    };
    auto count_pending = [](const std::vector<ModerationRule>& rules) {
        std::size_t n = 0;
        for (const auto& r : rules) n += r.status == RuleStatus::pending_review;
        return n;
    };

    auto rules = make(100);
    const auto sample = sample_for_manual_review(rules, 0.1, 5);
    CHECK(sample.size() == 10);
    CHECK(count_pending(rules) == 10);

    auto again = make(100);
    const auto sample2 = sample_for_manual_review(again, 0.1, 5);
    for (std::size_t i = 0; i < sample.size(); ++i) CHECK(sample[i].rule_id == sample2[i].rule_id);

    auto all = make(7);
    CHECK(sample_for_manual_review(all, 1.0, 0).size() == 7);
    CHECK(count_pending(all) == 7);

    auto odd = make(15);
    CHECK(sample_for_manual_review(odd, 0.1, 0).size() == 2);  // ceil(1.5)

    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto r = make(20);
        for (const auto& s : sample_for_manual_review(r, 0.05, seed)) seen.insert(s.rule_id);
    }
    CHECK(seen.size() > 10);
}

TEST_CASE("consistency gate over fifty instances") {
    PipelineFixture f(50);
    for (std::size_t n : {2, 9, 17, 33, 48}) f.wrong_rule_category(n, f.other_label(n));
    f.wire();
    const auto out = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, {});
    CHECK(out.rules.size() == 50);
    CHECK(out.skipped.size() == 0);
    CHECK(out.count(RuleStatus::accepted) == 45);
    CHECK(out.count(RuleStatus::discarded) == 5);
    for (const auto& r : out.rules) {
        if (r.status != RuleStatus::discarded) continue;
        CHECK(r.reason.find("inconsistent category: ") == 0);
        CHECK(r.reason.find(" vs gold ") != std::string::npos);
    }
    CHECK(out.manifest["accepted"] == 45);
    CHECK(out.manifest["discarded"] == 5);
    CHECK(out.analogies.at(f.corpus[0].id).size() == 4);
}

TEST_CASE("skipped instances and review sampling inside the stage") {
    PipelineFixture f(24);
    MockRule prose;
    prose.pattern = "Task: virtual analogies[\\s\\S]*Content: #5 ";
    prose.response = "Nothing comes to mind.";
    f.suite.coa.rules.insert(f.suite.coa.rules.begin(), prose);
    f.wire();

    Stage2Config cfg;
    cfg.review_fraction = 0.25;
    cfg.review_seed = 3;
    const auto out = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, cfg);
    CHECK(out.rules.size() == 23);
    REQUIRE(out.skipped.size() == 1);
    CHECK(out.skipped.entries[0].reason == "no analogies parsed");
    CHECK(out.review_sample.size() == 6);  // ceil(0.25 * 23)
    CHECK(out.count(RuleStatus::pending_review) == 6);
    CHECK(out.count(RuleStatus::accepted) == 17);

    const auto exported = review_export_jsonl(out.review_sample, f.corpus, out.analogies);
    CHECK(testing_support::count_occurrences(exported, "\n") == 6);
    const auto first = nlohmann::json::parse(exported.substr(0, exported.find('\n')));
    CHECK(first.contains("rule"));
    CHECK(first.contains("context"));
    CHECK(first["analogies"].size() == 4);

    auto rules = out.rules;
    std::map<std::string, bool> approvals{{out.review_sample[0].rule_id, true}, {out.review_sample[1].rule_id, false}};
    CHECK(apply_rule_reviews(rules, approvals) == 2);
    std::size_t rejected = 0;
    for (const auto& r : rules) rejected += r.reason == "rejected in manual review";
    CHECK(rejected == 1);

    const auto repeat = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, cfg);
    for (std::size_t i = 0; i < repeat.review_sample.size(); ++i)
        CHECK(repeat.review_sample[i].rule_id == out.review_sample[i].rule_id);
}

TEST_CASE("ledger files round trip") {
    PipelineFixture f(12);
    const auto out = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, {});
    testing_support::TempDir dir;
    write_rules(out.rules, dir / "rules.jsonl");
    write_analogies(out.analogies, dir / "analogies.jsonl");
    const auto rules = read_rules(dir / "rules.jsonl");
    REQUIRE(rules.size() == out.rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        CHECK(rules[i].rule_id == out.rules[i].rule_id);
        CHECK(rules[i].text == out.rules[i].text);
        CHECK(rules[i].status == out.rules[i].status);
        CHECK(rules[i].analogy_ids == out.rules[i].analogy_ids);
    }
    CHECK(read_analogies(dir / "analogies.jsonl") == out.analogies);
    CHECK(parse_rule_status("pending_review") == RuleStatus::pending_review);
    CHECK_THROWS(parse_rule_status("maybe"));
}
