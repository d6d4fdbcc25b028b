#include "amod/chain.hpp"
#include "amod/error.hpp"
#include "amod/stage2.hpp"
#include "amod/stage3.hpp"
#include "pipeline_fixture.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace amod;
using testing_support::PipelineFixture;

namespace {

ModerationRule accepted_rule(const std::string& instance_id, const std::string& text) {
    ModerationRule r;
    r.rule_id = "rule:" + instance_id;
    r.instance_id = instance_id;
    r.text = text;
    r.status = RuleStatus::accepted;
    return r;
}

}  // namespace

TEST_CASE("reasoning interpretation") {
    const auto schema = fine_grained_schema();
    const ModerationInstance inst{"x", "text", "Bias", {}};
    const auto ok = interpret_reasoning(inst, "Applying the rule.\nDecision: Bias", schema);
    CHECK_FALSE(ok.quarantine_reason);
    CHECK(ok.verdict.consistent);

    const auto wrong = interpret_reasoning(inst, "Applying the rule.\nDecision: Politics", schema);
    CHECK(wrong.quarantine_reason == "inconsistent reasoning: got Politics, expected Bias");
    CHECK_FALSE(wrong.verdict.consistent);

    CHECK(interpret_reasoning(inst, "no conclusion", schema).quarantine_reason == "inconsistent reasoning: no decision");
    CHECK(interpret_reasoning(inst, "Decision: Bias", schema).quarantine_reason == "empty reasoning");
    CHECK(strip_decision("body text\nDecision: Bias\n") == "body text");
}

TEST_CASE("prompt carries the rule exactly once") {
    PipelineFixture f(12);
    const auto& inst = f.corpus[0];
    const std::string rule_text = "Content urging violence against named people falls under Violence.";
    const std::vector<AnalogyExample> analogies{{"virt:a:1", "a case", "Violence", AnalogyOrigin::generated, {}}};
    const auto prompt = reasoning_prompt(inst, analogies, accepted_rule(inst.id, rule_text), f.templates, f.schema);
    CHECK(testing_support::count_occurrences(prompt, rule_text) == 1);
    CHECK(prompt.find(inst.text) != std::string::npos);
    CHECK(prompt.find("Gold label: " + inst.label) != std::string::npos);
    CHECK(prompt.find("Example 1: a case") != std::string::npos);
}

TEST_CASE("synthesis requires an accepted rule") {
    PipelineFixture f(12);
    auto rule = accepted_rule(f.corpus[0].id, "r");
    rule.status = RuleStatus::discarded;
    CHECK_THROWS(synthesize_reasoning(*f.gateway, f.aux, f.corpus[0], {}, rule, f.templates, f.schema));
    rule.status = RuleStatus::accepted;
    const std::vector<AnalogyExample> analogies{{"virt:a:1", "a case", f.corpus[0].label, AnalogyOrigin::generated, {}}};
    const auto out = synthesize_reasoning(*f.gateway, f.aux, f.corpus[0], analogies, rule, f.templates, f.schema);
    CHECK_FALSE(out.quarantine_reason);
}

TEST_CASE("forty accepted rules give forty parseable records") {
    PipelineFixture f(50);
    for (std::size_t n : {1, 5, 8, 13, 21, 22, 30, 34, 41, 50}) f.wrong_rule_category(n, f.other_label(n));
    f.wire();
    const auto s2 = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, {});
    REQUIRE(s2.count(RuleStatus::accepted) == 40);

    const auto out = emit_refined_dataset(f.corpus, s2.rules, s2.analogies, *f.gateway, f.aux, f.templates, f.schema, {});
    CHECK(out.records.size() == 40);
    CHECK(out.quarantine.size() == 10);
    CHECK(out.provenance.size() == 40);
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const auto& rec = out.records[i];
        const auto chain = parse_hierarchical_chain(rec.completion);
        CHECK(chain.decision == rec.label);
        CHECK(rec.stage == Stage::stage3);
        CHECK(out.provenance[i].instance_id == rec.instance_id);
        CHECK(out.provenance[i].rule_id == "rule:" + rec.instance_id);
        CHECK(out.provenance[i].analogy_ids.size() == 4);
        CHECK(chain.rule.find("falls under " + rec.label) != std::string::npos);
        CHECK(rec.prompt.find("Gold label") == std::string::npos);
    }
    for (const auto& e : out.quarantine.entries) CHECK(e.reason.find("rule discarded: inconsistent category") == 0);
    CHECK(out.manifest["provenance"].size() == 40);

    const auto again = emit_refined_dataset(f.corpus, s2.rules, s2.analogies, *f.gateway, f.aux, f.templates, f.schema, {});
    CHECK(again.records == out.records);
}

TEST_CASE("quarantine reasons") {
    PipelineFixture f(12);
    MockRule wrong;
    wrong.pattern = "Task: reasoning synthesis[\\s\\S]*Content: #3 ";
    wrong.response = "Looks different.\nDecision: " + f.other_label(3);
    f.suite.aux.rules.insert(f.suite.aux.rules.begin(), wrong);
    f.wire();
    auto s2 = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, {});

    // Instance #4 loses its rule, #5 its analogies.
    s2.rules.erase(std::remove_if(s2.rules.begin(), s2.rules.end(),
                                  [&](const ModerationRule& r) { return r.instance_id == f.corpus[3].id; }),
                   s2.rules.end());
    s2.analogies.erase(f.corpus[4].id);

    const auto out = emit_refined_dataset(f.corpus, s2.rules, s2.analogies, *f.gateway, f.aux, f.templates, f.schema, {});
    CHECK(out.records.size() == 9);
    REQUIRE(out.quarantine.size() == 3);
    std::map<std::string, std::string> reasons;
    for (const auto& e : out.quarantine.entries) reasons[e.instance_id] = e.reason;
    CHECK(reasons[f.corpus[2].id].find("inconsistent reasoning: got ") == 0);
    CHECK(reasons[f.corpus[3].id] == "no rule");
    CHECK(reasons[f.corpus[4].id] == "no analogies");

    auto dup = s2.rules;
    dup.push_back(dup.front());
    CHECK_THROWS(emit_refined_dataset(f.corpus, dup, s2.analogies, *f.gateway, f.aux, f.templates, f.schema, {}));
}

TEST_CASE("pending rules wait for review") {
    PipelineFixture f(12);
    Stage2Config cfg;
    cfg.review_fraction = 0.5;
    auto s2 = induce_rules(f.corpus, *f.gateway, f.coa, f.aux, f.templates, f.schema, cfg);
    const auto before = emit_refined_dataset(f.corpus, s2.rules, s2.analogies, *f.gateway, f.aux, f.templates, f.schema, {});
    CHECK(before.records.size() == 6);
    for (const auto& e : before.quarantine.entries) CHECK(e.reason.find("rule pending_review") == 0);

    std::map<std::string, bool> approvals;
    for (const auto& r : s2.review_sample) approvals[r.rule_id] = true;
    apply_rule_reviews(s2.rules, approvals);
    const auto after = emit_refined_dataset(f.corpus, s2.rules, s2.analogies, *f.gateway, f.aux, f.templates, f.schema, {});
    CHECK(after.records.size() == 12);
}
