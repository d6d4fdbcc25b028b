#include "amod/error.hpp"
#include "amod/eval.hpp"
#include "amod/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

using namespace amod;

namespace {

LabelSchema ab_schema() { return LabelSchema("ab", {"A", "B"}); }

std::vector<PredictionRecord> records(const std::vector<std::string>& gold,
                                      const std::vector<std::optional<std::string>>& pred) {
    std::vector<PredictionRecord> out;
    for (std::size_t i = 0; i < gold.size(); ++i)
        out.push_back({"r" + std::to_string(i), gold[i], "", pred[i]});
    return out;
}

TemplateSet bundled_templates() { return TemplateSet::load(AMOD_TEMPLATE_DIR); }

}  // namespace

TEST_CASE("extract_label") {
    const auto s = fine_grained_schema();
    CHECK(extract_label("reasoning...\nDecision: Violence", s) == "Violence");
    CHECK(extract_label("Decision: Bias\nmore\nDecision: Harmless", s) == "Harmless");
    CHECK_FALSE(extract_label("I think it's fine", s));
    CHECK(extract_label("Category: politics", s) == "Politics");
    CHECK(extract_label("**Decision:** Gambling.", s) == "Gambling");
    CHECK_FALSE(extract_label("Decision: Cats", s));
    CHECK_FALSE(extract_label("", s));
    CHECK(last_decision_line("a\nDecision: Bias\n") == std::size_t{2});
    CHECK_FALSE(last_decision_line("nothing"));
}

TEST_CASE("two-category worked example") {
    const auto r = score_predictions(records({"A", "A", "B"}, {"A", "B", "B"}), ab_schema());
    CHECK(std::abs(r.score("A").f1 - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(r.score("B").f1 - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(r.macro_f1 - 0.667) < 1e-3);
    CHECK(r.score("A").support == 2);
}

TEST_CASE("perfect and empty") {
    const auto r = score_predictions(records({"A", "B"}, {"A", "B"}), ab_schema());
    CHECK(r.macro_f1 == 1.0);
    CHECK_THROWS(score_predictions({}, ab_schema()));
    CHECK_THROWS(score_predictions(records({"Z"}, {"A"}), ab_schema()));
}

TEST_CASE("unparsed outputs count against recall") {
    const auto r = score_predictions(records({"A", "A"}, {"A", std::nullopt}), ab_schema());
    CHECK(r.unparsed == 1);
    CHECK(r.score("A").recall == 0.5);
    CHECK(r.score("A").precision == 1.0);
    CHECK(r.score("B").f1 == 0.0);
}

TEST_CASE("confusion-matrix oracle on random sets") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng() % 7;
        const std::size_t n = 1 + rng() % 200;
        std::vector<std::string> cats;
        for (std::size_t c = 0; c < k; ++c) cats.push_back("C" + std::to_string(c));
        const LabelSchema schema("rand", cats);
        std::vector<std::size_t> gold(n);
        std::vector<std::optional<std::size_t>> pred(n);
        std::vector<PredictionRecord> recs;
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = rng() % k;
            if (rng() % 10 != 0) pred[i] = rng() % k;
            recs.push_back({"x" + std::to_string(i), cats[gold[i]], "",
                            pred[i] ? std::optional<std::string>(cats[*pred[i]]) : std::nullopt});
        }
        const auto expect = oracles::f1_by_confusion_matrix(gold, pred, k);
        const auto got = score_predictions(recs, schema);
        REQUIRE(std::abs(got.macro_f1 - expect.macro) <= 1e-12);
        for (std::size_t c = 0; c < k; ++c) REQUIRE(std::abs(got.per_category[c].f1 - expect.f1[c]) <= 1e-12);

        std::shuffle(recs.begin(), recs.end(), rng);
        const auto shuffled = score_predictions(recs, schema);
        REQUIRE(shuffled.macro_f1 == got.macro_f1);
    }
}

TEST_CASE("published method rows aggregate to their averages") {
    for (const auto& row : oracles::fine_grained_method_rows()) {
        const auto r = assemble_report(fine_grained_schema(), oracles::as_fractions(row.per_category));
        CHECK_MESSAGE(std::abs(r.macro_f1 * 100 - row.average) <= 0.05, row.name);
    }
    for (const auto& row : oracles::aegis_rows()) {
        const auto r = assemble_report(aegis_schema(), oracles::as_fractions(row.per_category));
        CHECK_MESSAGE(std::abs(r.macro_f1 * 100 - row.average) <= 0.05, row.name);
    }
    for (const auto& a : oracles::ablation_rows()) {
        const auto r = assemble_report(fine_grained_schema(), oracles::as_fractions(a.row.per_category));
        CHECK_MESSAGE(std::abs(r.macro_f1 * 100 - a.row.average) <= 0.05, a.row.name);
    }
}

TEST_CASE("published baseline rows are not macro means") {
    const auto& gpt4 = oracles::fine_grained_baseline_rows().front();
    const auto r = assemble_report(fine_grained_schema(), oracles::as_fractions(gpt4.per_category));
    CHECK(std::abs(r.macro_f1 * 100 - 73.5) < 0.05);
    CHECK(std::abs(r.macro_f1 * 100 - gpt4.average) > 1.0);
}

TEST_CASE("ablation deltas") {
    const auto schema = fine_grained_schema();
    const auto& full = oracles::fine_grained_method_rows().back();
    std::vector<NamedReport> reports;
    for (const auto& a : oracles::ablation_rows())
        reports.push_back({a.row.name, assemble_report(schema, oracles::as_fractions(a.row.per_category))});
    reports.push_back({"Full", assemble_report(schema, oracles::as_fractions(full.per_category))});

    const auto table = compare_runs(reports, "Full");
    REQUIRE(table.columns.size() == 7);
    CHECK(table.columns.front() == "Overall F1");
    for (std::size_t i = 0; i < oracles::ablation_rows().size(); ++i)
        for (std::size_t c = 0; c < 7; ++c)
            CHECK(format_delta(*table.rows[i].deltas[c]) == oracles::ablation_rows()[i].deltas[c]);
    CHECK(table.cell(0, 0) == "86.9 (-2.3)");
    CHECK(table.cell(0, 1) == "85.4 (-3.9)");
    CHECK(table.cell(2, 0) == "89.2");
    CHECK(table.render().find("w/o Second-stage SFT") != std::string::npos);

    const auto same = compare_runs({reports.back(), {"copy", reports.back().report}}, "Full");
    for (const auto& d : same.rows[1].deltas) CHECK(format_delta(*d) == "0.0");

    CHECK_THROWS(compare_runs({reports.back()}, "Full"));
    CHECK_THROWS(compare_runs(reports, "missing"));
    const auto other = assemble_report(aegis_schema(), std::vector<double>(5, 0.5));
    CHECK_THROWS(compare_runs({reports.back(), {"aegis", other}}, "Full"));
}

TEST_CASE("format_delta") {
    CHECK(format_delta(-2.3000000001) == "-2.3");
    CHECK(format_delta(0.4) == "+0.4");
    CHECK(format_delta(-0.01) == "0.0");
}

TEST_CASE("f1 table rendering") {
    const auto r = assemble_report(aegis_schema(), oracles::as_fractions(oracles::aegis_rows().back().per_category));
    const auto text = render_f1_table({{"Full", r}});
    CHECK(text.find("Average") != std::string::npos);
    CHECK(text.find("68.0") != std::string::npos);
    CHECK(to_json(NamedReport{"Full", r})["name"] == "Full");
}

TEST_CASE("load_predictions") {
    testing_support::TempDir dir;
    const std::vector<ModerationInstance> gold{{"a", "t", "A", {}}, {"b", "t", "B", {}}, {"c", "t", "A", {}}};
    std::ofstream(dir / "p.jsonl") << R"({"instance_id":"a","raw_output":"x\nDecision: a"})" "\n"
                                   << R"({"instance_id":"b","predicted":"B"})" "\n";
    const auto preds = load_predictions(dir / "p.jsonl", gold, ab_schema());
    REQUIRE(preds.size() == 3);
    CHECK(preds[0].predicted == "A");
    CHECK(preds[1].predicted == "B");
    CHECK_FALSE(preds[2].predicted);
    CHECK(score_predictions(preds, ab_schema()).unparsed == 1);

    std::ofstream(dir / "bad.jsonl") << R"({"instance_id":"zzz","predicted":"B"})" "\n";
    CHECK_THROWS_AS(load_predictions(dir / "bad.jsonl", gold, ab_schema()), DatasetError);
    std::ofstream(dir / "dup.jsonl") << R"({"instance_id":"a"})" "\n" << R"({"instance_id":"a"})" "\n";
    CHECK_THROWS_AS(load_predictions(dir / "dup.jsonl", gold, ab_schema()), DatasetError);
}

TEST_CASE("rule generalization against a scripted external model") {
    const auto schema = fine_grained_schema();
    const auto templates = bundled_templates();
    const auto test = synth_corpus(30, schema, 5);
    auto suite = default_mock_suite(schema);
    Gateway gw(RetryPolicy{0, std::chrono::milliseconds(0)});
    const auto ext = gw.register_mock(suite.external, ModelKind::external);

    std::map<std::string, std::string> rules, simple;
    for (const auto& inst : test) {
        rules[inst.id] = "Content discussing " + topic_keyword(schema, inst.label) + " falls under " + inst.label + ".";
        simple[inst.id] = "Judge the content carefully.";
    }
    const auto with = rule_generalization_eval(gw, ext, rules, test, templates, schema, RuleCondition::with_rules);
    CHECK(with.macro_f1 == 1.0);
    CHECK(with.condition == "with_rules");

    const auto none = rule_generalization_eval(gw, ext, {}, test, templates, schema, RuleCondition::no_rules);
    // Every answer is Harmless: precision 1/6 and recall 1 for Harmless only.
    CHECK(std::abs(none.macro_f1 - (2.0 / 7.0) / 6.0) < 1e-12);
    CHECK(none.condition == "no_rules");

    const auto weak = rule_generalization_eval(gw, ext, simple, test, templates, schema, RuleCondition::simple_rules);
    CHECK(weak.macro_f1 == none.macro_f1);

    auto missing = rules;
    missing[test[3].id] = "";
    CHECK_THROWS_WITH_AS(rule_generalization_eval(gw, ext, missing, test, templates, schema, RuleCondition::with_rules),
                         doctest::Contains("missing rule"), ConfigError);
}

TEST_CASE("rule quality table") {
    const auto text = render_rule_quality_table({{"Qwen2.5-32B-Instruct", 74.3, std::nullopt},
                                                 {"Simple Rule", 75.1, 15.0},
                                                 {"Analogical rules", 88.7, 85.0}});
    CHECK(text.find("Model") == 0);
    CHECK(text.find("Human (%)") != std::string::npos);
    CHECK(testing_support::count_occurrences(text, "\n") == 4);
    CHECK(text.find("88.7") != std::string::npos);
    CHECK(text.find(" -") != std::string::npos);
}
