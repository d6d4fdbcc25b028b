#pragma once

#include "amod/gateway.hpp"
#include "amod/schema.hpp"
#include "amod/templates.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace amod {

/// Category asserted by the last "Decision: X" or "Category: X" line, matched
/// case-insensitively against the schema. Absent or unknown yields nullopt.
std::optional<std::string> extract_label(const std::string& raw_output, const LabelSchema& schema);

/// Byte offset of the start of the last decision/category line, if any.
std::optional<std::size_t> last_decision_line(const std::string& raw_output);

struct PredictionRecord {
    std::string instance_id;
    std::string gold;
    std::string raw_output;
    std::optional<std::string> predicted;
};

struct CategoryScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct F1Report {
    std::string schema_name;
    std::vector<std::string> categories;      // schema order
    std::vector<CategoryScore> per_category;  // parallel to categories
    double macro_f1 = 0.0;
    std::size_t total = 0;
    std::size_t unparsed = 0;
    std::string condition;  // optional tag, e.g. with_rules

    const CategoryScore& score(const std::string& category) const;
};

/// One-vs-rest precision/recall/F1 per schema category and their unweighted mean.
/// Records without a prediction count against recall of their gold category.
F1Report score_predictions(const std::vector<PredictionRecord>& preds, const LabelSchema& schema);

/// Report from already-computed per-category F1 values (fractions, schema order),
/// used to aggregate published per-category tables.
F1Report assemble_report(const LabelSchema& schema, const std::vector<double>& per_category_f1);

struct NamedReport {
    std::string name;
    F1Report report;
};

/// Rows of value/delta pairs against a baseline row. Values are percentages.
struct DeltaTable {
    std::vector<std::string> columns;  // "Overall F1" then categories
    struct Row {
        std::string name;
        std::vector<double> values;
        std::vector<std::optional<double>> deltas;  // empty optionals on the baseline row
    };
    std::vector<Row> rows;

    /// "86.9 (-2.3)" cells, baseline cells plain.
    std::string cell(std::size_t row, std::size_t column) const;
    std::string render() const;
};

DeltaTable compare_runs(const std::vector<NamedReport>& reports, const std::string& baseline);

/// Rounds to one decimal and prints with an explicit sign ("-2.3", "+0.4", "0.0").
std::string format_delta(double delta);

/// Aligned text table: name, average, then per-category F1 in percent.
std::string render_f1_table(const std::vector<NamedReport>& reports);
nlohmann::ordered_json to_json(const NamedReport& r);

/// Joins predictions (instance_id + raw_output or predicted) with a gold corpus.
/// Gold instances without a prediction are scored as unparsed.
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                               const std::vector<ModerationInstance>& gold,
                                               const LabelSchema& schema);

enum class RuleCondition { with_rules, simple_rules, no_rules };
std::string_view to_string(RuleCondition c);

struct RuleEvalOptions {
    SamplingConfig sampling;
    std::size_t max_in_flight = 8;
};

/// Prompts an external model with each test instance, plus the injected rule text
/// unless condition is no_rules, and scores the extracted labels.
F1Report rule_generalization_eval(const Gateway& gateway, const ModelHandle& external,
                                  const std::map<std::string, std::string>& rules_by_instance,
                                  const std::vector<ModerationInstance>& testset, const TemplateSet& templates,
                                  const LabelSchema& schema, RuleCondition condition,
                                  const RuleEvalOptions& opts = {});

struct RuleQualityRow {
    std::string name;
    std::optional<double> f1;     // percent
    std::optional<double> human;  // percent
};

/// Three-column "Model | F1 | Human (%)" table; missing cells print "-".
std::string render_rule_quality_table(const std::vector<RuleQualityRow>& rows);

}  // namespace amod
