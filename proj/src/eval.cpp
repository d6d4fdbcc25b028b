#include "amod/eval.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace amod {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view strip(std::string_view s, std::string_view chars) {
    const auto b = s.find_first_not_of(chars);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(chars);
    return s.substr(b, e - b + 1);
}

// Value of a "Decision: X" / "Category: X" line, tolerant of markdown emphasis.
std::optional<std::string_view> decision_value(std::string_view line) {
    line = strip(line, " \t\r*#->`");
    for (std::string_view key : {"decision", "category"}) {
        if (line.size() < key.size() || lower(line.substr(0, key.size())) != key) continue;
        auto rest = strip(line.substr(key.size()), " \t*");
        if (rest.empty() || rest.front() != ':') continue;
        return strip(rest.substr(1), " \t*\"'`.[]");
    }
    return std::nullopt;
}

double pct(double x) { return x * 100.0; }

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace

std::optional<std::string> extract_label(const std::string& raw_output, const LabelSchema& schema) {
    std::optional<std::string_view> last;
    std::size_t start = 0;
    while (start <= raw_output.size()) {
        auto end = raw_output.find('\n', start);
        if (end == std::string::npos) end = raw_output.size();
        if (auto v = decision_value(std::string_view(raw_output).substr(start, end - start))) last = v;
        start = end + 1;
    }
    if (!last) return std::nullopt;
    return schema.canonical(*last);
}

std::optional<std::size_t> last_decision_line(const std::string& raw_output) {
    std::optional<std::size_t> last;
    std::size_t start = 0;
    while (start <= raw_output.size()) {
        auto end = raw_output.find('\n', start);
        if (end == std::string::npos) end = raw_output.size();
        if (decision_value(std::string_view(raw_output).substr(start, end - start))) last = start;
        start = end + 1;
    }
    return last;
}

const CategoryScore& F1Report::score(const std::string& category) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (categories[i] == category) return per_category[i];
    throw Error("category " + category + " not in report");
}

F1Report score_predictions(const std::vector<PredictionRecord>& preds, const LabelSchema& schema) {
    if (preds.empty()) throw Error("score_predictions: no predictions");
    const auto& cats = schema.categories();
    std::vector<std::size_t> tp(cats.size()), fp(cats.size()), fn(cats.size()), support(cats.size());

    F1Report r;
    r.schema_name = schema.name();
    r.categories = cats;
    r.total = preds.size();
    for (const auto& p : preds) {
        const auto g = schema.index_of(p.gold);
        if (!g) throw Error("gold label " + p.gold + " not in schema " + schema.name());
        ++support[*g];
        std::optional<std::size_t> pr;
        if (p.predicted) pr = schema.index_of(*p.predicted);
        if (!pr) ++r.unparsed;
        if (pr && *pr == *g) {
            ++tp[*g];
        } else {
            ++fn[*g];
            if (pr) ++fp[*pr];
        }
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < cats.size(); ++c) {
        CategoryScore s;
        s.support = support[c];
        s.precision = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
        s.recall = tp[c] + fn[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
        s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        sum += s.f1;
        r.per_category.push_back(s);
    }
    r.macro_f1 = sum / static_cast<double>(cats.size());
    return r;
}

F1Report assemble_report(const LabelSchema& schema, const std::vector<double>& per_category_f1) {
    if (per_category_f1.size() != schema.categories().size())
        throw Error("expected " + std::to_string(schema.categories().size()) + " category values, got " +
                    std::to_string(per_category_f1.size()));
    F1Report r;
    r.schema_name = schema.name();
    r.categories = schema.categories();
    for (double f : per_category_f1) {
        if (!(f >= 0.0 && f <= 1.0)) throw Error("F1 values must lie in [0, 1]");
        CategoryScore s;
        s.f1 = f;
        r.per_category.push_back(s);
    }
    r.macro_f1 = std::accumulate(per_category_f1.begin(), per_category_f1.end(), 0.0) /
                 static_cast<double>(per_category_f1.size());
    return r;
}

std::string format_delta(double delta) {
    const double rounded = std::round(delta * 10.0) / 10.0;
    if (rounded == 0.0) return "0.0";
    return (rounded > 0 ? "+" : "") + fmt1(rounded);
}

std::string DeltaTable::cell(std::size_t row, std::size_t column) const {
    const auto& r = rows.at(row);
    std::string out = fmt1(r.values.at(column));
    if (r.deltas.at(column)) out += " (" + format_delta(*r.deltas[column]) + ")";
    return out;
}

std::string DeltaTable::render() const {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"Setting"};
    header.insert(header.end(), columns.begin(), columns.end());
    grid.push_back(header);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> line{rows[i].name};
        for (std::size_t c = 0; c < columns.size(); ++c) line.push_back(cell(i, c));
        grid.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    std::ostringstream out;
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            out << std::left << std::setw(static_cast<int>(width[c])) << line[c];
            out << (c + 1 < line.size() ? "  " : "\n");
        }
    }
    return out.str();
}

DeltaTable compare_runs(const std::vector<NamedReport>& reports, const std::string& baseline) {
    if (reports.size() < 2) throw Error("compare_runs needs at least two reports");
    const auto base_it = std::find_if(reports.begin(), reports.end(),
                                      [&](const NamedReport& r) { return r.name == baseline; });
    if (base_it == reports.end()) throw Error("baseline " + baseline + " not among reports");
    for (const auto& r : reports)
        if (r.report.categories != base_it->report.categories)
            throw Error("schema mismatch between " + r.name + " and " + baseline);

    DeltaTable t;
    t.columns.push_back("Overall F1");
    t.columns.insert(t.columns.end(), base_it->report.categories.begin(), base_it->report.categories.end());

    auto values_of = [](const F1Report& rep) {
        std::vector<double> v{pct(rep.macro_f1)};
        for (const auto& s : rep.per_category) v.push_back(pct(s.f1));
        return v;
    };
    const auto base_values = values_of(base_it->report);
    for (const auto& r : reports) {
        DeltaTable::Row row;
        row.name = r.name;
        row.values = values_of(r.report);
        for (std::size_t c = 0; c < row.values.size(); ++c) {
            if (&r == &*base_it)
                row.deltas.emplace_back();
            else
                row.deltas.emplace_back(row.values[c] - base_values[c]);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string render_f1_table(const std::vector<NamedReport>& reports) {
    if (reports.empty()) return {};
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"Model/Method", "Average"};
    header.insert(header.end(), reports.front().report.categories.begin(), reports.front().report.categories.end());
    grid.push_back(header);
    for (const auto& r : reports) {
        std::vector<std::string> line{r.name, fmt1(pct(r.report.macro_f1))};
        for (const auto& s : r.report.per_category) line.push_back(fmt1(pct(s.f1)));
        grid.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size() && c < width.size(); ++c) width[c] = std::max(width[c], line[c].size());
    std::ostringstream out;
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            out << std::left << std::setw(static_cast<int>(width[c])) << line[c];
            out << (c + 1 < line.size() ? "  " : "\n");
        }
    }
    return out.str();
}

nlohmann::ordered_json to_json(const NamedReport& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["schema"] = r.report.schema_name;
    if (!r.report.condition.empty()) j["condition"] = r.report.condition;
    j["macro_f1"] = r.report.macro_f1;
    j["total"] = r.report.total;
    j["unparsed"] = r.report.unparsed;
    auto& per = j["per_category"];
    per = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < r.report.categories.size(); ++i) {
        const auto& s = r.report.per_category[i];
        per[r.report.categories[i]] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    }
    return j;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                               const std::vector<ModerationInstance>& gold,
                                               const LabelSchema& schema) {
    std::unordered_map<std::string, PredictionRecord> by_id;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        PredictionRecord p;
        try {
            const auto j = nlohmann::json::parse(line);
            p.instance_id = j.at("instance_id").get<std::string>();
            p.raw_output = j.value("raw_output", std::string());
            if (j.contains("predicted") && !j["predicted"].is_null())
                p.predicted = schema.canonical(j["predicted"].get<std::string>());
            else
                p.predicted = extract_label(p.raw_output, schema);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
        }
        if (!by_id.emplace(p.instance_id, p).second)
            throw DatasetError(path.string() + ": duplicate prediction for " + p.instance_id);
    }

    std::vector<PredictionRecord> out;
    out.reserve(gold.size());
    for (const auto& g : gold) {
        PredictionRecord p;
        if (auto it = by_id.find(g.id); it != by_id.end()) {
            p = std::move(it->second);
            by_id.erase(it);
        } else {
            p.instance_id = g.id;
        }
        p.gold = g.label;
        out.push_back(std::move(p));
    }
    if (!by_id.empty())
        throw DatasetError(path.string() + ": prediction for unknown instance " + by_id.begin()->first);
    return out;
}

std::string_view to_string(RuleCondition c) {
    switch (c) {
        case RuleCondition::with_rules: return "with_rules";
        case RuleCondition::simple_rules: return "simple_rules";
        case RuleCondition::no_rules: return "no_rules";
    }
    return "no_rules";
}

F1Report rule_generalization_eval(const Gateway& gateway, const ModelHandle& external,
                                  const std::map<std::string, std::string>& rules_by_instance,
                                  const std::vector<ModerationInstance>& testset, const TemplateSet& templates,
                                  const LabelSchema& schema, RuleCondition condition,
                                  const RuleEvalOptions& opts) {
    if (testset.empty()) throw Error("rule_generalization_eval: empty test set");
    const bool inject = condition != RuleCondition::no_rules;
    const auto& tmpl = templates.get(inject ? template_names::rule_application : template_names::cot);

    std::vector<std::vector<ChatMessage>> batch;
    batch.reserve(testset.size());
    for (const auto& inst : testset) {
        RenderContext ctx{{"text", inst.text}, {"categories", schema.joined()}};
        if (inject) {
            auto it = rules_by_instance.find(inst.id);
            if (it == rules_by_instance.end() || it->second.empty())
                throw ConfigError("missing rule for instance " + inst.id);
            ctx["rule"] = it->second;
        }
        batch.push_back({{"user", render(tmpl, ctx)}});
    }

    const auto results = gateway.complete_batch(external, batch, opts.sampling, opts.max_in_flight);
    std::vector<PredictionRecord> preds;
    preds.reserve(testset.size());
    for (std::size_t i = 0; i < testset.size(); ++i) {
        PredictionRecord p;
        p.instance_id = testset[i].id;
        p.gold = testset[i].label;
        if (results[i].ok()) {
            p.raw_output = results[i].exchange->response;
            p.predicted = extract_label(p.raw_output, schema);
        }
        preds.push_back(std::move(p));
    }
    auto report = score_predictions(preds, schema);
    report.condition = std::string(to_string(condition));
    return report;
}

std::string render_rule_quality_table(const std::vector<RuleQualityRow>& rows) {
    std::vector<std::vector<std::string>> grid{{"Model", "F1", "Human (%)"}};
    for (const auto& r : rows)
        grid.push_back({r.name, r.f1 ? fmt1(*r.f1) : "-", r.human ? fmt1(*r.human) : "-"});
    std::size_t w0 = 0, w1 = 0;
    for (const auto& g : grid) {
        w0 = std::max(w0, g[0].size());
        w1 = std::max(w1, g[1].size());
    }
    std::ostringstream out;
    for (const auto& g : grid)
        out << std::left << std::setw(static_cast<int>(w0)) << g[0] << "  " << std::setw(static_cast<int>(w1))
            << g[1] << "  " << g[2] << "\n";
    return out.str();
}

}  // namespace amod
