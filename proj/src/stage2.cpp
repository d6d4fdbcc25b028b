#include "amod/stage2.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"
#include "amod/eval.hpp"
#include "amod/stage1.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

namespace amod {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Position of a standalone "END" token at or after `from`.
std::size_t find_end_marker(const std::string& s, std::size_t from) {
    for (auto pos = s.find("END", from); pos != std::string::npos; pos = s.find("END", pos + 1)) {
        const bool left_ok = pos == 0 || !word_char(s[pos - 1]);
        const bool right_ok = pos + 3 >= s.size() || !word_char(s[pos + 3]);
        if (left_ok && right_ok) return pos;
    }
    return std::string::npos;
}

}  // namespace

std::string_view to_string(RuleStatus s) {
    switch (s) {
        case RuleStatus::unverified: return "unverified";
        case RuleStatus::accepted: return "accepted";
        case RuleStatus::discarded: return "discarded";
        case RuleStatus::pending_review: return "pending_review";
    }
    return "unverified";
}

RuleStatus parse_rule_status(std::string_view text) {
    for (auto s : {RuleStatus::unverified, RuleStatus::accepted, RuleStatus::discarded, RuleStatus::pending_review})
        if (to_string(s) == text) return s;
    throw DatasetError("unknown rule status " + std::string(text));
}

nlohmann::ordered_json to_json(const ModerationRule& rule) {
    nlohmann::ordered_json j;
    j["rule_id"] = rule.rule_id;
    j["instance_id"] = rule.instance_id;
    j["text"] = rule.text;
    j["analogy_ids"] = rule.analogy_ids;
    j["inducer_model"] = rule.inducer_model;
    j["status"] = to_string(rule.status);
    if (!rule.reason.empty()) j["reason"] = rule.reason;
    if (rule.verdict) {
        const auto& v = *rule.verdict;
        j["consistency"] = {{"extracted_category", v.extracted_category ? nlohmann::ordered_json(*v.extracted_category)
                                                                        : nlohmann::ordered_json()},
                            {"gold", v.gold},
                            {"consistent", v.consistent}};
    }
    return j;
}

ModerationRule rule_from_json(const nlohmann::json& j) {
    ModerationRule r;
    r.rule_id = j.at("rule_id").get<std::string>();
    r.instance_id = j.at("instance_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.analogy_ids = j.value("analogy_ids", std::vector<std::string>());
    r.inducer_model = j.value("inducer_model", std::string());
    r.status = parse_rule_status(j.at("status").get<std::string>());
    r.reason = j.value("reason", std::string());
    if (j.contains("consistency")) {
        const auto& c = j["consistency"];
        ConsistencyVerdict v;
        v.instance_id = r.instance_id;
        if (!c.at("extracted_category").is_null()) v.extracted_category = c["extracted_category"].get<std::string>();
        v.gold = c.at("gold").get<std::string>();
        v.consistent = c.at("consistent").get<bool>();
        r.verdict = v;
    }
    return r;
}

std::vector<AnalogyExample> parse_virtual_analogies(const std::string& output, const std::string& instance_id,
                                                    const LabelSchema& schema) {
    std::vector<AnalogyExample> out;
    for (const auto& parsed : parse_analogy_block(output)) {
        if (parsed.text.empty() || !parsed.label || parsed.label->empty()) continue;
        AnalogyExample ex;
        ex.id = "virt:" + instance_id + ":" + std::to_string(out.size() + 1);
        ex.text = parsed.text;
        ex.label = schema.canonical(*parsed.label).value_or(*parsed.label);
        ex.origin = AnalogyOrigin::generated;
        out.push_back(std::move(ex));
    }
    return out;
}

std::string virtual_analogy_prompt(const ModerationInstance& inst, std::size_t count,
                                   const TemplateSet& templates, const LabelSchema& schema) {
    return render(templates.get(template_names::virtual_analogies),
                  {{"text", inst.text}, {"count", std::to_string(count)}, {"categories", schema.joined()}});
}

std::vector<AnalogyExample> generate_virtual_analogies(const Gateway& gateway, const ModelHandle& coa,
                                                       const ModerationInstance& inst, const TemplateSet& templates,
                                                       const LabelSchema& schema, std::size_t count,
                                                       const SamplingConfig& sampling) {
    if (coa.kind != ModelKind::coa) throw ConfigError("virtual analogies need a coa model, got " + coa.id);
    const auto ex = gateway.complete(coa, {{"user", virtual_analogy_prompt(inst, count, templates, schema)}}, sampling);
    auto parsed = parse_virtual_analogies(ex.response, inst.id, schema);
    if (parsed.empty()) throw ParseError("no analogies parsed");
    return parsed;
}

std::optional<std::string> extract_rule_text(const std::string& output) {
    const auto start = output.rfind("RULE:");
    if (start == std::string::npos) return std::nullopt;
    const auto body = start + 5;
    const auto end = find_end_marker(output, body);
    if (end == std::string::npos) return std::nullopt;
    auto text = trim(std::string_view(output).substr(body, end - body));
    if (text.empty()) return std::nullopt;
    return text;
}

std::string rule_induction_prompt(const ModerationInstance& inst, const std::vector<AnalogyExample>& analogies,
                                  const TemplateSet& templates, const LabelSchema& schema) {
    if (analogies.empty()) throw Error("rule induction needs analogies for " + inst.id);
    return render(templates.get(template_names::rule_induction),
                  {{"text", inst.text},
                   {"analogies", render_analogy_block(analogies, true)},
                   {"categories", schema.joined()}});
}

ModerationRule rule_from_output(const ModerationInstance& inst, const std::vector<AnalogyExample>& analogies,
                                const std::string& inducer_model, const std::string& output) {
    ModerationRule rule;
    rule.rule_id = "rule:" + inst.id;
    rule.instance_id = inst.id;
    rule.inducer_model = inducer_model;
    for (const auto& a : analogies) rule.analogy_ids.push_back(a.id);
    if (auto text = extract_rule_text(output)) {
        rule.text = std::move(*text);
        rule.status = RuleStatus::unverified;
    } else {
        rule.status = RuleStatus::discarded;
        rule.reason = "unparseable";
    }
    return rule;
}

InducedRule induce_rule(const Gateway& gateway, const ModelHandle& aux, const ModerationInstance& inst,
                        const std::vector<AnalogyExample>& analogies, const TemplateSet& templates,
                        const LabelSchema& schema, const SamplingConfig& sampling) {
    const auto ex = gateway.complete(aux, {{"user", rule_induction_prompt(inst, analogies, templates, schema)}}, sampling);
    return {rule_from_output(inst, analogies, aux.id, ex.response), ex.response};
}

ConsistencyVerdict verify_label_consistency(const std::string& model_output, const std::string& gold,
                                            const LabelSchema& schema, const std::string& instance_id) {
    ConsistencyVerdict v;
    v.instance_id = instance_id;
    v.gold = gold;
    v.extracted_category = extract_label(model_output, schema);
    v.consistent = v.extracted_category && *v.extracted_category == gold;
    return v;
}

std::vector<ModerationRule> sample_for_manual_review(std::vector<ModerationRule>& rules, double fraction,
                                                     std::uint64_t seed) {
    if (rules.empty()) throw Error("sample_for_manual_review: no rules");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("review fraction must be in (0, 1]");
    const auto n = rules.size();
    const auto take = std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    std::vector<ModerationRule> picked;
    for (std::size_t i = 0; i < take; ++i) {
        rules[order[i]].status = RuleStatus::pending_review;
        picked.push_back(rules[order[i]]);
    }
    return picked;
}

std::size_t Stage2Output::count(RuleStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(rules.begin(), rules.end(), [&](const ModerationRule& r) { return r.status == s; }));
}

Stage2Output induce_rules(const std::vector<ModerationInstance>& corpus, const Gateway& gateway,
                          const ModelHandle& coa, const ModelHandle& aux, const TemplateSet& templates,
                          const LabelSchema& schema, const Stage2Config& config) {
    if (coa.kind != ModelKind::coa) throw ConfigError("stage 2 needs a coa model, got " + coa.id);
    if (config.virtual_analogies == 0) throw ConfigError("virtual analogy count must be positive");
    templates.require({template_names::virtual_analogies, template_names::rule_induction});

    Stage2Output out;
    std::vector<std::vector<ChatMessage>> coa_batch;
    for (const auto& inst : corpus)
        coa_batch.push_back({{"user", virtual_analogy_prompt(inst, config.virtual_analogies, templates, schema)}});
    const auto coa_results = gateway.complete_batch(coa, coa_batch, config.sampling, config.max_in_flight);

    std::vector<std::size_t> induced;  // corpus positions that reach rule induction
    std::vector<std::vector<ChatMessage>> aux_batch;
    std::vector<std::string> skip_reason(corpus.size());
    std::vector<bool> skip_hard(corpus.size(), false);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& inst = corpus[i];
        if (!coa_results[i].ok()) {
            skip_reason[i] = "gateway error: " + coa_results[i].error;
            skip_hard[i] = true;
            continue;
        }
        auto analogies = parse_virtual_analogies(coa_results[i].exchange->response, inst.id, schema);
        if (analogies.empty()) {
            skip_reason[i] = "no analogies parsed";
            continue;
        }
        aux_batch.push_back({{"user", rule_induction_prompt(inst, analogies, templates, schema)}});
        out.analogies.emplace(inst.id, std::move(analogies));
        induced.push_back(i);
    }

    std::vector<BatchItem> aux_results;
    if (!aux_batch.empty()) aux_results = gateway.complete_batch(aux, aux_batch, config.sampling, config.max_in_flight);

    std::vector<std::optional<ModerationRule>> rule_at(corpus.size());
    for (std::size_t b = 0; b < induced.size(); ++b) {
        const auto i = induced[b];
        const auto& inst = corpus[i];
        if (!aux_results[b].ok()) {
            skip_reason[i] = "gateway error: " + aux_results[b].error;
            skip_hard[i] = true;
            continue;
        }
        const auto& output = aux_results[b].exchange->response;
        auto rule = rule_from_output(inst, out.analogies.at(inst.id), aux.id, output);
        rule.verdict = verify_label_consistency(output, inst.label, schema, inst.id);
        if (rule.status == RuleStatus::unverified) {
            if (rule.verdict->consistent) {
                rule.status = RuleStatus::accepted;
            } else {
                rule.status = RuleStatus::discarded;
                rule.reason = rule.verdict->extracted_category
                                  ? "inconsistent category: " + *rule.verdict->extracted_category + " vs gold " + inst.label
                                  : "no category asserted";
            }
        }
        rule_at[i] = std::move(rule);
    }

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (rule_at[i])
            out.rules.push_back(std::move(*rule_at[i]));
        else
            out.skipped.add(corpus[i].id, skip_reason[i], skip_hard[i]);
    }

    if (config.review_fraction > 0.0) {
        std::vector<std::size_t> accepted_pos;
        std::vector<ModerationRule> accepted;
        for (std::size_t r = 0; r < out.rules.size(); ++r)
            if (out.rules[r].status == RuleStatus::accepted) {
                accepted_pos.push_back(r);
                accepted.push_back(out.rules[r]);
            }
        if (!accepted.empty()) {
            out.review_sample = sample_for_manual_review(accepted, config.review_fraction, config.review_seed);
            for (std::size_t a = 0; a < accepted.size(); ++a) out.rules[accepted_pos[a]].status = accepted[a].status;
        }
    }

    auto& m = out.manifest;
    m["stage"] = "stage2";
    m["schema"] = schema.name();
    m["corpus_digest"] = corpus_digest(corpus);
    m["virtual_analogies"] = config.virtual_analogies;
    m["models"] = {{"coa", coa.id}, {"aux", aux.id}};
    m["sampling"] = to_json(config.sampling);
    m["template_digests"] = templates.digests();
    m["review_fraction"] = config.review_fraction;
    m["review_seed"] = config.review_seed;
    m["accepted"] = out.count(RuleStatus::accepted);
    m["discarded"] = out.count(RuleStatus::discarded);
    m["pending_review"] = out.count(RuleStatus::pending_review);
    m["skipped"] = out.skipped.size();
    m["hard_errors"] = out.skipped.hard_errors();
    return out;
}

std::string review_export_jsonl(const std::vector<ModerationRule>& sample,
                                const std::vector<ModerationInstance>& corpus,
                                const std::map<std::string, std::vector<AnalogyExample>>& analogies) {
    std::unordered_map<std::string, const ModerationInstance*> by_id;
    for (const auto& inst : corpus) by_id.emplace(inst.id, &inst);
    std::string out;
    for (const auto& rule : sample) {
        nlohmann::ordered_json j;
        j["rule_id"] = rule.rule_id;
        j["instance_id"] = rule.instance_id;
        j["rule"] = rule.text;
        if (auto it = by_id.find(rule.instance_id); it != by_id.end()) {
            j["context"] = it->second->text;
            j["gold"] = it->second->label;
        }
        j["analogies"] = nlohmann::ordered_json::array();
        if (auto it = analogies.find(rule.instance_id); it != analogies.end())
            for (const auto& a : it->second) j["analogies"].push_back(to_json(a));
        out += j.dump() + "\n";
    }
    return out;
}

std::size_t apply_rule_reviews(std::vector<ModerationRule>& rules, const std::map<std::string, bool>& approvals) {
    std::size_t changed = 0;
    for (auto& r : rules) {
        if (r.status != RuleStatus::pending_review) continue;
        auto it = approvals.find(r.rule_id);
        if (it == approvals.end()) continue;
        if (it->second) {
            r.status = RuleStatus::accepted;
        } else {
            r.status = RuleStatus::discarded;
            r.reason = "rejected in manual review";
        }
        ++changed;
    }
    return changed;
}

void write_rules(const std::vector<ModerationRule>& rules, const std::filesystem::path& path) {
    std::string body;
    for (const auto& r : rules) body += to_json(r).dump() + "\n";
    write_file_atomic(path, body);
}

std::vector<ModerationRule> read_rules(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<ModerationRule> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(rule_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_analogies(const std::map<std::string, std::vector<AnalogyExample>>& analogies,
                     const std::filesystem::path& path) {
    std::string body;
    for (const auto& [id, list] : analogies) {
        nlohmann::ordered_json j;
        j["instance_id"] = id;
        j["analogies"] = nlohmann::ordered_json::array();
        for (const auto& a : list) j["analogies"].push_back(to_json(a));
        body += j.dump() + "\n";
    }
    write_file_atomic(path, body);
}

std::map<std::string, std::vector<AnalogyExample>> read_analogies(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::map<std::string, std::vector<AnalogyExample>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        auto& list = out[j.at("instance_id").get<std::string>()];
        for (const auto& a : j.at("analogies")) list.push_back(analogy_from_json(a));
    }
    return out;
}

}  // namespace amod
