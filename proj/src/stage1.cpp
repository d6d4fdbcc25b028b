#include "amod/stage1.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"
#include "amod/eval.hpp"

#include <algorithm>

namespace amod {

std::string augmentation_prompt(const ModerationInstance& inst, const RetrievalResult& analogies,
                                const TemplateSet& templates, const LabelSchema& schema) {
    if (analogies.neighbors.empty()) throw Error("no analogies for instance " + inst.id);
    return render(templates.get(template_names::chain_of_analogy),
                  {{"text", inst.text},
                   {"label", inst.label},
                   {"analogies", render_analogy_block(analogies.neighbors, true)},
                   {"categories", schema.joined()}});
}

std::string moderation_query(const ModerationInstance& inst, const TemplateSet& templates,
                             const LabelSchema& schema) {
    return render(templates.get(template_names::cot), {{"text", inst.text}, {"categories", schema.joined()}});
}

std::string canonical_completion(const std::string& chain_text, const std::string& label) {
    std::string body = chain_text.substr(0, last_decision_line(chain_text).value_or(chain_text.size()));
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
    if (!body.empty()) body += '\n';
    return body + "Decision: " + label;
}

AugmentationOutcome interpret_augmented_chain(const ModerationInstance& inst, const RetrievalResult& analogies,
                                              const std::string& response, const LabelSchema& schema) {
    AugmentationOutcome out;
    out.chain.instance_id = inst.id;
    for (const auto& n : analogies.neighbors) out.chain.analogy_ids.push_back(n.id);
    out.chain.chain_text = response;
    out.chain.decision = extract_label(response, schema);

    if (response.find_first_not_of(" \t\r\n") == std::string::npos)
        out.quarantine_reason = "empty chain";
    else if (!out.chain.decision)
        out.quarantine_reason = "no decision";
    else if (*out.chain.decision != inst.label)
        out.quarantine_reason = "decision mismatch: got " + *out.chain.decision + ", expected " + inst.label;
    return out;
}

AugmentationOutcome generate_augmented_chain(const Gateway& gateway, const ModelHandle& base,
                                             const ModerationInstance& inst, const RetrievalResult& analogies,
                                             const TemplateSet& templates, const LabelSchema& schema,
                                             const SamplingConfig& sampling) {
    const auto prompt = augmentation_prompt(inst, analogies, templates, schema);
    const auto ex = gateway.complete(base, {{"user", prompt}}, sampling);
    return interpret_augmented_chain(inst, analogies, ex.response, schema);
}

std::string corpus_digest(const std::vector<ModerationInstance>& corpus) {
    std::string material;
    for (const auto& inst : corpus) material += to_json(inst).dump() + "\n";
    return sha256_hex(material);
}

Stage1Output build_augmented_dataset(const std::vector<ModerationInstance>& corpus, const VectorIndex& index,
                                     const Gateway& gateway, const ModelHandle& base,
                                     const TemplateSet& templates, const LabelSchema& schema,
                                     const Stage1Config& config) {
    if (config.k == 0) throw ConfigError("retrieval k must be at least 1");
    templates.require({template_names::chain_of_analogy, template_names::cot});
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& inst : corpus) {
        if (!index.row_of(inst.id)) throw Error("instance " + inst.id + " is missing from the index");
        ids.push_back(inst.id);
    }

    std::vector<RetrievalResult> retrieved;
    if (config.policy == RetrievalPolicy::knn) {
        retrieved = retrieve_all(index, ids, config.k, config.filter);
    } else {
        for (const auto& id : ids)
            retrieved.push_back(random_sample(index, id, config.k, derive_seed(config.seed, id), config.filter));
    }

    Stage1Output out;
    std::vector<std::vector<ChatMessage>> batch;
    std::vector<std::size_t> batch_slot;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        attach_texts(retrieved[i], corpus);
        if (retrieved[i].neighbors.empty()) continue;
        batch.push_back({{"user", augmentation_prompt(corpus[i], retrieved[i], templates, schema)}});
        batch_slot.push_back(i);
    }

    std::vector<std::optional<BatchItem>> results(corpus.size());
    if (!batch.empty()) {
        auto items = gateway.complete_batch(base, batch, config.sampling, config.max_in_flight);
        for (std::size_t b = 0; b < items.size(); ++b) results[batch_slot[b]] = std::move(items[b]);
    }

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& inst = corpus[i];
        if (!results[i]) {
            out.quarantine.add(inst.id, "no analogies available");
            continue;
        }
        if (!results[i]->ok()) {
            out.quarantine.add(inst.id, "gateway error: " + results[i]->error, true);
            continue;
        }
        auto outcome = interpret_augmented_chain(inst, retrieved[i], results[i]->exchange->response, schema);
        if (outcome.quarantine_reason) {
            out.quarantine.add(inst.id, *outcome.quarantine_reason);
            continue;
        }
        SftRecord rec;
        rec.instance_id = inst.id;
        rec.prompt = moderation_query(inst, templates, schema);
        rec.completion = canonical_completion(outcome.chain.chain_text, inst.label);
        rec.stage = Stage::stage1;
        rec.label = inst.label;
        out.records.push_back(std::move(rec));
        out.chains.push_back(std::move(outcome.chain));
    }

    auto& m = out.manifest;
    m["stage"] = "stage1";
    m["schema"] = schema.name();
    m["corpus_digest"] = corpus_digest(corpus);
    m["retrieval_policy"] = to_string(config.policy);
    m["k"] = config.k;
    m["seed"] = config.seed;
    m["label_filter"] = config.filter == LabelFilter::any ? "any" : "same_label";
    m["models"] = {{"base", base.id}};
    m["sampling"] = to_json(config.sampling);
    m["template_digests"] = templates.digests();
    m["records"] = out.records.size();
    m["quarantined"] = out.quarantine.size();
    m["hard_errors"] = out.quarantine.hard_errors();
    return out;
}

}  // namespace amod
