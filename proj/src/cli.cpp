#include "amod/cli.hpp"

#include "amod/config.hpp"
#include "amod/digest.hpp"
#include "amod/embedding.hpp"
#include "amod/error.hpp"
#include "amod/eval.hpp"
#include "amod/mock_backend.hpp"
#include "amod/review_server.hpp"
#include "amod/stage1.hpp"
#include "amod/stage2.hpp"
#include "amod/stage3.hpp"
#include "amod/synth.hpp"
#include "amod/vector_index.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#ifndef AMOD_DEFAULT_TEMPLATE_DIR
#define AMOD_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace amod {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> ablations;
    std::optional<std::uint64_t> seed;
    std::string out;
};

// Everything a pipeline stage needs, built once per invocation.
struct Context {
    RunConfig cfg;
    LabelSchema schema;
    TemplateSet templates;
    std::shared_ptr<RunLog> log;
    std::unique_ptr<Gateway> gateway;
    std::map<std::string, ModelHandle> handles;
    std::vector<ModerationInstance> corpus;

    const ModelHandle& handle(const std::string& role) const {
        auto it = handles.find(role);
        if (it == handles.end()) throw ConfigError("models." + role + " is not configured");
        return it->second;
    }
    fs::path out(const std::string& name) const { return cfg.output_dir / name; }
};

RunConfig resolve_config(const CommonOptions& opt) {
    if (opt.config.empty()) throw ConfigError("--config is required");
    auto cfg = load_run_config(opt.config);
    for (const auto& a : opt.ablations) {
        if (a == "no-knn")
            cfg.no_knn = true;
        else if (a == "skip-stage3")
            cfg.skip_stage3 = true;
        else
            throw ConfigError("unknown ablation " + a + " (expected no-knn or skip-stage3)");
    }
    if (cfg.no_knn) cfg.policy = RetrievalPolicy::random;
    if (opt.seed) cfg.seed = *opt.seed;
    if (!opt.out.empty()) cfg.output_dir = opt.out;
    return cfg;
}

Context make_context(const CommonOptions& opt) {
    auto cfg = resolve_config(opt);
    auto schema = resolve_schema(cfg.schema);
    auto templates = TemplateSet::load(cfg.templates);
    auto corpus = load_dataset(cfg.corpus, schema);
    fs::create_directories(cfg.output_dir);
    auto log = cfg.run_log ? std::make_shared<RunLog>(cfg.output_dir / "run_log.jsonl") : std::make_shared<RunLog>();
    Context ctx{std::move(cfg), std::move(schema), std::move(templates), log, nullptr, {}, std::move(corpus)};
    ctx.gateway = std::make_unique<Gateway>(ctx.cfg.retry, log);
    ctx.handles = register_models(ctx.cfg, *ctx.gateway);
    return ctx;
}

nlohmann::ordered_json output_entry(const fs::path& p) {
    return {{"path", p.filename().string()}, {"sha256", file_sha256_hex(p)}};
}

void write_run_manifest(const Context& ctx, const std::string& command, nlohmann::ordered_json details,
                        const std::vector<fs::path>& outputs) {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["created_at"] = utc_timestamp();
    m["config"] = to_json(ctx.cfg);
    m["template_digests"] = ctx.templates.digests();
    m["corpus_digest"] = corpus_digest(ctx.corpus);
    nlohmann::ordered_json models = nlohmann::ordered_json::object();
    for (const auto& [role, h] : ctx.handles) models[role] = h.id;
    m["models"] = models;
    m["details"] = std::move(details);
    m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& p : outputs) m["outputs"].push_back(output_entry(p));
    write_file_atomic(ctx.out(command + "_manifest.json"), m.dump(2) + "\n");
}

EmbedOptions embed_options(const RunConfig& cfg) {
    EmbedOptions o;
    o.batch_size = cfg.embedding.batch_size;
    o.max_in_flight = cfg.max_in_flight;
    o.retry = cfg.retry;
    return o;
}

struct EmbedResult {
    std::vector<EmbeddingVector> vectors;
    std::size_t requests = 0;
    std::string endpoint_id;
};

EmbedResult run_embed(Context& ctx) {
    auto backend = make_embedding_backend(ctx.cfg);
    EmbeddingCache cache(ctx.out("embedding_cache"));
    std::vector<std::string> texts;
    for (const auto& inst : ctx.corpus) texts.push_back(inst.text);
    EmbedResult r;
    r.vectors = embed_texts(*backend, texts, cache, embed_options(ctx.cfg));
    r.endpoint_id = backend->endpoint_id();
    if (auto* mock = dynamic_cast<MockEmbeddingBackend*>(backend.get())) r.requests = mock->request_count();
    return r;
}

VectorIndex run_index(Context& ctx) {
    auto embedded = run_embed(ctx);
    auto index = VectorIndex::build(ctx.corpus, embedded.vectors, ctx.schema.name());
    index.save(ctx.out("index.bin"));
    return index;
}

VectorIndex ensure_index(Context& ctx) {
    const auto path = ctx.out("index.bin");
    if (fs::exists(path)) {
        auto index = VectorIndex::load(path);
        bool complete = index.schema_name() == ctx.schema.name() && index.size() == ctx.corpus.size();
        for (std::size_t i = 0; complete && i < ctx.corpus.size(); ++i) complete = index.row_of(ctx.corpus[i].id).has_value();
        if (complete) return index;
    }
    return run_index(ctx);
}

struct StageSummary {
    std::size_t records = 0;
    std::size_t quarantined = 0;
    std::size_t hard_errors = 0;
    nlohmann::ordered_json to_json() const {
        return {{"records", records}, {"quarantined", quarantined}, {"hard_errors", hard_errors}};
    }
};

StageSummary run_stage1(Context& ctx) {
    const auto index = ensure_index(ctx);
    Stage1Config sc;
    sc.policy = ctx.cfg.policy;
    sc.k = ctx.cfg.k;
    sc.seed = ctx.cfg.seed;
    sc.filter = ctx.cfg.label_filter;
    sc.sampling = ctx.cfg.sampling;
    sc.max_in_flight = ctx.cfg.max_in_flight;
    auto out = build_augmented_dataset(ctx.corpus, index, *ctx.gateway, ctx.handle("base"), ctx.templates, ctx.schema, sc);

    std::vector<fs::path> outputs;
    if (!out.records.empty()) {
        write_sft_dataset(out.records, ctx.out("d_aug.jsonl"), ctx.schema.name());
        outputs.push_back(ctx.out("d_aug.jsonl"));
    }
    write_file_atomic(ctx.out("stage1_quarantine.jsonl"), out.quarantine.to_jsonl());
    outputs.push_back(ctx.out("stage1_quarantine.jsonl"));
    auto details = out.manifest;
    details["ablation"] = {{"no_knn", ctx.cfg.no_knn}, {"skip_stage3", ctx.cfg.skip_stage3}};
    write_run_manifest(ctx, "stage1", details, outputs);
    return {out.records.size(), out.quarantine.size(), out.quarantine.hard_errors()};
}

Stage2Config stage2_config(const RunConfig& cfg) {
    Stage2Config sc;
    sc.virtual_analogies = cfg.virtual_analogies;
    sc.sampling = cfg.sampling;
    sc.max_in_flight = cfg.max_in_flight;
    sc.review_fraction = cfg.review_fraction;
    sc.review_seed = cfg.review_seed;
    return sc;
}

StageSummary run_stage2(Context& ctx) {
    auto out = induce_rules(ctx.corpus, *ctx.gateway, ctx.handle("coa"), ctx.handle("aux"), ctx.templates, ctx.schema,
                            stage2_config(ctx.cfg));
    write_rules(out.rules, ctx.out("rules.jsonl"));
    write_analogies(out.analogies, ctx.out("analogies.jsonl"));
    write_file_atomic(ctx.out("stage2_skipped.jsonl"), out.skipped.to_jsonl());
    std::vector<fs::path> outputs{ctx.out("rules.jsonl"), ctx.out("analogies.jsonl"), ctx.out("stage2_skipped.jsonl")};
    if (!out.review_sample.empty()) {
        write_file_atomic(ctx.out("review_export.jsonl"),
                          review_export_jsonl(out.review_sample, ctx.corpus, out.analogies));
        outputs.push_back(ctx.out("review_export.jsonl"));
    }
    write_run_manifest(ctx, "stage2", out.manifest, outputs);
    // Discarded rules are content rejections, so only gateway failures count as hard.
    return {out.rules.size(), out.skipped.size(), out.skipped.hard_errors()};
}

std::map<std::string, bool> read_approvals(const fs::path& path) {
    std::map<std::string, bool> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        out[j.at("rule_id").get<std::string>()] = j.at("approved").get<bool>();
    }
    return out;
}

StageSummary run_stage3(Context& ctx, const std::string& approvals) {
    if (!fs::exists(ctx.out("rules.jsonl")) || !fs::exists(ctx.out("analogies.jsonl")))
        throw ConfigError("stage3 needs rules.jsonl and analogies.jsonl from stage2 in " + ctx.cfg.output_dir.string());
    auto rules = read_rules(ctx.out("rules.jsonl"));
    const auto analogies = read_analogies(ctx.out("analogies.jsonl"));
    std::size_t reviewed = 0;
    if (!approvals.empty()) reviewed = apply_rule_reviews(rules, read_approvals(approvals));

    Stage3Config sc{ctx.cfg.sampling, ctx.cfg.max_in_flight};
    auto out = emit_refined_dataset(ctx.corpus, rules, analogies, *ctx.gateway, ctx.handle("aux"), ctx.templates,
                                    ctx.schema, sc);
    std::vector<fs::path> outputs;
    if (!out.records.empty()) {
        write_sft_dataset(out.records, ctx.out("d_refined.jsonl"), ctx.schema.name());
        outputs.push_back(ctx.out("d_refined.jsonl"));
    }
    write_file_atomic(ctx.out("stage3_quarantine.jsonl"), out.quarantine.to_jsonl());
    outputs.push_back(ctx.out("stage3_quarantine.jsonl"));
    auto details = out.manifest;
    details["reviews_applied"] = reviewed;
    write_run_manifest(ctx, "stage3", details, outputs);
    return {out.records.size(), out.quarantine.size(), out.quarantine.hard_errors()};
}

void print_summary(const std::string& stage, const StageSummary& s) {
    std::cout << stage << ": " << s.records << " records, " << s.quarantined << " quarantined, " << s.hard_errors
              << " hard errors\n";
}

int status_for(std::size_t hard_errors) { return hard_errors == 0 ? kExitOk : kExitRuntime; }

std::pair<std::string, std::string> split_named(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::map<std::string, std::string> rules_by_instance(const std::vector<ModerationRule>& rules, bool accepted_only) {
    std::map<std::string, std::string> out;
    for (const auto& r : rules)
        if (!accepted_only || r.status == RuleStatus::accepted) out[r.instance_id] = r.text;
    return out;
}

std::string toml_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

void write_toml_config(const fs::path& dir, const std::string& schema, std::uint64_t seed, std::size_t k,
                       const fs::path& templates, bool with_test) {
    std::ostringstream t;
    t << "schema = \"" << schema << "\"\n"
      << "corpus = \"corpus.jsonl\"\n"
      << (with_test ? "test_corpus = \"test.jsonl\"\n" : "")
      << "templates = " << toml_quote(fs::absolute(templates).string()) << "\n"
      << "output_dir = \"out\"\n\n"
      << "[retrieval]\npolicy = \"knn\"\nk = " << k << "\nseed = " << seed << "\n\n"
      << "[sampling]\ntemperature = 0.8\ntop_p = 0.95\ntop_k = 50\nmax_tokens = 1024\nseed = " << seed << "\n\n"
      << "[gateway]\nmax_in_flight = 8\nmax_retries = 3\nbackoff_ms = 0\nrun_log = true\n\n";
    for (const auto* role : {"base", "coa", "aux", "external"})
        t << "[models." << role << "]\nmock = \"mocks/" << role << ".json\"\n\n";
    t << "[models.embedding]\nmock = \"tokens\"\ndim = 256\n\n"
      << "[stage2]\nanalogies = 4\nreview_fraction = 0.0\nreview_seed = " << seed << "\n";
    write_file_atomic(dir / "run.toml", t.str());
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Analogy-driven content moderation data pipeline"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    CommonOptions common;
    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        auto* c = sub->add_option("--config", common.config, "run configuration (TOML)");
        if (need_config) c->required();
        sub->add_option("--ablation", common.ablations, "no-knn | skip-stage3")
            ->check(CLI::IsMember({"no-knn", "skip-stage3"}));
        sub->add_option("--seed", common.seed, "override retrieval.seed");
        sub->add_option("--out", common.out, "override output_dir");
    };

    auto* embed = app.add_subcommand("embed", "embed the corpus into the on-disk cache");
    add_common(embed);
    auto* index = app.add_subcommand("index", "embed the corpus and persist the vector index");
    add_common(index);
    auto* stage1 = app.add_subcommand("stage1", "retrieve analogies and emit the augmented dataset");
    add_common(stage1);
    auto* stage2 = app.add_subcommand("stage2", "generate virtual analogies and induce rules");
    add_common(stage2);
    auto* stage3 = app.add_subcommand("stage3", "synthesize reasoning and emit the refined dataset");
    add_common(stage3);
    std::string approvals;
    stage3->add_option("--approvals", approvals, "manual-review decisions (JSONL of rule_id, approved)")
        ->check(CLI::ExistingFile);
    auto* pipeline = app.add_subcommand("pipeline", "embed, index and run all three stages");
    add_common(pipeline);

    auto* eval = app.add_subcommand("eval", "score predictions against gold labels");
    std::vector<std::string> preds;
    std::string gold, eval_schema = "fine_grained", baseline, eval_out = "eval_out";
    eval->add_option("--pred", preds, "predictions file, optionally name=path; repeatable")->required();
    eval->add_option("--gold", gold, "gold corpus")->required()->check(CLI::ExistingFile);
    eval->add_option("--schema", eval_schema, "schema name or file");
    eval->add_option("--baseline", baseline, "row name used as the delta baseline");
    eval->add_option("--out", eval_out, "report directory");

    auto* rule_eval = app.add_subcommand("rule-eval", "rule generalization against an external model");
    add_common(rule_eval);
    std::string rules_file, simple_rules_file;
    std::vector<std::string> human;
    rule_eval->add_option("--rules", rules_file, "rule ledger for the test set (induced when omitted)")
        ->check(CLI::ExistingFile);
    rule_eval->add_option("--simple-rules", simple_rules_file, "ledger of comparison rules")->check(CLI::ExistingFile);
    rule_eval->add_option("--human", human, "name=percent human preference; repeatable");

    auto* serve = app.add_subcommand("review-serve", "serve the blinded pairwise review workflow");
    std::string store_dir = "review_store", host = "127.0.0.1", static_dir, pairs_file, rule_review;
    int port = 8080;
    std::vector<std::string> annotators;
    std::uint64_t review_seed = 0;
    bool allow_ties = false;
    serve->add_option("--store", store_dir, "session store directory");
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--static", static_dir, "UI bundle directory")->check(CLI::ExistingDirectory);
    serve->add_option("--pairs", pairs_file, "JSONL of {a, b, context} to open a session with")
        ->check(CLI::ExistingFile);
    serve->add_option("--annotators", annotators, "annotator ids for --pairs")->delimiter(',');
    serve->add_option("--seed", review_seed);
    serve->add_flag("--allow-ties", allow_ties);
    serve->add_option("--rule-review", rule_review, "stage-2 review export to queue")->check(CLI::ExistingFile);

    auto* synth = app.add_subcommand("synth-corpus", "write a synthetic corpus, mock scripts and a run config");
    std::size_t n = 60, test_n = 30;
    std::string synth_schema = "fine_grained", synth_out = "synth", templates_dir = AMOD_DEFAULT_TEMPLATE_DIR;
    std::uint64_t synth_seed = 0;
    synth->add_option("--n", n, "corpus size")->check(CLI::PositiveNumber);
    synth->add_option("--test-n", test_n, "test set size (0 for none)");
    synth->add_option("--schema", synth_schema);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out);
    synth->add_option("--templates", templates_dir, "template directory referenced by the generated config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (synth->parsed()) {
            const auto schema = resolve_schema(synth_schema);
            const auto corpus = synth_corpus(n, schema, synth_seed);
            fs::path dir(synth_out);
            fs::create_directories(dir / "mocks");
            write_dataset(corpus, dir / "corpus.jsonl");
            if (test_n > 0) {
                auto test = synth_corpus(test_n, schema, synth_seed + 1);
                for (auto& inst : test) inst.id = "test-" + inst.id.substr(4);
                write_dataset(test, dir / "test.jsonl");
            }
            const auto suite = default_mock_suite(schema);
            for (const auto* s : {&suite.base, &suite.coa, &suite.aux, &suite.external}) {
                const auto role = s->id.substr(5);
                write_file_atomic(dir / "mocks" / (role + ".json"), s->to_json().dump(2) + "\n");
            }
            write_toml_config(dir, synth_schema, synth_seed, std::min<std::size_t>(kDefaultNeighbors, n - 1),
                              templates_dir, test_n > 0);
            nlohmann::ordered_json m{{"command", "synth-corpus"}, {"n", n}, {"test_n", test_n},
                                     {"schema", schema.name()}, {"seed", synth_seed},
                                     {"corpus_digest", corpus_digest(corpus)}};
            write_file_atomic(dir / "synth_manifest.json", m.dump(2) + "\n");
            std::cout << "wrote " << n << " instances to " << (dir / "corpus.jsonl").string() << "\n";
            return kExitOk;
        }

        if (eval->parsed()) {
            const auto schema = resolve_schema(eval_schema);
            const auto gold_set = load_dataset(gold, schema);
            std::vector<std::pair<std::string, std::string>> named;
            for (const auto& p : preds) {
                named.push_back(split_named(p));
                if (!fs::is_regular_file(named.back().second))
                    throw ConfigError("predictions file not found: " + named.back().second);
            }
            std::vector<NamedReport> reports;
            for (const auto& [name, path] : named) {
                reports.push_back({name, score_predictions(load_predictions(path, gold_set, schema), schema)});
            }
            fs::create_directories(eval_out);
            std::string jsonl;
            for (const auto& r : reports) jsonl += to_json(r).dump() + "\n";
            write_file_atomic(fs::path(eval_out) / "eval_report.jsonl", jsonl);
            std::string table = render_f1_table(reports);
            if (reports.size() >= 2) table += "\n" + compare_runs(reports, baseline.empty() ? reports.front().name : baseline).render();
            write_file_atomic(fs::path(eval_out) / "eval_table.txt", table);
            std::cout << table;
            return kExitOk;
        }

        if (serve->parsed()) {
            auto store = std::make_shared<ReviewStore>(store_dir);
            if (!pairs_file.empty()) {
                SessionSpec spec;
                spec.annotators = annotators;
                spec.seed = review_seed;
                spec.allow_ties = allow_ties;
                std::istringstream in(read_file(pairs_file));
                std::string line;
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    const auto j = nlohmann::json::parse(line);
                    spec.pairs.push_back({j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                                          j.value("context", std::string())});
                }
                std::cout << "session " << store->create_session(spec) << "\n";
            }
            if (!rule_review.empty()) {
                store->load_rule_review("stage2", rule_review);
                std::cout << "rule review queue: stage2\n";
            }
            ReviewServer server(store, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
            const int bound = server.bind(host, port);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            server.listen();
            return kExitOk;
        }

        auto ctx = make_context(common);
        if (embed->parsed()) {
            const auto r = run_embed(ctx);
            write_run_manifest(ctx, "embed",
                               {{"endpoint", r.endpoint_id}, {"texts", ctx.corpus.size()},
                                {"dim", r.vectors.empty() ? 0 : r.vectors.front().dim()}, {"requests", r.requests}},
                               {});
            std::cout << "embedded " << r.vectors.size() << " texts\n";
            return kExitOk;
        }
        if (index->parsed()) {
            const auto idx = run_index(ctx);
            write_run_manifest(ctx, "index", {{"rows", idx.size()}, {"dim", idx.dim()}}, {ctx.out("index.bin")});
            std::cout << "indexed " << idx.size() << " rows\n";
            return kExitOk;
        }
        if (stage1->parsed()) {
            const auto s = run_stage1(ctx);
            print_summary("stage1", s);
            return status_for(s.hard_errors);
        }
        if (stage2->parsed()) {
            const auto s = run_stage2(ctx);
            print_summary("stage2", s);
            return status_for(s.hard_errors);
        }
        if (stage3->parsed()) {
            if (ctx.cfg.skip_stage3) {
                std::cout << "stage3 skipped by ablation\n";
                return kExitOk;
            }
            const auto s = run_stage3(ctx, approvals);
            print_summary("stage3", s);
            return status_for(s.hard_errors);
        }
        if (pipeline->parsed()) {
            std::size_t hard = 0;
            nlohmann::ordered_json details;
            const auto idx = run_index(ctx);
            details["index"] = {{"rows", idx.size()}, {"dim", idx.dim()}};
            const auto s1 = run_stage1(ctx);
            print_summary("stage1", s1);
            details["stage1"] = s1.to_json();
            hard += s1.hard_errors;
            if (!ctx.cfg.skip_stage3) {
                const auto s2 = run_stage2(ctx);
                print_summary("stage2", s2);
                const auto s3 = run_stage3(ctx, approvals);
                print_summary("stage3", s3);
                details["stage2"] = s2.to_json();
                details["stage3"] = s3.to_json();
                hard += s2.hard_errors + s3.hard_errors;
            }
            write_run_manifest(ctx, "pipeline", details, {});
            return status_for(hard);
        }
        if (rule_eval->parsed()) {
            if (ctx.cfg.test_corpus.empty()) throw ConfigError("rule-eval needs test_corpus in the config");
            const auto test = load_dataset(ctx.cfg.test_corpus, ctx.schema);
            std::map<std::string, std::string> rules;
            if (!rules_file.empty()) {
                rules = rules_by_instance(read_rules(rules_file), true);
            } else {
                auto induced = induce_rules(test, *ctx.gateway, ctx.handle("coa"), ctx.handle("aux"), ctx.templates,
                                            ctx.schema, stage2_config(ctx.cfg));
                write_rules(induced.rules, ctx.out("test_rules.jsonl"));
                rules = rules_by_instance(induced.rules, false);
            }
            RuleEvalOptions opts{ctx.cfg.sampling, ctx.cfg.max_in_flight};
            const auto& ext = ctx.handle("external");
            std::vector<NamedReport> reports;
            reports.push_back({"with_rules", rule_generalization_eval(*ctx.gateway, ext, rules, test, ctx.templates,
                                                                      ctx.schema, RuleCondition::with_rules, opts)});
            if (!simple_rules_file.empty())
                reports.push_back({"simple_rules",
                                   rule_generalization_eval(*ctx.gateway, ext,
                                                            rules_by_instance(read_rules(simple_rules_file), false),
                                                            test, ctx.templates, ctx.schema,
                                                            RuleCondition::simple_rules, opts)});
            reports.push_back({"no_rules", rule_generalization_eval(*ctx.gateway, ext, {}, test, ctx.templates,
                                                                    ctx.schema, RuleCondition::no_rules, opts)});
            std::map<std::string, double> human_pct;
            for (const auto& h : human) {
                const auto [name, value] = split_named(h);
                human_pct[name] = std::stod(value);
            }
            std::vector<RuleQualityRow> rows;
            std::string jsonl;
            for (const auto& r : reports) {
                RuleQualityRow row{r.name, r.report.macro_f1 * 100.0, std::nullopt};
                if (auto it = human_pct.find(r.name); it != human_pct.end()) row.human = it->second;
                rows.push_back(row);
                jsonl += to_json(r).dump() + "\n";
            }
            write_file_atomic(ctx.out("rule_eval_report.jsonl"), jsonl);
            const auto table = render_rule_quality_table(rows);
            write_file_atomic(ctx.out("rule_eval_table.txt"), table);
            write_run_manifest(ctx, "rule-eval", {{"conditions", reports.size()}},
                               {ctx.out("rule_eval_report.jsonl"), ctx.out("rule_eval_table.txt")});
            std::cout << table;
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    return run_cli(static_cast<int>(copy.size()), argv.data());
}

}  // namespace amod
