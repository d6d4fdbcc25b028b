#include "amod/schema.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace amod {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

std::string_view to_string(AnalogyOrigin o) {
    return o == AnalogyOrigin::retrieved ? "retrieved" : "generated";
}

}  // namespace

LabelSchema::LabelSchema(std::string name, std::vector<std::string> categories,
                         std::optional<std::string> harmless)
    : name_(std::move(name)), categories_(std::move(categories)), harmless_(std::move(harmless)) {
    if (name_.empty()) throw ConfigError("schema name must be non-empty");
    if (categories_.empty()) throw ConfigError("schema " + name_ + " has no categories");
    std::set<std::string> seen;
    for (const auto& c : categories_) {
        if (c.empty()) throw ConfigError("schema " + name_ + " has an empty category name");
        if (c.find('\n') != std::string::npos)
            throw ConfigError("schema " + name_ + " category contains a newline");
        if (!seen.insert(c).second)
            throw ConfigError("schema " + name_ + " repeats category " + c);
    }
    if (harmless_ && !seen.contains(*harmless_))
        throw ConfigError("harmless category " + *harmless_ + " is not in schema " + name_);
}

bool LabelSchema::contains(std::string_view category) const {
    return index_of(category).has_value();
}

std::optional<std::size_t> LabelSchema::index_of(std::string_view category) const {
    for (std::size_t i = 0; i < categories_.size(); ++i)
        if (categories_[i] == category) return i;
    return std::nullopt;
}

std::optional<std::string> LabelSchema::canonical(std::string_view category) const {
    for (const auto& c : categories_)
        if (iequals(c, category)) return c;
    return std::nullopt;
}

std::string LabelSchema::joined() const {
    std::string out;
    for (std::size_t i = 0; i < categories_.size(); ++i) {
        if (i) out += ", ";
        out += categories_[i];
    }
    return out;
}

LabelSchema fine_grained_schema() {
    return LabelSchema("fine_grained",
                       {"Politics", "Pornography", "Violence", "Gambling", "Bias", "Harmless"},
                       "Harmless");
}

LabelSchema aegis_schema() {
    return LabelSchema("aegis", {"Hate", "Sexual", "Confessions", "Harassment", "Profanity"});
}

LabelSchema resolve_schema(const std::string& name_or_path) {
    if (name_or_path == "fine_grained") return fine_grained_schema();
    if (name_or_path == "aegis") return aegis_schema();

    const std::filesystem::path path(name_or_path);
    if (!std::filesystem::exists(path))
        throw ConfigError("unknown schema " + name_or_path +
                          " (builtins: fine_grained, aegis; or a schema file path)");
    if (path.extension() == ".toml") {
        toml::table tbl;
        try {
            tbl = toml::parse_file(path.string());
        } catch (const toml::parse_error& e) {
            throw ConfigError("schema file " + path.string() + ": " + std::string(e.description()));
        }
        std::vector<std::string> cats;
        if (auto* arr = tbl["categories"].as_array())
            for (auto& node : *arr)
                if (auto v = node.value<std::string>()) cats.push_back(*v);
        auto harmless = tbl["harmless"].value<std::string>();
        return LabelSchema(tbl["name"].value_or(path.stem().string()), std::move(cats), harmless);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("schema file " + path.string() + ": " + e.what());
    }
    std::optional<std::string> harmless;
    if (j.contains("harmless") && !j["harmless"].is_null()) harmless = j["harmless"].get<std::string>();
    return LabelSchema(j.value("name", path.stem().string()),
                       j.at("categories").get<std::vector<std::string>>(), harmless);
}

std::string_view to_string(Stage stage) {
    return stage == Stage::stage1 ? "stage1" : "stage3";
}

Stage parse_stage(std::string_view text) {
    if (text == "stage1") return Stage::stage1;
    if (text == "stage3") return Stage::stage3;
    throw DatasetError("unknown stage " + std::string(text));
}

ValidationVerdict validate_instance(const ModerationInstance& inst, const LabelSchema& schema) {
    ValidationVerdict v;
    if (inst.id.empty()) v.violations.emplace_back("empty id");
    if (inst.text.empty()) v.violations.emplace_back("empty text");
    if (!schema.contains(inst.label))
        v.violations.push_back("unknown label " + inst.label + " (schema " + schema.name() + ")");
    return v;
}

nlohmann::ordered_json to_json(const ModerationInstance& inst) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["text"] = inst.text;
    j["label"] = inst.label;
    if (!inst.meta.empty()) j["meta"] = inst.meta;
    return j;
}

std::vector<ModerationInstance> load_dataset(const std::filesystem::path& path,
                                             const LabelSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open dataset " + path.string());

    std::vector<ModerationInstance> out;
    std::unordered_map<std::string, std::size_t> first_line;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        ModerationInstance inst;
        try {
            const auto j = nlohmann::json::parse(line);
            if (!j.is_object()) throw DatasetError(where + "malformed line: record is not an object");
            inst.id = j.contains("id") && !j["id"].is_null() ? j["id"].get<std::string>()
                                                            : "row:" + std::to_string(lineno);
            inst.text = j.at("text").get<std::string>();
            inst.label = j.at("label").get<std::string>();
            if (j.contains("meta") && !j["meta"].is_null())
                inst.meta = j["meta"].get<std::map<std::string, std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(where + "malformed line: " + e.what());
        }
        if (!schema.contains(inst.label))
            throw DatasetError(where + "unknown label " + inst.label + " (schema " + schema.name() + ")");
        if (auto verdict = validate_instance(inst, schema); !verdict.ok())
            throw DatasetError(where + verdict.violations.front());
        if (auto [it, fresh] = first_line.emplace(inst.id, lineno); !fresh) {
            throw DatasetError(path.string() + ": duplicate id " + inst.id + " on lines " +
                               std::to_string(it->second) + " and " + std::to_string(lineno));
        }
        out.push_back(std::move(inst));
    }
    return out;
}

void write_dataset(const std::vector<ModerationInstance>& instances,
                   const std::filesystem::path& path) {
    std::string body;
    for (const auto& inst : instances) {
        body += to_json(inst).dump();
        body += '\n';
    }
    write_file_atomic(path, body);
}

nlohmann::ordered_json to_json(const AnalogyExample& ex) {
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["text"] = ex.text;
    j["label"] = ex.label;
    j["origin"] = to_string(ex.origin);
    if (ex.similarity) j["similarity"] = *ex.similarity;
    return j;
}

AnalogyExample analogy_from_json(const nlohmann::json& j) {
    AnalogyExample ex;
    ex.id = j.at("id").get<std::string>();
    ex.text = j.at("text").get<std::string>();
    ex.label = j.at("label").get<std::string>();
    const auto origin = j.value("origin", std::string("retrieved"));
    ex.origin = origin == "generated" ? AnalogyOrigin::generated : AnalogyOrigin::retrieved;
    if (j.contains("similarity") && !j["similarity"].is_null()) ex.similarity = j["similarity"].get<double>();
    return ex;
}

nlohmann::ordered_json to_json(const SftRecord& rec) {
    nlohmann::ordered_json j;
    j["instance_id"] = rec.instance_id;
    j["prompt"] = rec.prompt;
    j["completion"] = rec.completion;
    j["stage"] = to_string(rec.stage);
    j["label"] = rec.label;
    return j;
}

SftRecord sft_record_from_json(const nlohmann::json& j) {
    SftRecord rec;
    rec.instance_id = j.at("instance_id").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.completion = j.at("completion").get<std::string>();
    rec.stage = parse_stage(j.at("stage").get<std::string>());
    rec.label = j.at("label").get<std::string>();
    return rec;
}

nlohmann::ordered_json to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["path"] = m.path;
    j["count"] = m.count;
    j["schema_name"] = m.schema_name;
    j["stage"] = to_string(m.stage);
    j["content_digest"] = m.content_digest;
    j["created_at"] = m.created_at;
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.path = j.at("path").get<std::string>();
    m.count = j.at("count").get<std::size_t>();
    m.schema_name = j.at("schema_name").get<std::string>();
    m.stage = parse_stage(j.at("stage").get<std::string>());
    m.content_digest = j.at("content_digest").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset) {
    auto p = dataset;
    p += ".manifest";
    return p;
}

DatasetManifest write_sft_dataset(const std::vector<SftRecord>& records,
                                  const std::filesystem::path& path,
                                  const std::string& schema_name) {
    if (records.empty()) throw DatasetError("refusing to write an empty SFT dataset");
    const Stage stage = records.front().stage;
    std::string body;
    for (const auto& rec : records) {
        if (rec.stage != stage) throw DatasetError("mixed stages in SFT dataset");
        if (rec.completion.empty())
            throw DatasetError("empty completion for instance " + rec.instance_id);
        body += to_json(rec).dump();
        body += '\n';
    }
    write_file_atomic(path, body);

    DatasetManifest m;
    m.path = path.filename().string();
    m.count = records.size();
    m.schema_name = schema_name;
    m.stage = stage;
    m.content_digest = sha256_hex(body);
    m.created_at = utc_timestamp();
    write_file_atomic(manifest_path_for(path), to_json(m).dump(2) + "\n");
    return m;
}

std::vector<SftRecord> read_sft_dataset(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<SftRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(sft_record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
        }
    }
    return out;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset) {
    try {
        return manifest_from_json(nlohmann::json::parse(read_file(manifest_path_for(dataset))));
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("malformed manifest for " + dataset.string() + ": " + e.what());
    }
}

bool verify_manifest(const std::filesystem::path& dataset) {
    const auto m = read_manifest(dataset);
    const auto body = read_file(dataset);
    const auto lines = static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n'));
    return lines == m.count && sha256_hex(body) == m.content_digest;
}

}  // namespace amod
