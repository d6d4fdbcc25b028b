#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

/// A named, ordered set of moderation categories. Labels are single-category.
class LabelSchema {
public:
    LabelSchema(std::string name, std::vector<std::string> categories,
                std::optional<std::string> harmless = std::nullopt);

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& categories() const noexcept { return categories_; }
    const std::optional<std::string>& harmless_category() const noexcept { return harmless_; }

    bool contains(std::string_view category) const;
    std::optional<std::size_t> index_of(std::string_view category) const;
    /// Case-insensitive lookup returning the canonical spelling.
    std::optional<std::string> canonical(std::string_view category) const;
    /// "A, B, C" in schema order, for prompts.
    std::string joined() const;

    bool operator==(const LabelSchema&) const = default;

private:
    std::string name_;
    std::vector<std::string> categories_;
    std::optional<std::string> harmless_;
};

/// Six-category fine-grained moderation set (Politics ... Harmless).
LabelSchema fine_grained_schema();
/// Five-category Aegis-style harm set.
LabelSchema aegis_schema();

/// Resolves a builtin schema name or loads a JSON/TOML schema file
/// (`name`, `categories`, optional `harmless`).
LabelSchema resolve_schema(const std::string& name_or_path);

struct ModerationInstance {
    std::string id;
    std::string text;
    std::string label;
    std::map<std::string, std::string> meta;

    bool operator==(const ModerationInstance&) const = default;
};

enum class AnalogyOrigin { retrieved, generated };

struct AnalogyExample {
    std::string id;
    std::string text;
    std::string label;
    AnalogyOrigin origin = AnalogyOrigin::retrieved;
    std::optional<double> similarity;

    bool operator==(const AnalogyExample&) const = default;
};

enum class Stage { stage1, stage3 };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct SftRecord {
    std::string instance_id;
    std::string prompt;
    std::string completion;
    Stage stage = Stage::stage1;
    std::string label;

    bool operator==(const SftRecord&) const = default;
};

struct DatasetManifest {
    std::string path;
    std::size_t count = 0;
    std::string schema_name;
    Stage stage = Stage::stage1;
    std::string content_digest;
    std::string created_at;
};

/// Verdict of validate_instance: empty `violations` means ok.
struct ValidationVerdict {
    std::vector<std::string> violations;
    bool ok() const noexcept { return violations.empty(); }
};

ValidationVerdict validate_instance(const ModerationInstance& inst, const LabelSchema& schema);

/// Loads a JSONL corpus. Records without `id` get "row:<line-number>".
std::vector<ModerationInstance> load_dataset(const std::filesystem::path& path,
                                             const LabelSchema& schema);
void write_dataset(const std::vector<ModerationInstance>& instances,
                   const std::filesystem::path& path);

nlohmann::ordered_json to_json(const ModerationInstance& inst);
nlohmann::ordered_json to_json(const AnalogyExample& ex);
AnalogyExample analogy_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SftRecord& rec);
SftRecord sft_record_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Serializes records to JSONL, writes atomically, writes `<path>.manifest`.
DatasetManifest write_sft_dataset(const std::vector<SftRecord>& records,
                                  const std::filesystem::path& path,
                                  const std::string& schema_name);
std::vector<SftRecord> read_sft_dataset(const std::filesystem::path& path);

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset);
DatasetManifest read_manifest(const std::filesystem::path& dataset);
/// Recomputes count and digest from the dataset file and compares.
bool verify_manifest(const std::filesystem::path& dataset);

}  // namespace amod
