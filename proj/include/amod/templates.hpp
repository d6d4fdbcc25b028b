#pragma once

#include "amod/schema.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace amod {

/// Names the pipeline renders. The first four are the prompt families of the
/// method; the rest are extensions used by stage 2 and rule evaluation.
namespace template_names {
inline constexpr const char* cot = "cot";
inline constexpr const char* chain_of_analogy = "chain_of_analogy";
inline constexpr const char* rule_induction = "rule_induction";
inline constexpr const char* reasoning_synthesis = "reasoning_synthesis";
inline constexpr const char* virtual_analogies = "virtual_analogies";
inline constexpr const char* rule_application = "rule_application";
}  // namespace template_names

/// A prompt body with `{slot}` placeholders; `{{` and `}}` are literal braces.
class Template {
public:
    /// Throws ConfigError on an unterminated or empty placeholder.
    Template(std::string name, std::string body);

    const std::string& name() const noexcept { return name_; }
    const std::string& body() const noexcept { return body_; }
    const std::set<std::string>& required_slots() const noexcept { return slots_; }

private:
    struct Piece {
        bool slot;
        std::string text;
    };
    friend std::string render(const Template&, const std::map<std::string, std::string>&,
                              std::vector<std::string>*);

    std::string name_;
    std::string body_;
    std::set<std::string> slots_;
    std::vector<Piece> pieces_;
};

using RenderContext = std::map<std::string, std::string>;

/// Single-pass substitution; values are emitted verbatim and never re-expanded.
/// Missing slots throw ConfigError("missing slot: <name>"); unused keys append
/// a message to *warnings when given.
std::string render(const Template& t, const RenderContext& ctx, std::vector<std::string>* warnings = nullptr);

/// All `<name>.txt` templates found in a directory.
class TemplateSet {
public:
    TemplateSet() = default;
    static TemplateSet load(const std::filesystem::path& dir);

    void add(Template t);
    const Template& get(const std::string& name) const;
    bool contains(const std::string& name) const { return templates_.contains(name); }
    /// name -> SHA-256 of the body, for run manifests.
    std::map<std::string, std::string> digests() const;
    /// Throws ConfigError listing every name in `names` that is absent.
    void require(const std::vector<std::string>& names) const;

private:
    std::map<std::string, Template> templates_;
};

/// "Example j: <text>" lines, each followed by "Label: <label>" when include_labels.
/// Newlines inside texts are folded to spaces so every entry stays on one line.
std::string render_analogy_block(const std::vector<AnalogyExample>& examples, bool include_labels);

struct ParsedAnalogy {
    std::string text;
    std::optional<std::string> label;
};

/// Inverse of render_analogy_block; tolerant of surrounding prose.
std::vector<ParsedAnalogy> parse_analogy_block(const std::string& text);

}  // namespace amod
