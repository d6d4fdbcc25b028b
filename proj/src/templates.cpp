#include "amod/templates.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"

#include <cctype>
#include <sstream>

namespace amod {

namespace {

bool is_slot_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string fold_newlines(const std::string& s) {
    std::string out = s;
    for (auto& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Template::Template(std::string name, std::string body) : name_(std::move(name)), body_(std::move(body)) {
    std::string literal;
    for (std::size_t i = 0; i < body_.size(); ++i) {
        const char c = body_[i];
        if (c == '{' && i + 1 < body_.size() && body_[i + 1] == '{') {
            literal.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
            literal.push_back('}');
            ++i;
        } else if (c == '{') {
            std::size_t j = i + 1;
            while (j < body_.size() && is_slot_char(body_[j])) ++j;
            if (j == i + 1 || j >= body_.size() || body_[j] != '}')
                throw ConfigError("template " + name_ + ": malformed placeholder at offset " + std::to_string(i));
            if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
            literal.clear();
            std::string slot = body_.substr(i + 1, j - i - 1);
            slots_.insert(slot);
            pieces_.push_back({true, std::move(slot)});
            i = j;
        } else if (c == '}') {
            throw ConfigError("template " + name_ + ": stray '}' at offset " + std::to_string(i));
        } else {
            literal.push_back(c);
        }
    }
    if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
}

std::string render(const Template& t, const RenderContext& ctx, std::vector<std::string>* warnings) {
    for (const auto& slot : t.required_slots())
        if (!ctx.contains(slot)) throw ConfigError("missing slot: " + slot);
    if (warnings) {
        for (const auto& [key, _] : ctx)
            if (!t.required_slots().contains(key))
                warnings->push_back("template " + t.name() + " ignores key " + key);
    }
    std::string out;
    for (const auto& piece : t.pieces_) out += piece.slot ? ctx.at(piece.text) : piece.text;
    return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory " + dir.string() + " not found");
    TemplateSet set;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        set.add(Template(entry.path().stem().string(), read_file(entry.path())));
    }
    return set;
}

void TemplateSet::add(Template t) {
    const std::string name = t.name();
    templates_.insert_or_assign(name, std::move(t));
}

const Template& TemplateSet::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("template " + name + " not found");
    return it->second;
}

std::map<std::string, std::string> TemplateSet::digests() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, t] : templates_) out[name] = sha256_hex(t.body());
    return out;
}

void TemplateSet::require(const std::vector<std::string>& names) const {
    std::string missing;
    for (const auto& n : names)
        if (!contains(n)) missing += (missing.empty() ? "" : ", ") + n;
    if (!missing.empty()) throw ConfigError("missing templates: " + missing);
}

std::string render_analogy_block(const std::vector<AnalogyExample>& examples, bool include_labels) {
    std::string out;
    for (std::size_t j = 0; j < examples.size(); ++j) {
        if (j) out += '\n';
        out += "Example " + std::to_string(j + 1) + ": " + fold_newlines(examples[j].text);
        if (include_labels) out += "\nLabel: " + examples[j].label;
    }
    return out;
}

std::vector<ParsedAnalogy> parse_analogy_block(const std::string& text) {
    std::vector<ParsedAnalogy> out;
    std::istringstream in(text);
    std::string raw;
    bool label_open = false;
    while (std::getline(in, raw)) {
        const std::string line = trim(raw);
        if (line.rfind("Example ", 0) == 0) {
            std::size_t i = 8;
            while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
            if (i > 8 && i < line.size() && line[i] == ':') {
                out.push_back({trim(std::string_view(line).substr(i + 1)), std::nullopt});
                label_open = true;
                continue;
            }
        }
        if (label_open && line.rfind("Label:", 0) == 0) {
            out.back().label = trim(std::string_view(line).substr(6));
            label_open = false;
            continue;
        }
        label_open = false;
    }
    return out;
}

}  // namespace amod
