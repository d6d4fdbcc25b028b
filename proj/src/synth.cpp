#include "amod/synth.hpp"

#include "amod/error.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>

namespace amod {

namespace {

const std::map<std::string, std::string>& builtin_keywords() {
    static const std::map<std::string, std::string> k{
        {"Politics", "election"},   {"Pornography", "explicit"}, {"Violence", "assault"},
        {"Gambling", "betting"},    {"Bias", "stereotype"},       {"Harmless", "recipe"},
        {"Hate", "hateful"},        {"Sexual", "sexual"},         {"Confessions", "confess"},
        {"Harassment", "harass"},   {"Profanity", "profane"},
    };
    return k;
}

const std::map<std::string, std::vector<std::string>>& builtin_vocab() {
    static const std::map<std::string, std::vector<std::string>> v{
        {"Politics", {"candidate", "ballot", "parliament", "campaign", "minister"}},
        {"Pornography", {"nude", "adult", "webcam", "lewd", "xxx"}},
        {"Violence", {"weapon", "beating", "bloodshed", "stabbing", "threat"}},
        {"Gambling", {"casino", "odds", "jackpot", "wager", "bookmaker"}},
        {"Bias", {"prejudice", "slur", "inferior", "discrimination", "bigotry"}},
        {"Harmless", {"garden", "weather", "puppy", "holiday", "baking"}},
        {"Hate", {"dehumanizing", "supremacy", "vermin", "extermination", "hatred"}},
        {"Sexual", {"nudity", "erotic", "intimate", "seduction", "fetish"}},
        {"Confessions", {"admitted", "secret", "guilt", "crime", "regret"}},
        {"Harassment", {"stalking", "doxxing", "intimidation", "bullying", "pile-on"}},
        {"Profanity", {"swearing", "curse", "obscenity", "expletive", "vulgar"}},
    };
    return v;
}

const std::vector<std::string> kOpeners{"a forum post", "a short video caption", "a reply thread", "a news comment",
                                        "a private message", "a livestream chat line", "a product review",
                                        "a blog paragraph"};
const std::vector<std::string> kFraming{"posted", "shared", "reposted", "quoted", "pinned", "forwarded", "liked",
                                        "flagged"};
const std::vector<std::string> kClosers{"late at night", "with several emojis", "in a crowded group chat",
                                        "under a trending tag", "to a new audience", "after a heated exchange",
                                        "in a reply to a stranger", "with a screenshot attached"};

std::string escape_regex(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) out += '\\';
        out += c;
    }
    return out;
}

MockRule regex_rule(std::string pattern, std::string response) {
    MockRule r;
    r.pattern = std::move(pattern);
    r.response = std::move(response);
    return r;
}

}  // namespace

std::string topic_keyword(const LabelSchema& schema, const std::string& category) {
    if (!schema.contains(category)) throw ConfigError("unknown category " + category);
    const auto& k = builtin_keywords();
    if (auto it = k.find(category); it != k.end()) return it->second;
    std::string word = "topic";
    for (char c : category)
        if (std::isalnum(static_cast<unsigned char>(c))) word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return word;
}

std::vector<ModerationInstance> synth_corpus(std::size_t n, const LabelSchema& schema, std::uint64_t seed) {
    const auto& cats = schema.categories();
    const auto k = cats.size();
    if (n < k) throw ConfigError("synthetic corpus needs n >= " + std::to_string(k) + " categories");

    std::vector<std::string> labels;
    for (std::size_t i = 0; i < k; ++i) labels.insert(labels.end(), n / k + (i < n % k ? 1 : 0), cats[i]);
    std::mt19937_64 rng(seed);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng() % i]);

    const auto width = std::to_string(n).size();
    std::vector<ModerationInstance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto num = std::to_string(i + 1);
        ModerationInstance inst;
        inst.id = "syn-" + std::string(width - num.size(), '0') + num;
        inst.label = labels[i];
        const auto kw = topic_keyword(schema, labels[i]);
        const auto vit = builtin_vocab().find(labels[i]);
        const std::vector<std::string> vocab =
            vit != builtin_vocab().end() ? vit->second
                                         : std::vector<std::string>{kw + "-a", kw + "-b", kw + "-c", kw + "-d", kw + "-e"};
        std::string words;
        for (int w = 0; w < 3; ++w) words += (w ? ", " : "") + vocab[rng() % vocab.size()];
        inst.text = "#" + num + " " + kOpeners[rng() % kOpeners.size()] + " about " + kw + " content: " + words + ", " +
                    kFraming[rng() % kFraming.size()] + " " + kClosers[rng() % kClosers.size()] + ".";
        out.push_back(std::move(inst));
    }
    return out;
}

MockSuite default_mock_suite(const LabelSchema& schema, const std::string& fallback) {
    const auto& cats = schema.categories();
    const std::string fallback_label =
        fallback.empty() ? schema.harmless_category().value_or(cats.back()) : fallback;

    MockSuite s;
    s.base.id = "mock-base";
    s.coa.id = "mock-coa";
    s.aux.id = "mock-aux";
    s.external.id = "mock-external";

    s.base.rules.push_back(regex_rule(
        R"(Task: chain of analogy[\s\S]*?Example 1: ([^\n]*)\nLabel: ([^\n]*)[\s\S]*Gold label: ([^\n]+))",
        "The closest precedent reads: \"$1\". It was labeled $2.\n"
        "Comparing the content with that precedent and the remaining examples, the shared signals point to $3.\n"
        "Decision: $3"));

    for (const auto& c : cats) {
        const auto kw = escape_regex(topic_keyword(schema, c));
        const auto content = "Content: [^\\n]*\\b" + kw + "\\b";

        std::string examples;
        for (int j = 1; j <= 4; ++j)
            examples += "Example " + std::to_string(j) + ": an invented case " + std::to_string(j) + " about " +
                        topic_keyword(schema, c) + " content in a public thread\nLabel: " + c + "\n";
        s.coa.rules.push_back(regex_rule("Task: virtual analogies[\\s\\S]*" + content, examples));

        s.aux.rules.push_back(regex_rule(
            "Task: rule induction[\\s\\S]*" + content,
            "The content and its analogous cases all center on " + topic_keyword(schema, c) + " material.\n"
            "Category: " + c + "\nRULE: Content discussing " + topic_keyword(schema, c) + " falls under " + c +
                ". END"));

        s.base.rules.push_back(regex_rule("Task: moderation[\\s\\S]*" + content,
                                          "The content is about " + topic_keyword(schema, c) + ".\nDecision: " + c));
    }
    s.aux.rules.push_back(regex_rule(
        R"(Task: reasoning synthesis[\s\S]*Moderation rule:\n([^\n]*)\nGold label: ([^\n]+))",
        "Applying the rule \"$1\" to the content, and checking it against the analogous cases, "
        "the content belongs to $2.\nDecision: $2"));

    s.external.rules.push_back(
        regex_rule(R"(Task: rule application[\s\S]*falls under ([^.\n]+)\.)", "The rule applies.\nDecision: $1"));
    s.external.rules.push_back(regex_rule("Task: rule application", "No clear rule applies.\nDecision: " + fallback_label));
    s.external.rules.push_back(regex_rule("Task: moderation", "Nothing stands out.\nDecision: " + fallback_label));
    return s;
}

MockRule wrong_category_rule(std::size_t n, const std::string& wrong) {
    return regex_rule("Task: rule induction[\\s\\S]*Content: #" + std::to_string(n) + " ",
                      "These cases look alike.\nCategory: " + wrong + "\nRULE: Content like this falls under " + wrong +
                          ". END");
}

}  // namespace amod
