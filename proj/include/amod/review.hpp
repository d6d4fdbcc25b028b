#pragma once

#include "amod/error.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

/// Review workflow failure; `status` is the HTTP status the server maps it to.
class ReviewError : public Error {
public:
    ReviewError(int status, const std::string& message) : Error(message), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

enum class Choice { left, right, tie };
std::string_view to_string(Choice c);
Choice parse_choice(std::string_view text);

struct ReviewPairInput {
    std::string method_a_rule;
    std::string method_b_rule;
    std::string context;
};

struct SessionSpec {
    std::vector<ReviewPairInput> pairs;
    std::vector<std::string> annotators;
    std::uint64_t seed = 0;
    std::string method_a = "method_a";
    std::string method_b = "method_b";
    bool allow_ties = false;
};

struct Assignment {
    std::size_t pair_index;
    bool a_on_left;
};

struct ReviewSession {
    std::string id;
    SessionSpec spec;
    std::vector<std::string> pair_ids;
    std::map<std::string, std::vector<Assignment>> order;  // per annotator

    std::size_t assignment_count() const;
};

/// Builds the per-annotator orders and flips. Throws ReviewError(400) on
/// empty pairs/annotators or a duplicate annotator id.
ReviewSession build_session(const SessionSpec& spec);

/// Identical specs give identical ids.
std::string session_id_for(const SessionSpec& spec);

/// The only pair shape a client ever sees.
struct BlindedPair {
    std::string pair_id;
    std::string context;
    std::string left;
    std::string right;
};
nlohmann::ordered_json to_json(const BlindedPair& p);

struct Verdict {
    std::string pair_id;
    std::string annotator_id;
    Choice choice = Choice::left;
    std::string submitted_at;
};
nlohmann::ordered_json to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);

struct PreferenceCounts {
    std::map<std::string, std::size_t> votes;  // method -> count
    std::size_t ties = 0;
    std::size_t total = 0;
    std::map<std::string, double> percent;  // over non-tie verdicts
};

struct PreferenceReport {
    PreferenceCounts pooled;
    std::map<std::string, PreferenceCounts> per_annotator;
    PreferenceCounts majority_per_pair;  // one vote per pair; split pairs count as ties
    std::size_t pairs_judged_by_all = 0;
    std::size_t unanimous_pairs = 0;
};
nlohmann::ordered_json to_json(const PreferenceReport& r);

/// Pure function of the session and its verdict log.
PreferenceReport aggregate_preferences(const ReviewSession& session, const std::vector<Verdict>& verdicts);

struct RuleReviewItem {
    std::string rule_id;
    nlohmann::json payload;  // one line of the stage-2 review export
};

/// Directory-backed sessions. Layout: <root>/<session id>/session.json and an
/// append-only verdicts.jsonl that is fsynced before a verdict is acknowledged.
class ReviewStore {
public:
    explicit ReviewStore(std::filesystem::path root);

    /// Re-creating an existing session returns its id and keeps its verdicts.
    std::string create_session(const SessionSpec& spec);
    bool has_session(const std::string& id) const;
    ReviewSession session(const std::string& id) const;

    /// nullopt once every pair assigned to the annotator has a verdict.
    std::optional<BlindedPair> next_pair(const std::string& id, const std::string& annotator) const;
    std::pair<std::size_t, std::size_t> progress(const std::string& id, const std::string& annotator) const;
    Verdict submit_verdict(const std::string& id, const std::string& annotator, const std::string& pair_id,
                           Choice choice);
    std::vector<Verdict> verdicts(const std::string& id) const;
    PreferenceReport report(const std::string& id) const;

    /// Stage-2 manual-review queue loaded from an export file.
    void load_rule_review(const std::string& name, const std::filesystem::path& export_file);
    std::optional<nlohmann::json> next_rule(const std::string& name) const;
    void decide_rule(const std::string& name, const std::string& rule_id, bool approved, const std::string& reviewer);
    std::map<std::string, bool> rule_decisions(const std::string& name) const;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    struct Loaded {
        ReviewSession session;
        std::vector<Verdict> verdicts;
        std::map<std::string, std::map<std::string, bool>> judged;  // annotator -> pair ids
    };
    struct RuleQueue {
        std::vector<RuleReviewItem> items;
        std::map<std::string, bool> decisions;
    };

    Loaded& loaded(const std::string& id);
    const Loaded& loaded(const std::string& id) const;
    void load_existing();

    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::map<std::string, Loaded> sessions_;
    std::map<std::string, RuleQueue> rule_queues_;
};

/// Appends one line and fsyncs before returning.
void append_line_durable(const std::filesystem::path& path, const std::string& line);

}  // namespace amod
