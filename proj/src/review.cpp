#include "amod/review.hpp"

#include "amod/digest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace amod {

namespace fs = std::filesystem;

namespace {

std::uint64_t seed_from_hex(const std::string& hex) { return std::stoull(hex.substr(0, 16), nullptr, 16); }

// Unbiased draw in [0, n) that does not depend on the standard library's
// distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        const auto x = rng();
        if (x < limit) return x % n;
    }
}

bool safe_name(const std::string& s) {
    return !s.empty() && s.size() <= 128 && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    }) && s != "." && s != "..";
}

nlohmann::ordered_json spec_json(const SessionSpec& spec) {
    nlohmann::ordered_json j;
    j["seed"] = spec.seed;
    j["method_a"] = spec.method_a;
    j["method_b"] = spec.method_b;
    j["allow_ties"] = spec.allow_ties;
    j["annotators"] = spec.annotators;
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : spec.pairs)
        j["pairs"].push_back({{"a", p.method_a_rule}, {"b", p.method_b_rule}, {"context", p.context}});
    return j;
}

SessionSpec spec_from_json(const nlohmann::json& j) {
    SessionSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.method_a = j.value("method_a", spec.method_a);
    spec.method_b = j.value("method_b", spec.method_b);
    spec.allow_ties = j.value("allow_ties", false);
    spec.annotators = j.at("annotators").get<std::vector<std::string>>();
    for (const auto& p : j.at("pairs"))
        spec.pairs.push_back({p.at("a").get<std::string>(), p.at("b").get<std::string>(), p.value("context", "")});
    return spec;
}

// Lines of a JSONL log; a trailing line without a newline is a torn write and is dropped.
// Lines ending in a line feed. A torn tail left by a crash mid-append is cut
// off the file so the next append starts on a fresh line.
std::vector<std::string> complete_lines(const fs::path& path) {
    std::vector<std::string> out;
    if (!fs::exists(path)) return out;
    const auto body = read_file(path);
    std::size_t start = 0;
    for (auto nl = body.find('\n'); nl != std::string::npos; nl = body.find('\n', start)) {
        if (nl > start) out.push_back(body.substr(start, nl - start));
        start = nl + 1;
    }
    if (start < body.size()) fs::resize_file(path, start);
    return out;
}

PreferenceCounts make_counts(const SessionSpec& spec) {
    PreferenceCounts c;
    c.votes[spec.method_a] = 0;
    c.votes[spec.method_b] = 0;
    return c;
}

void finish(PreferenceCounts& c) {
    std::size_t decided = 0;
    for (const auto& [m, n] : c.votes) decided += n;
    for (const auto& [m, n] : c.votes)
        c.percent[m] = decided == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(decided);
}

nlohmann::ordered_json counts_json(const PreferenceCounts& c) {
    nlohmann::ordered_json j;
    j["votes"] = c.votes;
    j["ties"] = c.ties;
    j["total"] = c.total;
    j["percent"] = c.percent;
    return j;
}

}  // namespace

std::string_view to_string(Choice c) {
    switch (c) {
        case Choice::left: return "left";
        case Choice::right: return "right";
        case Choice::tie: return "tie";
    }
    return "left";
}

Choice parse_choice(std::string_view text) {
    if (text == "left") return Choice::left;
    if (text == "right") return Choice::right;
    if (text == "tie") return Choice::tie;
    throw ReviewError(400, "invalid choice " + std::string(text));
}

std::size_t ReviewSession::assignment_count() const {
    std::size_t n = 0;
    for (const auto& [a, list] : order) n += list.size();
    return n;
}

std::string session_id_for(const SessionSpec& spec) { return "s" + sha256_hex(spec_json(spec).dump()).substr(0, 16); }

ReviewSession build_session(const SessionSpec& spec) {
    if (spec.pairs.empty()) throw ReviewError(400, "session needs at least one pair");
    if (spec.annotators.empty()) throw ReviewError(400, "session needs at least one annotator");
    if (spec.method_a == spec.method_b) throw ReviewError(400, "method ids must differ");
    std::set<std::string> seen;
    for (const auto& a : spec.annotators) {
        if (a.empty()) throw ReviewError(400, "empty annotator id");
        if (!seen.insert(a).second) throw ReviewError(400, "duplicate annotator " + a);
    }

    ReviewSession s;
    s.id = session_id_for(spec);
    s.spec = spec;
    const auto n = spec.pairs.size();
    const auto width = std::to_string(n).size();
    for (std::size_t i = 0; i < n; ++i) {
        auto num = std::to_string(i + 1);
        s.pair_ids.push_back("pair-" + std::string(width - num.size(), '0') + num);
    }
    for (const auto& annotator : spec.annotators) {
        std::mt19937_64 rng(seed_from_hex(sha256_hex(std::to_string(spec.seed) + ":" + annotator)));
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
        auto& list = s.order[annotator];
        for (auto idx : perm) list.push_back({idx, (rng() >> 63) == 1});
    }
    return s;
}

nlohmann::ordered_json to_json(const BlindedPair& p) {
    return {{"pair_id", p.pair_id}, {"context", p.context}, {"left", p.left}, {"right", p.right}};
}

nlohmann::ordered_json to_json(const Verdict& v) {
    return {{"pair_id", v.pair_id},
            {"annotator_id", v.annotator_id},
            {"choice", to_string(v.choice)},
            {"submitted_at", v.submitted_at}};
}

Verdict verdict_from_json(const nlohmann::json& j) {
    return {j.at("pair_id").get<std::string>(), j.at("annotator_id").get<std::string>(),
            parse_choice(j.at("choice").get<std::string>()), j.value("submitted_at", "")};
}

nlohmann::ordered_json to_json(const PreferenceReport& r) {
    nlohmann::ordered_json j;
    j["pooled"] = counts_json(r.pooled);
    j["majority_per_pair"] = counts_json(r.majority_per_pair);
    j["per_annotator"] = nlohmann::ordered_json::object();
    for (const auto& [a, c] : r.per_annotator) j["per_annotator"][a] = counts_json(c);
    j["agreement"] = {{"pairs_judged_by_all", r.pairs_judged_by_all}, {"unanimous_pairs", r.unanimous_pairs}};
    return j;
}

PreferenceReport aggregate_preferences(const ReviewSession& session, const std::vector<Verdict>& verdicts) {
    const auto& spec = session.spec;
    std::map<std::string, std::size_t> pair_index;
    for (std::size_t i = 0; i < session.pair_ids.size(); ++i) pair_index[session.pair_ids[i]] = i;

    PreferenceReport r;
    r.pooled = make_counts(spec);
    r.majority_per_pair = make_counts(spec);
    for (const auto& a : spec.annotators) r.per_annotator[a] = make_counts(spec);

    // per pair: annotator -> method ("" for tie)
    std::vector<std::map<std::string, std::string>> by_pair(session.pair_ids.size());
    for (const auto& v : verdicts) {
        const auto ord = session.order.find(v.annotator_id);
        const auto pit = pair_index.find(v.pair_id);
        if (ord == session.order.end() || pit == pair_index.end())
            throw ReviewError(400, "verdict for unknown pair or annotator");
        const auto& list = ord->second;
        const auto as = std::find_if(list.begin(), list.end(),
                                     [&](const Assignment& a) { return a.pair_index == pit->second; });
        std::string method;
        if (v.choice != Choice::tie) {
            const bool chose_left = v.choice == Choice::left;
            method = chose_left == as->a_on_left ? spec.method_a : spec.method_b;
        }
        for (auto* c : {&r.pooled, &r.per_annotator.at(v.annotator_id)}) {
            ++c->total;
            if (method.empty())
                ++c->ties;
            else
                ++c->votes[method];
        }
        by_pair[pit->second][v.annotator_id] = method;
    }

    for (const auto& votes : by_pair) {
        if (votes.empty()) continue;
        std::size_t a = 0, b = 0;
        for (const auto& [ann, m] : votes) {
            a += m == spec.method_a;
            b += m == spec.method_b;
        }
        ++r.majority_per_pair.total;
        if (a > b)
            ++r.majority_per_pair.votes[spec.method_a];
        else if (b > a)
            ++r.majority_per_pair.votes[spec.method_b];
        else
            ++r.majority_per_pair.ties;
        if (votes.size() == spec.annotators.size()) {
            ++r.pairs_judged_by_all;
            const auto& first = votes.begin()->second;
            if (std::all_of(votes.begin(), votes.end(), [&](const auto& kv) { return kv.second == first; }))
                ++r.unanimous_pairs;
        }
    }

    finish(r.pooled);
    finish(r.majority_per_pair);
    for (auto& [a, c] : r.per_annotator) finish(c);
    return r;
}

void append_line_durable(const fs::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("cannot open " + path.string() + ": " + std::strerror(errno));
    const std::string data = line + "\n";
    std::size_t done = 0;
    while (done < data.size()) {
        const auto n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            throw Error("write failed on " + path.string() + ": " + std::strerror(err));
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        const int err = errno;
        ::close(fd);
        throw Error("fsync failed on " + path.string() + ": " + std::strerror(err));
    }
    ::close(fd);
}

ReviewStore::ReviewStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    load_existing();
}

void ReviewStore::load_existing() {
    for (const auto& entry : fs::directory_iterator(root_)) {
        const auto session_file = entry.path() / "session.json";
        if (!entry.is_directory() || !fs::exists(session_file)) continue;
        Loaded l;
        l.session = build_session(spec_from_json(nlohmann::json::parse(read_file(session_file))));
        for (const auto& line : complete_lines(entry.path() / "verdicts.jsonl")) {
            auto v = verdict_from_json(nlohmann::json::parse(line));
            l.judged[v.annotator_id][v.pair_id] = true;
            l.verdicts.push_back(std::move(v));
        }
        sessions_[l.session.id] = std::move(l);
    }
}

std::string ReviewStore::create_session(const SessionSpec& spec) {
    auto session = build_session(spec);
    std::lock_guard lock(mu_);
    if (sessions_.contains(session.id)) return session.id;
    const auto dir = root_ / session.id;
    fs::create_directories(dir);
    write_file_atomic(dir / "session.json", spec_json(spec).dump(2) + "\n");
    const auto id = session.id;
    sessions_[id] = Loaded{std::move(session), {}, {}};
    return id;
}

bool ReviewStore::has_session(const std::string& id) const {
    std::lock_guard lock(mu_);
    return sessions_.contains(id);
}

ReviewStore::Loaded& ReviewStore::loaded(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ReviewError(404, "unknown session " + id);
    return it->second;
}

const ReviewStore::Loaded& ReviewStore::loaded(const std::string& id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ReviewError(404, "unknown session " + id);
    return it->second;
}

ReviewSession ReviewStore::session(const std::string& id) const {
    std::lock_guard lock(mu_);
    return loaded(id).session;
}

std::optional<BlindedPair> ReviewStore::next_pair(const std::string& id, const std::string& annotator) const {
    std::lock_guard lock(mu_);
    const auto& l = loaded(id);
    const auto ord = l.session.order.find(annotator);
    if (ord == l.session.order.end()) throw ReviewError(404, "unknown annotator " + annotator);
    const auto judged = l.judged.find(annotator);
    for (const auto& as : ord->second) {
        const auto& pid = l.session.pair_ids[as.pair_index];
        if (judged != l.judged.end() && judged->second.contains(pid)) continue;
        const auto& p = l.session.spec.pairs[as.pair_index];
        return BlindedPair{pid, p.context, as.a_on_left ? p.method_a_rule : p.method_b_rule,
                           as.a_on_left ? p.method_b_rule : p.method_a_rule};
    }
    return std::nullopt;
}

std::pair<std::size_t, std::size_t> ReviewStore::progress(const std::string& id, const std::string& annotator) const {
    std::lock_guard lock(mu_);
    const auto& l = loaded(id);
    const auto ord = l.session.order.find(annotator);
    if (ord == l.session.order.end()) throw ReviewError(404, "unknown annotator " + annotator);
    const auto judged = l.judged.find(annotator);
    return {judged == l.judged.end() ? 0 : judged->second.size(), ord->second.size()};
}

Verdict ReviewStore::submit_verdict(const std::string& id, const std::string& annotator, const std::string& pair_id,
                                    Choice choice) {
    std::lock_guard lock(mu_);
    auto& l = loaded(id);
    if (!l.session.order.contains(annotator)) throw ReviewError(404, "unknown annotator " + annotator);
    if (std::find(l.session.pair_ids.begin(), l.session.pair_ids.end(), pair_id) == l.session.pair_ids.end())
        throw ReviewError(404, "unknown pair " + pair_id);
    if (l.judged[annotator].contains(pair_id)) throw ReviewError(409, "already judged");
    if (choice == Choice::tie && !l.session.spec.allow_ties) throw ReviewError(400, "ties are disabled");

    Verdict v{pair_id, annotator, choice, utc_timestamp()};
    append_line_durable(root_ / id / "verdicts.jsonl", to_json(v).dump());
    l.judged[annotator][pair_id] = true;
    l.verdicts.push_back(v);
    return v;
}

std::vector<Verdict> ReviewStore::verdicts(const std::string& id) const {
    std::lock_guard lock(mu_);
    return loaded(id).verdicts;
}

PreferenceReport ReviewStore::report(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto& l = loaded(id);
    if (l.verdicts.empty()) throw ReviewError(409, "no verdicts yet");
    return aggregate_preferences(l.session, l.verdicts);
}

void ReviewStore::load_rule_review(const std::string& name, const fs::path& export_file) {
    if (!safe_name(name)) throw ReviewError(400, "invalid queue name " + name);
    RuleQueue q;
    std::istringstream in(read_file(export_file));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        q.items.push_back({j.at("rule_id").get<std::string>(), std::move(j)});
    }
    const auto dir = root_ / "rule_review" / name;
    fs::create_directories(dir);
    for (const auto& l : complete_lines(dir / "decisions.jsonl")) {
        const auto j = nlohmann::json::parse(l);
        q.decisions[j.at("rule_id").get<std::string>()] = j.at("approved").get<bool>();
    }
    std::lock_guard lock(mu_);
    rule_queues_[name] = std::move(q);
}

std::optional<nlohmann::json> ReviewStore::next_rule(const std::string& name) const {
    std::lock_guard lock(mu_);
    const auto it = rule_queues_.find(name);
    if (it == rule_queues_.end()) throw ReviewError(404, "unknown rule review queue " + name);
    for (const auto& item : it->second.items)
        if (!it->second.decisions.contains(item.rule_id)) return std::optional<nlohmann::json>(std::in_place, item.payload);
    return std::nullopt;
}

void ReviewStore::decide_rule(const std::string& name, const std::string& rule_id, bool approved,
                              const std::string& reviewer) {
    std::lock_guard lock(mu_);
    const auto it = rule_queues_.find(name);
    if (it == rule_queues_.end()) throw ReviewError(404, "unknown rule review queue " + name);
    auto& q = it->second;
    if (std::none_of(q.items.begin(), q.items.end(), [&](const RuleReviewItem& i) { return i.rule_id == rule_id; }))
        throw ReviewError(404, "unknown rule " + rule_id);
    if (q.decisions.contains(rule_id)) throw ReviewError(409, "already judged");
    nlohmann::ordered_json j{{"rule_id", rule_id}, {"approved", approved}, {"reviewer", reviewer},
                             {"submitted_at", utc_timestamp()}};
    append_line_durable(root_ / "rule_review" / name / "decisions.jsonl", j.dump());
    q.decisions[rule_id] = approved;
}

std::map<std::string, bool> ReviewStore::rule_decisions(const std::string& name) const {
    std::lock_guard lock(mu_);
    const auto it = rule_queues_.find(name);
    if (it == rule_queues_.end()) throw ReviewError(404, "unknown rule review queue " + name);
    return it->second.decisions;
}

}  // namespace amod
