#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

struct QuarantineEntry {
    std::string instance_id;
    std::string reason;
    bool hard_error = false;  // gateway failures, as opposed to content rejections
};

struct QuarantineReport {
    std::vector<QuarantineEntry> entries;

    void add(std::string instance_id, std::string reason, bool hard_error = false) {
        entries.push_back({std::move(instance_id), std::move(reason), hard_error});
    }
    std::size_t size() const noexcept { return entries.size(); }
    std::size_t hard_errors() const noexcept {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.hard_error ? 1 : 0;
        return n;
    }
    bool contains(const std::string& id) const {
        for (const auto& e : entries)
            if (e.instance_id == id) return true;
        return false;
    }
    std::string to_jsonl() const {
        std::string out;
        for (const auto& e : entries) {
            nlohmann::ordered_json j;
            j["instance_id"] = e.instance_id;
            j["reason"] = e.reason;
            j["hard_error"] = e.hard_error;
            out += j.dump() + "\n";
        }
        return out;
    }
};

}  // namespace amod
