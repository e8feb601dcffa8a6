#include "msynth/memory.hpp"

#include "msynth/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>

namespace msynth {

using nlohmann::ordered_json;

std::string to_json_line(const MemoryEntry& entry) {
    ordered_json j;
    j["mechanism_text"] = entry.mechanism_text;
    j["chamfer"] = entry.chamfer;
    j["surrogate_text"] = entry.surrogate_text ? ordered_json(*entry.surrogate_text) : ordered_json(nullptr);
    j["task_id"] = entry.task_id;
    j["iteration"] = entry.iteration;
    j["created_at"] = entry.created_at;
    return j.dump();
}

MemoryEntry memory_entry_from_json(const std::string& line) {
    try {
        const ordered_json j = ordered_json::parse(line);
        MemoryEntry e;
        e.mechanism_text = j.at("mechanism_text").get<std::string>();
        e.chamfer = j.at("chamfer").get<double>();
        if (j.contains("surrogate_text") && !j["surrogate_text"].is_null()) {
            e.surrogate_text = j["surrogate_text"].get<std::string>();
        }
        e.task_id = j.at("task_id").get<std::string>();
        e.iteration = j.at("iteration").get<int>();
        e.created_at = j.at("created_at").get<std::uint64_t>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidInput(std::string("memory entry: ") + ex.what());
    }
}

MemoryRepository::MemoryRepository(std::filesystem::path persistent_file) : file_(std::move(persistent_file)) {
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        MemoryEntry e = memory_entry_from_json(line);
        next_sequence_ = std::max(next_sequence_, e.created_at + 1);
        entries_.push_back(std::move(e));
    }
}

StoreOutcome MemoryRepository::store(MemoryEntry entry, const SimResult& simulation) {
    if (!simulation.success) {
        return {false, "simulation failed"};
    }
    if (!std::isfinite(entry.chamfer) || entry.chamfer < 0.0) {
        return {false, "chamfer distance is not a finite non-negative number"};
    }
    if (entry.mechanism_text.empty()) {
        return {false, "empty mechanism text"};
    }
    std::unique_lock lock(mutex_);
    entry.created_at = next_sequence_++;
    if (file_) {
        std::ofstream out(*file_, std::ios::app);
        out << to_json_line(entry) << '\n';
        if (!out) {
            throw std::runtime_error("memory: cannot append to " + file_->string());
        }
    }
    entries_.push_back(std::move(entry));
    return {true, {}};
}

namespace {

std::vector<MemoryEntry> best_k(std::vector<MemoryEntry> pool, std::size_t k) {
    std::sort(pool.begin(), pool.end(), [](const MemoryEntry& a, const MemoryEntry& b) {
        if (a.chamfer != b.chamfer) return a.chamfer < b.chamfer;
        return a.created_at > b.created_at;
    });
    if (pool.size() > k) pool.resize(k);
    return pool;
}

}  // namespace

std::vector<MemoryEntry> MemoryRepository::retrieve_topk(std::size_t k) const {
    std::shared_lock lock(mutex_);
    return best_k(entries_, k);
}

std::vector<MemoryEntry> MemoryRepository::retrieve_topk(std::size_t k, const std::string& task_id,
                                                         const Rescorer& rescore) const {
    if (k == 0) return {};
    std::vector<MemoryEntry> pool;
    std::vector<MemoryEntry> foreign;
    {
        std::shared_lock lock(mutex_);
        for (const MemoryEntry& e : entries_) {
            (e.task_id == task_id ? pool : foreign).push_back(e);
        }
    }
    // Re-scoring simulates, so it runs outside the lock.
    if (rescore) {
        for (MemoryEntry& e : foreign) {
            if (const auto c = rescore(e); c && std::isfinite(*c)) {
                e.chamfer = *c;
                pool.push_back(std::move(e));
            }
        }
    }
    return best_k(std::move(pool), k);
}

std::size_t MemoryRepository::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::vector<MemoryEntry> MemoryRepository::snapshot() const {
    std::shared_lock lock(mutex_);
    return entries_;
}

}  // namespace msynth
