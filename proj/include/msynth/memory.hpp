#pragma once

#include "msynth/linkage.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace msynth {

/// A validated design remembered for later prompts.
struct MemoryEntry {
    std::string mechanism_text;  // canonical DSL
    double chamfer = 0.0;
    std::optional<std::string> surrogate_text;
    std::string task_id;
    int iteration = 0;
    std::uint64_t created_at = 0;  // repository sequence number, assigned by store()
};

struct StoreOutcome {
    bool stored = false;
    std::string reason;  // why the entry was refused; empty when stored
};

std::string to_json_line(const MemoryEntry& entry);
MemoryEntry memory_entry_from_json(const std::string& line);

/// Thread-safe store of validated designs. Optionally mirrored to a JSONL file
/// that is appended on every store and reloaded on construction.
class MemoryRepository {
public:
    MemoryRepository() = default;
    explicit MemoryRepository(std::filesystem::path persistent_file);

    MemoryRepository(const MemoryRepository&) = delete;
    MemoryRepository& operator=(const MemoryRepository&) = delete;

    /// Refuses entries whose simulation failed, whose Chamfer distance is not
    /// a finite non-negative number, or whose text is empty.
    StoreOutcome store(MemoryEntry entry, const SimResult& simulation);

    /// The k lowest-Chamfer entries, ties broken by most recent first.
    std::vector<MemoryEntry> retrieve_topk(std::size_t k) const;

    /// Chamfer of an entry recorded for a different task, measured against the current target.
    using Rescorer = std::function<std::optional<double>(const MemoryEntry&)>;

    /// Top-k for `task_id`. Entries from other tasks are re-scored with
    /// `rescore` (dropped when it returns nullopt); without one they are skipped.
    std::vector<MemoryEntry> retrieve_topk(std::size_t k, const std::string& task_id,
                                           const Rescorer& rescore = {}) const;

    std::size_t size() const;
    std::vector<MemoryEntry> snapshot() const;

private:
    mutable std::shared_mutex mutex_;
    std::vector<MemoryEntry> entries_;
    std::uint64_t next_sequence_ = 1;
    std::optional<std::filesystem::path> file_;
};

}  // namespace msynth
