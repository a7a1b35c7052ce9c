#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "autoforge/domain/types.hpp"
#include "autoforge/llm/message.hpp"

namespace autoforge::pool {

enum class ThoughtKind {
    requirement,
    module_plan,
    function_thought,
    signature,
    function_code,
    test_code,
    module_code,
    project_code,
    error_report,
    note,
};

std::string to_string(ThoughtKind kind);
ThoughtKind thought_kind_from_string(const std::string& s);

struct ThoughtRecord {
    long id = 0;  // strictly increasing in append order
    llm::AgentRole author = llm::AgentRole::team_leader;
    std::string stage;
    TreeAddress address;
    ThoughtKind kind = ThoughtKind::note;
    std::string payload;
    long created_at = 0;
};

// Append-only store of every intermediate thought. All inter-agent
// information flow goes through here: records are immutable, ids are a
// total order across branches, and the latest record of a (address, kind)
// pair is the backtracking answer.
class ThoughtPool {
public:
    ThoughtPool();
    ThoughtPool(ThoughtPool&& other) noexcept;
    ThoughtPool& operator=(ThoughtPool&&) = delete;

    // Addresses must be registered (root is always registered) before
    // records can be appended at them.
    void register_address(const TreeAddress& address);
    bool is_registered(const TreeAddress& address) const;

    long append(llm::AgentRole author, const std::string& stage, const TreeAddress& address,
                ThoughtKind kind, const std::string& payload);

    std::optional<ThoughtRecord> latest(const TreeAddress& address, ThoughtKind kind) const;

    // Records from the root requirement down to the node, ordered by tree
    // depth then id. Used to build decision-maker context.
    std::vector<ThoughtRecord> lineage(const TreeAddress& address) const;

    std::size_t size() const;
    std::vector<ThoughtRecord> all() const;

    // Timestamps come from this clock; pipelines running fully scripted
    // install a logical counter for byte-reproducible journals.
    void set_clock(std::function<long()> clock);

    // Every subsequent append is also written (flushed) to this journal
    // file; existing records are written out first.
    void attach_journal(const std::string& path);

    // Rebuilds a pool (records and registered addresses) from a journal.
    static ThoughtPool load_journal(const std::string& path);

private:
    void write_record_locked(const ThoughtRecord& record);

    mutable std::mutex mutex_;
    std::vector<ThoughtRecord> records_;
    std::set<TreeAddress> addresses_;
    std::function<long()> clock_;
    std::string journal_path_;
};

std::string serialize_record(const ThoughtRecord& record);
ThoughtRecord parse_record(const std::string& line);

}  // namespace autoforge::pool
