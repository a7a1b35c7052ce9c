#include "autoforge/pool/thought_pool.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "autoforge/domain/errors.hpp"

namespace autoforge::pool {

using ordered_json = nlohmann::ordered_json;

std::string to_string(ThoughtKind kind) {
    switch (kind) {
        case ThoughtKind::requirement: return "requirement";
        case ThoughtKind::module_plan: return "module_plan";
        case ThoughtKind::function_thought: return "function_thought";
        case ThoughtKind::signature: return "signature";
        case ThoughtKind::function_code: return "function_code";
        case ThoughtKind::test_code: return "test_code";
        case ThoughtKind::module_code: return "module_code";
        case ThoughtKind::project_code: return "project_code";
        case ThoughtKind::error_report: return "error_report";
        case ThoughtKind::note: return "note";
    }
    return "note";
}

ThoughtKind thought_kind_from_string(const std::string& s) {
    for (ThoughtKind kind :
         {ThoughtKind::requirement, ThoughtKind::module_plan, ThoughtKind::function_thought,
          ThoughtKind::signature, ThoughtKind::function_code, ThoughtKind::test_code,
          ThoughtKind::module_code, ThoughtKind::project_code, ThoughtKind::error_report,
          ThoughtKind::note}) {
        if (to_string(kind) == s) return kind;
    }
    throw PoolError("unknown thought kind '" + s + "'");
}

namespace {

llm::AgentRole agent_role_from_string(const std::string& s) {
    for (llm::AgentRole role :
         {llm::AgentRole::team_leader, llm::AgentRole::module_leader,
          llm::AgentRole::function_coordinator, llm::AgentRole::coder, llm::AgentRole::tester}) {
        if (llm::to_string(role) == s) return role;
    }
    throw PoolError("unknown agent role '" + s + "'");
}

long wall_clock_seconds() {
    return static_cast<long>(std::chrono::duration_cast<std::chrono::seconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count());
}

}  // namespace

std::string serialize_record(const ThoughtRecord& record) {
    ordered_json j;
    j["id"] = record.id;
    j["author"] = llm::to_string(record.author);
    j["stage"] = record.stage;
    j["address"] = format_address(record.address);
    j["kind"] = to_string(record.kind);
    j["created_at"] = record.created_at;
    j["payload"] = record.payload;
    return j.dump();
}

ThoughtRecord parse_record(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw PoolError("journal line is not valid JSON: " + std::string(e.what()));
    }
    ThoughtRecord record;
    try {
        record.id = j.at("id").get<long>();
        record.author = agent_role_from_string(j.at("author").get<std::string>());
        record.stage = j.at("stage").get<std::string>();
        record.address = parse_address(j.at("address").get<std::string>());
        record.kind = thought_kind_from_string(j.at("kind").get<std::string>());
        record.created_at = j.at("created_at").get<long>();
        record.payload = j.at("payload").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw PoolError("journal line is missing a field: " + std::string(e.what()));
    }
    return record;
}

ThoughtPool::ThoughtPool() : clock_(wall_clock_seconds) {
    addresses_.insert(TreeAddress{});  // the root requirement is always addressable
}

ThoughtPool::ThoughtPool(ThoughtPool&& other) noexcept {
    std::lock_guard<std::mutex> lock(other.mutex_);
    records_ = std::move(other.records_);
    addresses_ = std::move(other.addresses_);
    clock_ = std::move(other.clock_);
    journal_path_ = std::move(other.journal_path_);
}

void ThoughtPool::register_address(const TreeAddress& address) {
    std::lock_guard<std::mutex> lock(mutex_);
    addresses_.insert(address);
}

bool ThoughtPool::is_registered(const TreeAddress& address) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return addresses_.count(address) > 0;
}

long ThoughtPool::append(llm::AgentRole author, const std::string& stage,
                         const TreeAddress& address, ThoughtKind kind,
                         const std::string& payload) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!addresses_.count(address))
        throw PoolError("append at unregistered address " + format_address(address));
    ThoughtRecord record;
    record.id = static_cast<long>(records_.size());
    record.author = author;
    record.stage = stage;
    record.address = address;
    record.kind = kind;
    record.payload = payload;
    record.created_at = clock_();
    records_.push_back(record);
    if (!journal_path_.empty()) write_record_locked(record);
    return record.id;
}

std::optional<ThoughtRecord> ThoughtPool::latest(const TreeAddress& address,
                                                 ThoughtKind kind) const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it)
        if (it->address == address && it->kind == kind) return *it;
    return std::nullopt;
}

std::vector<ThoughtRecord> ThoughtPool::lineage(const TreeAddress& address) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!addresses_.count(address))
        throw PoolError("lineage of unregistered address " + format_address(address));
    std::vector<ThoughtRecord> out;
    for (std::size_t depth = 0; depth <= address.size(); ++depth) {
        const TreeAddress prefix(address.begin(), address.begin() + depth);
        for (const ThoughtRecord& record : records_)
            if (record.address == prefix) out.push_back(record);
    }
    return out;
}

std::size_t ThoughtPool::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
}

std::vector<ThoughtRecord> ThoughtPool::all() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_;
}

void ThoughtPool::set_clock(std::function<long()> clock) {
    std::lock_guard<std::mutex> lock(mutex_);
    clock_ = std::move(clock);
}

void ThoughtPool::attach_journal(const std::string& path) {
    std::lock_guard<std::mutex> lock(mutex_);
    journal_path_ = path;
    std::ofstream out(journal_path_, std::ios::binary | std::ios::trunc);
    if (!out) throw PoolError("cannot open journal file for writing: " + path);
    out.close();
    for (const ThoughtRecord& record : records_) write_record_locked(record);
}

void ThoughtPool::write_record_locked(const ThoughtRecord& record) {
    std::ofstream out(journal_path_, std::ios::binary | std::ios::app);
    if (!out) throw PoolError("cannot append to journal file: " + journal_path_);
    out << serialize_record(record) << '\n';
    out.flush();
}

ThoughtPool ThoughtPool::load_journal(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PoolError("cannot read journal file: " + path);
    ThoughtPool pool;
    std::string line;
    long expected_id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ThoughtRecord record = parse_record(line);
        if (record.id != expected_id)
            throw PoolError("journal ids are not contiguous at id " +
                            std::to_string(record.id));
        ++expected_id;
        // Register the record's address and every prefix so lineage answers
        // match the original pool.
        for (std::size_t depth = 0; depth <= record.address.size(); ++depth)
            pool.addresses_.insert(
                TreeAddress(record.address.begin(), record.address.begin() + depth));
        pool.records_.push_back(std::move(record));
    }
    return pool;
}

}  // namespace autoforge::pool
