#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "autoforge/llm/backend.hpp"
#include "autoforge/llm/message.hpp"
#include "autoforge/util/semaphore.hpp"

namespace autoforge::llm {

// Token/cost accounting for a run. Tallies are monotone non-decreasing; the
// per-role split always sums to the per-backend totals.
class UsageLedger {
public:
    struct Tally {
        long requests = 0;
        long prompt_tokens = 0;
        long completion_tokens = 0;

        Tally& operator+=(const Tally& other) {
            requests += other.requests;
            prompt_tokens += other.prompt_tokens;
            completion_tokens += other.completion_tokens;
            return *this;
        }
    };

    void record(const std::string& model, BackendKind kind, bool decision_maker,
                const TokenUsage& usage);

    std::map<std::string, Tally> per_backend() const;
    Tally decision_maker_total() const;
    Tally implementer_total() const;
    BackendKind kind_of(const std::string& model) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Tally> per_backend_;
    std::map<std::string, BackendKind> kinds_;
    Tally decision_;
    Tally implementer_;
};

struct PriceEntry {
    double prompt_per_1k = 0.0;
    double completion_per_1k = 0.0;
};

// Per-model token prices. Scripted backends are always priced at zero and
// need no entry.
using PriceTable = std::map<std::string, PriceEntry>;

struct CostSummary {
    struct ModelLine {
        std::string model;
        UsageLedger::Tally tally;
        double cost = 0.0;
    };
    std::vector<ModelLine> models;  // sorted by model name
    UsageLedger::Tally decision_maker;
    UsageLedger::Tally implementer;
    double total_cost = 0.0;
};

// Throws LedgerError naming the model when a remote backend has no price.
CostSummary ledger_report(const UsageLedger& ledger, const PriceTable& prices);

std::string render_cost_summary(const CostSummary& summary);

// Routes completions to the decision-maker or implementer backend, applies
// role temperature defaults, enforces the per-backend in-flight cap, and
// records usage.
class Gateway {
public:
    static constexpr double kDecisionTemperature = 0.0;
    static constexpr double kImplementerTemperature = 0.2;

    Gateway(std::unique_ptr<Backend> decision, std::unique_ptr<Backend> implementer,
            int max_inflight_per_backend);

    // Precondition: messages start with exactly one system message.
    Completion complete(const CallContext& ctx, const std::vector<ChatMessage>& messages,
                        CompletionLimits limits = {});

    const UsageLedger& ledger() const { return ledger_; }

    bool all_scripted() const;

    Backend& decision_backend() { return *decision_; }
    Backend& implementer_backend() { return *implementer_; }

private:
    std::unique_ptr<Backend> decision_;
    std::unique_ptr<Backend> implementer_;
    util::Semaphore decision_slots_;
    util::Semaphore implementer_slots_;
    UsageLedger ledger_;
};

}  // namespace autoforge::llm
