#include "autoforge/llm/gateway.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "autoforge/domain/errors.hpp"

namespace autoforge::llm {

void UsageLedger::record(const std::string& model, BackendKind kind, bool decision_maker,
                         const TokenUsage& usage) {
    std::lock_guard<std::mutex> lock(mutex_);
    Tally delta{1, usage.prompt_tokens, usage.completion_tokens};
    per_backend_[model] += delta;
    kinds_[model] = kind;
    if (decision_maker)
        decision_ += delta;
    else
        implementer_ += delta;
}

std::map<std::string, UsageLedger::Tally> UsageLedger::per_backend() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return per_backend_;
}

UsageLedger::Tally UsageLedger::decision_maker_total() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return decision_;
}

UsageLedger::Tally UsageLedger::implementer_total() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return implementer_;
}

BackendKind UsageLedger::kind_of(const std::string& model) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = kinds_.find(model);
    if (it == kinds_.end()) throw LedgerError("ledger has no record of model '" + model + "'");
    return it->second;
}

CostSummary ledger_report(const UsageLedger& ledger, const PriceTable& prices) {
    CostSummary summary;
    summary.decision_maker = ledger.decision_maker_total();
    summary.implementer = ledger.implementer_total();
    for (const auto& [model, tally] : ledger.per_backend()) {
        CostSummary::ModelLine line;
        line.model = model;
        line.tally = tally;
        if (ledger.kind_of(model) == BackendKind::scripted) {
            line.cost = 0.0;
        } else {
            auto it = prices.find(model);
            if (it == prices.end())
                throw LedgerError("no price entry for remote model '" + model + "'");
            line.cost = tally.prompt_tokens / 1000.0 * it->second.prompt_per_1k +
                        tally.completion_tokens / 1000.0 * it->second.completion_per_1k;
        }
        summary.total_cost += line.cost;
        summary.models.push_back(std::move(line));
    }
    return summary;
}

std::string render_cost_summary(const CostSummary& summary) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "usage by backend:\n";
    for (const auto& line : summary.models) {
        out << "  " << line.model << ": " << line.tally.requests << " requests, "
            << line.tally.prompt_tokens << " prompt + " << line.tally.completion_tokens
            << " completion tokens, cost " << line.cost << "\n";
    }
    const auto role_line = [&out](const char* label, const UsageLedger::Tally& t) {
        out << "  " << label << ": " << t.requests << " requests, " << t.prompt_tokens
            << " prompt + " << t.completion_tokens << " completion tokens\n";
    };
    out << "usage by role:\n";
    role_line("decision-makers", summary.decision_maker);
    role_line("implementers", summary.implementer);
    out << "total cost: " << summary.total_cost << "\n";
    return out.str();
}

Gateway::Gateway(std::unique_ptr<Backend> decision, std::unique_ptr<Backend> implementer,
                 int max_inflight_per_backend)
    : decision_(std::move(decision)),
      implementer_(std::move(implementer)),
      decision_slots_(max_inflight_per_backend),
      implementer_slots_(max_inflight_per_backend) {
    if (!decision_ || !implementer_) throw ConfigError("gateway requires both backends");
    if (max_inflight_per_backend < 1)
        throw ConfigError("max_inflight_per_backend must be at least 1");
}

Completion Gateway::complete(const CallContext& ctx, const std::vector<ChatMessage>& messages,
                             CompletionLimits limits) {
    if (messages.empty() || messages.front().role != MessageRole::system)
        throw DomainError("completion request must start with a system message (stage '" +
                          ctx.stage + "')");
    for (std::size_t i = 1; i < messages.size(); ++i)
        if (messages[i].role == MessageRole::system)
            throw DomainError("completion request has more than one system message (stage '" +
                              ctx.stage + "')");

    const bool decision = is_decision_maker(ctx.agent);
    if (!limits.temperature.has_value())
        limits.temperature = decision ? kDecisionTemperature : kImplementerTemperature;

    Backend& backend = decision ? *decision_ : *implementer_;
    util::Semaphore& slots = decision ? decision_slots_ : implementer_slots_;

    Completion out;
    {
        util::SemaphoreGuard guard(slots);
        out = backend.complete(messages, limits, ctx);
    }
    ledger_.record(backend.ref().model_name, backend.ref().kind, decision, out.usage);
    return out;
}

bool Gateway::all_scripted() const {
    return decision_->ref().kind == BackendKind::scripted &&
           implementer_->ref().kind == BackendKind::scripted;
}

}  // namespace autoforge::llm
