#include "autoforge/domain/tree.hpp"

#include "autoforge/domain/errors.hpp"

namespace autoforge {

DecompositionTree::DecompositionTree(ProjectRequirement root) : root_(std::move(root)) {
    validate(root_);
}

int DecompositionTree::add_module(ModuleThought module) {
    const int index = static_cast<int>(modules_.size());
    if (module.index != index)
        throw DomainError("module '" + module.hyper.module_name +
                          "' breaks sibling-index contiguity: expected " +
                          std::to_string(index) + ", got " + std::to_string(module.index));
    if (module.parent_project != root_.id)
        throw DomainError("module '" + module.hyper.module_name +
                          "' names a different parent project");
    modules_.push_back(std::move(module));
    functions_.emplace_back();
    signatures_.emplace_back();
    has_signature_.emplace_back();
    return index;
}

int DecompositionTree::add_function(int module_index, FunctionThought function) {
    if (module_index < 0 || module_index >= static_cast<int>(modules_.size()))
        throw AddressingError("no module at index " + std::to_string(module_index));
    auto& funcs = functions_[static_cast<std::size_t>(module_index)];
    const TreeAddress expected_parent{module_index};
    if (function.parent != expected_parent)
        throw DomainError("function '" + function.name + "' carries parent address " +
                          format_address(function.parent) + ", expected " +
                          format_address(expected_parent));
    const int index = static_cast<int>(funcs.size());
    funcs.push_back(std::move(function));
    signatures_[static_cast<std::size_t>(module_index)].emplace_back();
    has_signature_[static_cast<std::size_t>(module_index)].push_back(false);
    return index;
}

void DecompositionTree::set_signature(const TreeAddress& addr, FunctionSignature sig) {
    if (addr.size() != 2 || !contains(addr))
        throw AddressingError("no function at " + format_address(addr));
    signatures_[static_cast<std::size_t>(addr[0])][static_cast<std::size_t>(addr[1])] =
        std::move(sig);
    has_signature_[static_cast<std::size_t>(addr[0])][static_cast<std::size_t>(addr[1])] = true;
}

std::size_t DecompositionTree::function_count(int module_index) const {
    if (module_index < 0 || module_index >= static_cast<int>(functions_.size()))
        throw AddressingError("no module at index " + std::to_string(module_index));
    return functions_[static_cast<std::size_t>(module_index)].size();
}

std::size_t DecompositionTree::total_function_count() const {
    std::size_t total = 0;
    for (const auto& funcs : functions_) total += funcs.size();
    return total;
}

const ModuleThought& DecompositionTree::module_at(int module_index) const {
    if (module_index < 0 || module_index >= static_cast<int>(modules_.size()))
        throw AddressingError("no module at index " + std::to_string(module_index));
    return modules_[static_cast<std::size_t>(module_index)];
}

const FunctionThought& DecompositionTree::function_at(const TreeAddress& addr) const {
    if (addr.size() != 2 || !contains(addr))
        throw AddressingError("no function at " + format_address(addr));
    return functions_[static_cast<std::size_t>(addr[0])][static_cast<std::size_t>(addr[1])];
}

const FunctionSignature& DecompositionTree::signature_at(const TreeAddress& addr) const {
    if (!has_signature(addr))
        throw AddressingError("no signature at " + format_address(addr));
    return signatures_[static_cast<std::size_t>(addr[0])][static_cast<std::size_t>(addr[1])];
}

bool DecompositionTree::has_signature(const TreeAddress& addr) const {
    if (addr.size() != 2 || !contains(addr)) return false;
    return has_signature_[static_cast<std::size_t>(addr[0])][static_cast<std::size_t>(addr[1])];
}

const std::vector<FunctionThought>& DecompositionTree::functions(int module_index) const {
    if (module_index < 0 || module_index >= static_cast<int>(functions_.size()))
        throw AddressingError("no module at index " + std::to_string(module_index));
    return functions_[static_cast<std::size_t>(module_index)];
}

bool DecompositionTree::contains(const TreeAddress& addr) const {
    if (addr.empty()) return true;
    if (addr[0] < 0 || addr[0] >= static_cast<int>(modules_.size())) return false;
    if (addr.size() == 1) return true;
    if (addr.size() != 2) return false;
    const auto& funcs = functions_[static_cast<std::size_t>(addr[0])];
    return addr[1] >= 0 && addr[1] < static_cast<int>(funcs.size());
}

TreeAddress tree_address(const DecompositionTree&) { return {}; }

TreeAddress tree_address(const DecompositionTree& tree, const ModuleThought& module) {
    if (module.index >= 0 && module.index < static_cast<int>(tree.module_count())) {
        const ModuleThought& registered = tree.module_at(module.index);
        if (registered.hyper == module.hyper && registered.parent_project == module.parent_project)
            return {module.index};
    }
    throw AddressingError("module '" + module.hyper.module_name +
                          "' is not registered in this tree");
}

TreeAddress tree_address(const DecompositionTree& tree, const FunctionThought& function) {
    if (function.parent.size() == 1 && tree.contains(function.parent)) {
        const auto& funcs = tree.functions(function.parent[0]);
        for (std::size_t j = 0; j < funcs.size(); ++j) {
            if (funcs[j].name == function.name) return {function.parent[0], static_cast<int>(j)};
        }
    }
    throw AddressingError("function '" + function.name + "' is not registered in this tree");
}

}  // namespace autoforge
