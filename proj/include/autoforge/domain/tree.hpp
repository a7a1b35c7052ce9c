#pragma once

#include <cstddef>
#include <vector>

#include "autoforge/domain/types.hpp"

namespace autoforge {

// The decomposition tree built during the forward task flow. Nodes are value
// snapshots; once added they are never removed, and addresses stay stable for
// the lifetime of the run.
class DecompositionTree {
public:
    explicit DecompositionTree(ProjectRequirement root);

    const ProjectRequirement& root() const { return root_; }

    // Enforces sibling-index contiguity; returns the module index.
    int add_module(ModuleThought module);

    // Returns the new function's index within the module.
    int add_function(int module_index, FunctionThought function);

    void set_signature(const TreeAddress& function_addr, FunctionSignature sig);

    std::size_t module_count() const { return modules_.size(); }
    std::size_t function_count(int module_index) const;
    std::size_t total_function_count() const;

    const ModuleThought& module_at(int module_index) const;
    const FunctionThought& function_at(const TreeAddress& addr) const;
    const FunctionSignature& signature_at(const TreeAddress& addr) const;
    bool has_signature(const TreeAddress& addr) const;

    const std::vector<ModuleThought>& modules() const { return modules_; }
    const std::vector<FunctionThought>& functions(int module_index) const;

    bool contains(const TreeAddress& addr) const;

private:
    ProjectRequirement root_;
    std::vector<ModuleThought> modules_;
    std::vector<std::vector<FunctionThought>> functions_;
    std::vector<std::vector<FunctionSignature>> signatures_;
    std::vector<std::vector<bool>> has_signature_;
};

// Address of a node registered in `tree`. The root has the empty path; a
// detached or unregistered node raises AddressingError.
TreeAddress tree_address(const DecompositionTree& tree);  // root
TreeAddress tree_address(const DecompositionTree& tree, const ModuleThought& module);
TreeAddress tree_address(const DecompositionTree& tree, const FunctionThought& function);

}  // namespace autoforge
