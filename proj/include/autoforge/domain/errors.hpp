#pragma once

#include <stdexcept>
#include <string>

namespace autoforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or incomplete configuration, detected before any work starts.
struct ConfigError : Error {
    using Error::Error;
};

// A domain invariant was violated (bad requirement, bad identifier, ...).
struct DomainError : Error {
    using Error::Error;
};

// A node could not be addressed within the decomposition tree.
struct AddressingError : DomainError {
    using DomainError::DomainError;
};

// Structured agent output failed the grammar.
struct GrammarError : Error {
    using Error::Error;
};

// Forward task flow could not produce a usable decomposition.
struct DecompositionError : Error {
    using Error::Error;
};

// An implementer response could not be turned into a code artifact.
struct DraftError : Error {
    using Error::Error;
};

struct AssemblyError : Error {
    using Error::Error;
};

// Recoverable network-level failure talking to a remote model endpoint.
struct TransportError : Error {
    using Error::Error;
};

// The backend reported running out of context/output tokens.
struct TokenOverflowError : Error {
    using Error::Error;
};

// A scripted backend ran out of fixture responses for a queue.
struct FixtureExhaustedError : Error {
    using Error::Error;
};

struct PoolError : Error {
    using Error::Error;
};

struct KnowledgeBaseError : Error {
    using Error::Error;
};

// The execution backend itself is unusable (missing runtime, bad mapping).
// Distinct from a script that ran and failed.
struct SandboxEnvironmentError : Error {
    using Error::Error;
};

struct LedgerError : Error {
    using Error::Error;
};

// A benchmark fixture is invalid (missing component, sample solution broken).
struct BenchFixtureError : Error {
    using Error::Error;
};

// Outputs could not be compared (unreadable file, undecodable image).
struct ComparisonError : Error {
    using Error::Error;
};

}  // namespace autoforge
