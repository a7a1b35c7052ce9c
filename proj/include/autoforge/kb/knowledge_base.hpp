#pragma once

#include <memory>
#include <string>
#include <vector>

namespace autoforge::kb {

struct KnowledgeEntry {
    int id = 0;
    std::string task_text;      // example input description
    std::string response_text;  // verified example output (plan or code)
    std::vector<std::string> tags;
    bool verified = false;  // set at index-build time
    std::vector<double> embedding;
};

// Text embedder. The shipped implementation is a deterministic token-hash
// bag-of-words projection so the full suite runs offline; swapping in a
// remote embedding endpoint only requires another implementation of this
// interface.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) const = 0;
    virtual int dimension() const = 0;
    virtual std::string identity() const = 0;
};

// Lowercased alphanumeric tokens hashed into `dimension` buckets, counted,
// then L2-normalized. Identical text always embeds identically.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(int dimension = 256);

    std::vector<double> embed(const std::string& text) const override;
    int dimension() const override { return dimension_; }
    std::string identity() const override;

private:
    int dimension_;
};

struct KnowledgeIndex {
    int dimension = 0;
    std::string embedder_identity;
    std::vector<KnowledgeEntry> entries;  // embeddings unit-normalized
};

struct RetrievalHit {
    KnowledgeEntry entry;
    double score = 0.0;  // cosine similarity in [-1, 1]
};

// Entries file: one JSON object per line (id, task_text, response_text,
// tags). Embeddings are computed at build time.
std::vector<KnowledgeEntry> load_entries(const std::string& path);

KnowledgeIndex build_index(const std::string& entries_path, const Embedder& embedder);

void save_index(const KnowledgeIndex& index, const std::string& path);
KnowledgeIndex load_index(const std::string& path);

// Exact-scan top-k by cosine similarity (dot product on unit vectors).
// Results sorted by descending score, ties broken by ascending entry id.
// k = 0 or an empty index returns empty; k beyond the index size returns all.
std::vector<RetrievalHit> retrieve(const KnowledgeIndex& index, const std::string& query,
                                   const Embedder& embedder, int k);

// Same scan against a caller-supplied query vector (must match the index
// dimension). `retrieve` delegates here after embedding the query.
std::vector<RetrievalHit> retrieve_vector(const KnowledgeIndex& index,
                                          const std::vector<double>& query, int k);

// Deterministic prompt block for the hits, in score order; empty hits
// render as the empty string (the prompt is unchanged).
std::string format_hits(const std::vector<RetrievalHit>& hits);

std::vector<double> unit_normalize(std::vector<double> vec);

}  // namespace autoforge::kb
