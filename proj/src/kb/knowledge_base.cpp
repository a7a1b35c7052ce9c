#include "autoforge/kb/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "autoforge/domain/errors.hpp"
#include "autoforge/util/hash.hpp"

namespace autoforge::kb {

using ordered_json = nlohmann::ordered_json;

std::vector<double> unit_normalize(std::vector<double> vec) {
    double norm_sq = 0.0;
    for (double v : vec) norm_sq += v * v;
    if (norm_sq <= 0.0) return vec;  // zero vector stays zero
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : vec) v *= inv;
    return vec;
}

HashingEmbedder::HashingEmbedder(int dimension) : dimension_(dimension) {
    if (dimension < 1) throw KnowledgeBaseError("embedder dimension must be positive");
}

std::vector<double> HashingEmbedder::embed(const std::string& text) const {
    std::vector<double> vec(static_cast<std::size_t>(dimension_), 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const std::uint64_t bucket = util::fnv1a64(token) % static_cast<std::uint64_t>(dimension_);
        vec[static_cast<std::size_t>(bucket)] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else
            flush();
    }
    flush();
    return unit_normalize(std::move(vec));
}

std::string HashingEmbedder::identity() const {
    return "hashing-bow-v1:dim=" + std::to_string(dimension_);
}

std::vector<KnowledgeEntry> load_entries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw KnowledgeBaseError("cannot read entries file: " + path);
    std::vector<KnowledgeEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw KnowledgeBaseError("entries file line " + std::to_string(line_no) +
                                     " is not valid JSON: " + std::string(e.what()));
        }
        KnowledgeEntry entry;
        try {
            entry.id = j.at("id").get<int>();
            entry.task_text = j.at("task_text").get<std::string>();
            entry.response_text = j.at("response_text").get<std::string>();
            if (j.contains("tags")) entry.tags = j["tags"].get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw KnowledgeBaseError("entries file line " + std::to_string(line_no) +
                                     " is missing a field: " + std::string(e.what()));
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

KnowledgeIndex build_index(const std::string& entries_path, const Embedder& embedder) {
    KnowledgeIndex index;
    index.dimension = embedder.dimension();
    index.embedder_identity = embedder.identity();
    for (KnowledgeEntry& entry : load_entries(entries_path)) {
        if (entry.task_text.empty())
            throw KnowledgeBaseError("entry " + std::to_string(entry.id) +
                                     " has an empty task_text");
        if (entry.response_text.empty())
            throw KnowledgeBaseError("entry " + std::to_string(entry.id) +
                                     " has an empty response_text");
        entry.embedding = unit_normalize(embedder.embed(entry.task_text));
        entry.verified = true;  // entries ship human-reviewed; flag set at build
        index.entries.push_back(std::move(entry));
    }
    return index;
}

void save_index(const KnowledgeIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw KnowledgeBaseError("cannot write index file: " + path);
    ordered_json header;
    header["dimension"] = index.dimension;
    header["embedder"] = index.embedder_identity;
    out << header.dump() << '\n';
    for (const KnowledgeEntry& entry : index.entries) {
        ordered_json j;
        j["id"] = entry.id;
        j["task_text"] = entry.task_text;
        j["response_text"] = entry.response_text;
        j["tags"] = entry.tags;
        j["verified"] = entry.verified;
        j["embedding"] = entry.embedding;
        out << j.dump() << '\n';
    }
}

KnowledgeIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw KnowledgeBaseError("cannot read index file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw KnowledgeBaseError("index file has no header: " + path);
    KnowledgeIndex index;
    try {
        ordered_json header = ordered_json::parse(line);
        index.dimension = header.at("dimension").get<int>();
        index.embedder_identity = header.at("embedder").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw KnowledgeBaseError("index header is malformed: " + std::string(e.what()));
    }
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ordered_json j = ordered_json::parse(line);
            KnowledgeEntry entry;
            entry.id = j.at("id").get<int>();
            entry.task_text = j.at("task_text").get<std::string>();
            entry.response_text = j.at("response_text").get<std::string>();
            entry.tags = j.at("tags").get<std::vector<std::string>>();
            entry.verified = j.at("verified").get<bool>();
            entry.embedding = j.at("embedding").get<std::vector<double>>();
            if (static_cast<int>(entry.embedding.size()) != index.dimension)
                throw KnowledgeBaseError("entry " + std::to_string(entry.id) +
                                         " embedding dimension mismatch");
            index.entries.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& e) {
            throw KnowledgeBaseError("index file line " + std::to_string(line_no) +
                                     " is malformed: " + std::string(e.what()));
        }
    }
    return index;
}

std::vector<RetrievalHit> retrieve_vector(const KnowledgeIndex& index,
                                          const std::vector<double>& query, int k) {
    if (k < 0) throw KnowledgeBaseError("retrieval k must be non-negative");
    if (k == 0 || index.entries.empty()) return {};
    if (static_cast<int>(query.size()) != index.dimension)
        throw KnowledgeBaseError("query vector dimension " + std::to_string(query.size()) +
                                 " does not match index dimension " +
                                 std::to_string(index.dimension));
    std::vector<RetrievalHit> hits;
    hits.reserve(index.entries.size());
    for (const KnowledgeEntry& entry : index.entries) {
        double dot = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i) dot += query[i] * entry.embedding[i];
        hits.push_back({entry, dot});
    }
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry.id < b.entry.id;
    });
    if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<std::size_t>(k));
    return hits;
}

std::vector<RetrievalHit> retrieve(const KnowledgeIndex& index, const std::string& query,
                                   const Embedder& embedder, int k) {
    if (embedder.identity() != index.embedder_identity)
        throw KnowledgeBaseError("index was built with embedder '" + index.embedder_identity +
                                 "', not '" + embedder.identity() + "'");
    return retrieve_vector(index, unit_normalize(embedder.embed(query)), k);
}

std::string format_hits(const std::vector<RetrievalHit>& hits) {
    if (hits.empty()) return "";
    std::string out = "Relevant worked examples from the knowledge base:\n";
    for (std::size_t i = 0; i < hits.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + ":\n";
        out += "Task: " + hits[i].entry.task_text + "\n";
        out += "Response:\n" + hits[i].entry.response_text + "\n";
    }
    return out;
}

}  // namespace autoforge::kb
