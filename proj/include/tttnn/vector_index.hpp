#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tttnn/corpus_store.hpp"
#include "tttnn/embedder.hpp"

namespace tttnn {

struct NeighborHit {
    DocumentRef ref;
    double distance = 0.0;  // squared L2
    std::string text;       // filled by the serving layer, empty inside the index

    // Total order making every result list deterministic.
    friend bool operator<(const NeighborHit& a, const NeighborHit& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.ref.shard_id != b.ref.shard_id) return a.ref.shard_id < b.ref.shard_id;
        return a.ref.line_number < b.ref.line_number;
    }
};

// Exact flat squared-L2 index. Append during the build phase, then freeze();
// a frozen index is immutable and safe for unrestricted concurrent searches.
// The distance scan runs on the OpenMP kernel; brute_force_search below is
// the serial reference with identical ordering semantics.
class FlatIndex {
public:
    explicit FlatIndex(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return refs_.size(); }
    bool frozen() const { return frozen_; }

    void add(const DocumentRef& ref, const Embedding& e);
    void freeze() { frozen_ = true; }

    // Exact top-k by (distance, shard_id, line_number), 64-bit accumulation.
    std::vector<NeighborHit> search(const Embedding& q, std::size_t k) const;

    const DocumentRef& ref_at(std::size_t i) const { return refs_[i]; }
    Embedding embedding_at(std::size_t i) const;

    // Persisted form: magic "TTTNNVEC", u64 dim, u64 count, then one packed
    // record per entry (u16 shard_id, u64 line_number, dim f64 values), all
    // little-endian.
    static constexpr char kMagic[9] = "TTTNNVEC";
    void save(const std::string& path) const;
    static FlatIndex load(const std::string& path);

private:
    std::size_t dim_;
    bool frozen_ = false;
    std::vector<DocumentRef> refs_;
    std::vector<double> values_;  // size() * dim_, row-major
};

// Serial full-scan reference for search; same ordering rule.
std::vector<NeighborHit> brute_force_search(
    const std::vector<std::pair<DocumentRef, Embedding>>& entries,
    const Embedding& q, std::size_t k);

}  // namespace tttnn
