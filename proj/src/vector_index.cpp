#include "tttnn/vector_index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "tttnn/errors.hpp"
#include "tttnn/io_util.hpp"
#include "tttnn/kernels.hpp"

namespace tttnn {

void FlatIndex::add(const DocumentRef& ref, const Embedding& e) {
    if (frozen_) {
        throw std::logic_error("add() on a frozen index");
    }
    if (e.dim() != dim_) {
        throw DimensionMismatch("embedding dim " + std::to_string(e.dim()) +
                                " != index dim " + std::to_string(dim_));
    }
    refs_.push_back(ref);
    values_.insert(values_.end(), e.values.begin(), e.values.end());
}

Embedding FlatIndex::embedding_at(std::size_t i) const {
    Embedding e;
    e.values.assign(values_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
                    values_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_));
    return e;
}

std::vector<NeighborHit> FlatIndex::search(const Embedding& q, std::size_t k) const {
    if (q.dim() != dim_) {
        throw DimensionMismatch("query dim " + std::to_string(q.dim()) +
                                " != index dim " + std::to_string(dim_));
    }
    std::size_t count = refs_.size();
    std::size_t take = std::min(k, count);
    if (take == 0) {
        return {};
    }

    std::vector<double> dist(count);
    kernels::l2sq_many(values_.data(), count, dim_, q.values.data(), dist.data());

    std::vector<NeighborHit> hits(count);
    for (std::size_t i = 0; i < count; ++i) {
        hits[i] = NeighborHit{refs_[i], dist[i], {}};
    }
    std::nth_element(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take - 1),
                     hits.end());
    hits.resize(take);
    std::sort(hits.begin(), hits.end());
    return hits;
}

std::vector<NeighborHit> brute_force_search(
    const std::vector<std::pair<DocumentRef, Embedding>>& entries,
    const Embedding& q, std::size_t k) {
    std::vector<NeighborHit> hits;
    hits.reserve(entries.size());
    for (const auto& [ref, e] : entries) {
        hits.push_back(NeighborHit{ref, squared_l2(e, q), {}});
    }
    std::sort(hits.begin(), hits.end());
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

void FlatIndex::save(const std::string& path) const {
    std::string out;
    out.reserve(24 + refs_.size() * (10 + 8 * dim_));
    out.append(kMagic, 8);
    io::put_u64le(out, dim_);
    io::put_u64le(out, refs_.size());
    for (std::size_t i = 0; i < refs_.size(); ++i) {
        io::put_u16le(out, refs_[i].shard_id);
        io::put_u64le(out, refs_[i].line_number);
        for (std::size_t d = 0; d < dim_; ++d) {
            io::put_f64le(out, values_[i * dim_ + d]);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw IndexBuildError("cannot write vector index: " + path);
    }
}

FlatIndex FlatIndex::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IndexBuildError("cannot open vector index: " + path);
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IndexBuildError("vector index: bad magic or truncated header: " + path);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::uint64_t dim = io::get_u64le(p + 8);
    std::uint64_t count = io::get_u64le(p + 16);
    std::size_t record = 10 + 8 * static_cast<std::size_t>(dim);
    if (bytes.size() != 24 + record * count) {
        throw IndexBuildError("vector index: size does not match header: " + path);
    }

    FlatIndex idx(dim);
    idx.refs_.resize(count);
    idx.values_.resize(count * dim);
    const unsigned char* rec = p + 24;
    for (std::uint64_t i = 0; i < count; ++i, rec += record) {
        idx.refs_[i].shard_id = io::get_u16le(rec);
        idx.refs_[i].line_number = io::get_u64le(rec + 2);
        for (std::uint64_t d = 0; d < dim; ++d) {
            idx.values_[i * dim + d] = io::get_f64le(rec + 10 + 8 * d);
        }
    }
    idx.freeze();
    return idx;
}

}  // namespace tttnn
