#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tttnn {

// Synthetic desk-scale corpora: a handful of template "domains" whose
// documents come in families of near-duplicates, so retrieval tests know in
// advance which neighbors a query should find.

struct DomainSpec {
    std::string name;  // built-in generators: "code", "prose", "math"
    std::size_t n_docs = 0;
    // Documents per family of near-duplicates; 1 means every doc stands alone.
    std::size_t family_size = 1;
};

struct CorpusGenSpec {
    std::vector<DomainSpec> domains;
    // Fraction of documents replaced by exact copies of an earlier line.
    double dup_rate = 0.0;
    std::uint64_t seed = 0;
};

struct GeneratedDoc {
    std::string domain;
    std::uint64_t family = 0;
    std::uint64_t variant = 0;
    bool exact_duplicate = false;
    std::int64_t duplicate_of = -1;  // corpus line copied from, -1 if none
    std::string text;
};

// Deterministic for a given spec; documents are emitted domain by domain,
// family by family. Throws ConfigError for unknown domain names, zero
// family_size, or dup_rate outside [0, 1].
std::vector<GeneratedDoc> generate_corpus(const CorpusGenSpec& spec);

// corpus: one {"text": ...} JSON object per line. manifest: one record per
// line describing corpus line i (domain, family, variant, duplication).
void write_corpus_files(const std::vector<GeneratedDoc>& docs,
                        const std::string& corpus_path,
                        const std::string& manifest_path);

}  // namespace tttnn
