#include "tttnn/corpus_gen.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string_view>

#include "json.hpp"
#include "tttnn/errors.hpp"
#include "tttnn/rng.hpp"

namespace tttnn {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
    return a;
}

template <std::size_t N>
const char* pick(Rng& rng, const char* const (&pool)[N]) {
    return pool[rng.next_below(N)];
}

constexpr const char* kCodeTypes[] = {"int",  "long",   "double",
                                      "auto", "size_t", "float"};
constexpr const char* kCodeNames[] = {"count",  "total", "offset", "cursor",
                                      "buffer", "shard", "batch",  "index",
                                      "value",  "width"};
constexpr const char* kCodeFuncs[] = {"clamp", "merge", "scan",
                                      "fold",  "hash",  "pack"};

constexpr const char* kProseSubjects[] = {
    "The archive",      "A quiet librarian", "The survey team",
    "Our small engine", "The committee",     "A visiting scholar"};
constexpr const char* kProseVerbs[] = {"describes",  "collects", "rebuilds",
                                       "catalogues", "questions", "refines"};
constexpr const char* kProseObjects[] = {
    "a ledger of results",     "the missing index", "every tagged record",
    "its own footnotes",       "the borrowed manuscript",
    "a shelf of early drafts"};
constexpr const char* kProseTails[] = {
    "without much ceremony", "before the rain returns", "in the margins",
    "for the third time",    "despite the noise",       "with patient care"};

std::string make_code_text(Rng& rng, std::uint64_t family,
                           std::uint64_t variant) {
    std::string out = "// block " + std::to_string(family) + "." +
                      std::to_string(variant) + "\n";
    const std::size_t lines = 6 + rng.next_below(5);
    for (std::size_t i = 0; i < lines; ++i) {
        switch (rng.next_below(4)) {
            case 0:
                out += std::string(pick(rng, kCodeTypes)) + " " +
                       pick(rng, kCodeNames) + " = " +
                       std::to_string(1 + rng.next_below(97)) + ";\n";
                break;
            case 1:
                out += std::string("for (int i = 0; i < ") +
                       std::to_string(2 + rng.next_below(30)) + "; ++i) { " +
                       pick(rng, kCodeNames) + " += " + pick(rng, kCodeNames) +
                       "[i] * " + std::to_string(1 + rng.next_below(9)) +
                       "; }\n";
                break;
            case 2:
                out += std::string("if (") + pick(rng, kCodeNames) + " > " +
                       std::to_string(rng.next_below(64)) + ") { return " +
                       pick(rng, kCodeFuncs) + "(" + pick(rng, kCodeNames) +
                       ", " + pick(rng, kCodeNames) + "); }\n";
                break;
            default:
                out += std::string(pick(rng, kCodeTypes)) + " " +
                       pick(rng, kCodeNames) + " = " + pick(rng, kCodeFuncs) +
                       "(" + pick(rng, kCodeNames) + ", " +
                       std::to_string(rng.next_below(12)) + ");\n";
                break;
        }
    }
    return out;
}

std::string make_prose_text(Rng& rng, std::uint64_t family,
                            std::uint64_t variant) {
    std::string out = "Entry " + std::to_string(family) + ", draft " +
                      std::to_string(variant) + ".";
    const std::size_t sentences = 4 + rng.next_below(4);
    for (std::size_t i = 0; i < sentences; ++i) {
        out += std::string(" ") + pick(rng, kProseSubjects) + " " +
               pick(rng, kProseVerbs) + " " + pick(rng, kProseObjects) + " " +
               pick(rng, kProseTails) + ".";
    }
    return out;
}

std::string make_math_text(Rng& rng, std::uint64_t family,
                           std::uint64_t variant) {
    std::string out = "exercise " + std::to_string(family) + "." +
                      std::to_string(variant) + ":";
    const std::size_t lines = 4 + rng.next_below(4);
    for (std::size_t i = 0; i < lines; ++i) {
        switch (rng.next_below(3)) {
            case 0: {
                const std::uint64_t a = 2 + rng.next_below(30);
                const std::uint64_t b = 2 + rng.next_below(30);
                const std::uint64_t c = rng.next_below(10);
                out += " let a = " + std::to_string(a) + " and b = " +
                       std::to_string(b) + "; then a * b + " +
                       std::to_string(c) + " = " + std::to_string(a * b + c) +
                       ".";
                break;
            }
            case 1: {
                const std::uint64_t n = 3 + rng.next_below(20);
                out += " the sum of integers from 1 to " + std::to_string(n) +
                       " is " + std::to_string(n * (n + 1) / 2) + ".";
                break;
            }
            default: {
                const std::uint64_t x = 3 + rng.next_below(12);
                const std::uint64_t k = 1 + rng.next_below(9);
                out += " x squared minus " + std::to_string(k) + " equals " +
                       std::to_string(x * x - k) + " when x = " +
                       std::to_string(x) + ".";
                break;
            }
        }
    }
    return out;
}

std::string make_base_text(const std::string& domain, Rng& rng,
                           std::uint64_t family, std::uint64_t variant) {
    if (domain == "code") return make_code_text(rng, family, variant);
    if (domain == "prose") return make_prose_text(rng, family, variant);
    if (domain == "math") return make_math_text(rng, family, variant);
    throw ConfigError("unknown corpus domain: " + domain);
}

// Near-duplicate variants: same family text with a few words swapped out.
// Tokens containing newlines are left alone so line structure survives.
std::string mutate_words(const std::string& base, Rng& rng) {
    constexpr const char* kNoise[] = {"delta", "gamma", "local", "spare",
                                      "prior", "next",  "raw",   "mixed"};
    std::string out;
    out.reserve(base.size() + 16);
    std::size_t start = 0;
    bool changed = false;
    while (start <= base.size()) {
        std::size_t end = base.find(' ', start);
        if (end == std::string::npos) end = base.size();
        const std::string_view token(base.data() + start, end - start);
        if (!token.empty() && token.find('\n') == std::string_view::npos &&
            rng.next_unit() < 0.06) {
            out += pick(rng, kNoise);
            changed = true;
        } else {
            out += token;
        }
        if (end == base.size()) break;
        out += ' ';
        start = end + 1;
    }
    if (!changed) out += " rev";
    return out;
}

}  // namespace

std::vector<GeneratedDoc> generate_corpus(const CorpusGenSpec& spec) {
    if (spec.dup_rate < 0.0 || spec.dup_rate > 1.0)
        throw ConfigError("corpus dup_rate must be within [0, 1]");
    for (const DomainSpec& d : spec.domains) {
        if (d.family_size == 0)
            throw ConfigError("corpus family_size must be positive");
    }

    std::vector<GeneratedDoc> docs;
    for (std::size_t di = 0; di < spec.domains.size(); ++di) {
        const DomainSpec& dom = spec.domains[di];
        std::size_t emitted = 0;
        std::uint64_t family = 0;
        while (emitted < dom.n_docs) {
            const std::size_t members =
                std::min(dom.family_size, dom.n_docs - emitted);
            Rng base_rng(mix(mix(spec.seed, di + 1), family + 1));
            const std::string base = make_base_text(dom.name, base_rng, family, 0);
            for (std::uint64_t v = 0; v < members; ++v) {
                GeneratedDoc doc;
                doc.domain = dom.name;
                doc.family = family;
                doc.variant = v;
                if (v == 0) {
                    doc.text = base;
                } else {
                    Rng var_rng(mix(mix(mix(spec.seed, di + 1), family + 1), v));
                    doc.text = mutate_words(base, var_rng);
                }
                docs.push_back(std::move(doc));
            }
            emitted += members;
            ++family;
        }
    }

    if (spec.dup_rate > 0.0 && docs.size() > 1) {
        Rng dup_rng(mix(spec.seed, 0xD00DULL));
        for (std::size_t i = 1; i < docs.size(); ++i) {
            if (dup_rng.next_unit() < spec.dup_rate) {
                const std::size_t j =
                    static_cast<std::size_t>(dup_rng.next_below(i));
                docs[i].text = docs[j].text;
                docs[i].exact_duplicate = true;
                docs[i].duplicate_of = static_cast<std::int64_t>(j);
            }
        }
    }
    return docs;
}

void write_corpus_files(const std::vector<GeneratedDoc>& docs,
                        const std::string& corpus_path,
                        const std::string& manifest_path) {
    std::ofstream corpus(corpus_path, std::ios::binary | std::ios::trunc);
    if (!corpus)
        throw std::runtime_error("cannot write corpus: " + corpus_path);
    std::ofstream manifest(manifest_path, std::ios::binary | std::ios::trunc);
    if (!manifest)
        throw std::runtime_error("cannot write manifest: " + manifest_path);

    for (std::size_t i = 0; i < docs.size(); ++i) {
        const GeneratedDoc& d = docs[i];
        corpus << nlohmann::json{{"text", d.text}}.dump() << '\n';
        nlohmann::json rec{{"line", i},
                           {"domain", d.domain},
                           {"family", d.family},
                           {"variant", d.variant},
                           {"exact_duplicate", d.exact_duplicate},
                           {"duplicate_of", d.duplicate_of}};
        manifest << rec.dump() << '\n';
    }
    corpus.flush();
    manifest.flush();
    if (!corpus || !manifest)
        throw std::runtime_error("short write emitting corpus files");
}

}  // namespace tttnn
