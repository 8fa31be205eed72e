#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace tttnn {

struct DocumentRef {
    std::uint16_t shard_id = 0;
    std::uint64_t line_number = 0;

    friend bool operator==(const DocumentRef&, const DocumentRef&) = default;
};

struct Document {
    DocumentRef ref;
    std::string text;
};

// Byte offset of the first byte of every line in a JSONL corpus file.
// Serialized form: magic "TTTNNIDX", u64 line count, u64 offset per line,
// all little-endian. Exactly 16 + 8*count bytes.
struct OffsetIndex {
    static constexpr char kMagic[9] = "TTTNNIDX";

    std::uint64_t count() const { return offsets.size(); }

    std::string serialize() const;
    static OffsetIndex deserialize(const std::string& bytes);

    std::vector<std::uint64_t> offsets;
};

// Scans the corpus once, writes the index to `<corpus_path>.idx` and returns
// it. A zero-length corpus yields an empty index. Throws IndexBuildError on
// I/O failure.
OffsetIndex build_offset_index(const std::string& corpus_path);

// Replaces ill-formed UTF-8 sequences with U+FFFD. Well-formed input passes
// through unchanged.
std::string utf8_lossy(const std::string& bytes);

// Random access to the lines of a JSONL corpus through its offset index.
// Holds only the offsets in memory; each get_line does one positioned read
// of that line's bytes, so concurrent readers never share a cursor.
class CorpusStore {
public:
    // index_path defaults to `<corpus_path>.idx`.
    static CorpusStore open(const std::string& corpus_path,
                            const std::string& index_path = "");

    CorpusStore(CorpusStore&& other) noexcept;
    CorpusStore& operator=(CorpusStore&&) = delete;
    CorpusStore(const CorpusStore&) = delete;
    ~CorpusStore();

    std::uint64_t num_lines() const { return index_.count(); }

    // Parses the "text" field of line `line_number`. Throws RangeError when
    // out of range and ParseError (carrying the line number) on malformed
    // JSON or a missing/non-string "text" field.
    Document get_line(std::uint64_t line_number, std::uint16_t shard_id = 0) const;

    // Raw bytes of one line, newline included. Exposed for instrumentation
    // and index verification.
    std::string read_line_bytes(std::uint64_t line_number) const;

    // Cumulative corpus bytes read by get_line/read_line_bytes calls.
    std::uint64_t bytes_read() const { return bytes_read_.load(); }

    const OffsetIndex& index() const { return index_; }
    std::uint64_t file_size() const { return file_size_; }

private:
    CorpusStore() = default;

    int fd_ = -1;
    std::uint64_t file_size_ = 0;
    OffsetIndex index_;
    mutable std::atomic<std::uint64_t> bytes_read_{0};
};

}  // namespace tttnn
