#include "tttnn/corpus_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "tttnn/errors.hpp"
#include "tttnn/io_util.hpp"

namespace tttnn {

std::string OffsetIndex::serialize() const {
    std::string out;
    out.reserve(16 + 8 * offsets.size());
    out.append(kMagic, 8);
    io::put_u64le(out, offsets.size());
    for (std::uint64_t off : offsets) {
        io::put_u64le(out, off);
    }
    return out;
}

OffsetIndex OffsetIndex::deserialize(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IndexBuildError("offset index: bad magic or truncated header");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::uint64_t count = io::get_u64le(p + 8);
    if (bytes.size() != 16 + 8 * count) {
        throw IndexBuildError("offset index: size does not match line count");
    }
    OffsetIndex idx;
    idx.offsets.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        idx.offsets[i] = io::get_u64le(p + 16 + 8 * i);
    }
    return idx;
}

OffsetIndex build_offset_index(const std::string& corpus_path) {
    std::ifstream in(corpus_path, std::ios::binary);
    if (!in) {
        throw IndexBuildError("cannot open corpus: " + corpus_path);
    }

    OffsetIndex idx;
    std::vector<char> buf(1 << 20);
    std::uint64_t pos = 0;
    bool at_line_start = true;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            if (at_line_start) {
                idx.offsets.push_back(pos + static_cast<std::uint64_t>(i));
                at_line_start = false;
            }
            if (buf[static_cast<std::size_t>(i)] == '\n') {
                at_line_start = true;
            }
        }
        pos += static_cast<std::uint64_t>(got);
    }
    if (in.bad()) {
        throw IndexBuildError("read failure while indexing: " + corpus_path);
    }

    std::string serialized = idx.serialize();
    std::ofstream out(corpus_path + ".idx", std::ios::binary | std::ios::trunc);
    if (!out || !out.write(serialized.data(),
                           static_cast<std::streamsize>(serialized.size()))) {
        throw IndexBuildError("cannot write index: " + corpus_path + ".idx");
    }
    return idx;
}

std::string utf8_lossy(const std::string& bytes) {
    static constexpr char kReplacement[] = "\xEF\xBF\xBD";  // U+FFFD
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
    while (i < bytes.size()) {
        unsigned c = b[i];
        std::size_t len;
        unsigned min_cp;
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            min_cp = 0x80;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            min_cp = 0x800;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            min_cp = 0x10000;
        } else {
            out.append(kReplacement);
            ++i;
            continue;
        }
        if (i + len > bytes.size()) {
            out.append(kReplacement);
            ++i;
            continue;
        }
        unsigned cp = c & (0x7F >> len);
        bool ok = true;
        for (std::size_t j = 1; j < len; ++j) {
            if ((b[i + j] & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b[i + j] & 0x3F);
        }
        if (!ok || cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            out.append(kReplacement);
            ++i;  // resync one byte at a time
            continue;
        }
        out.append(bytes, i, len);
        i += len;
    }
    return out;
}

CorpusStore CorpusStore::open(const std::string& corpus_path,
                              const std::string& index_path) {
    std::string idx_path = index_path.empty() ? corpus_path + ".idx" : index_path;

    std::ifstream idx_in(idx_path, std::ios::binary);
    if (!idx_in) {
        throw IndexBuildError("cannot open index: " + idx_path);
    }
    std::string idx_bytes((std::istreambuf_iterator<char>(idx_in)),
                          std::istreambuf_iterator<char>());

    CorpusStore store;
    store.index_ = OffsetIndex::deserialize(idx_bytes);

    store.fd_ = ::open(corpus_path.c_str(), O_RDONLY);
    if (store.fd_ < 0) {
        throw IndexBuildError("cannot open corpus: " + corpus_path);
    }
    struct stat st{};
    if (fstat(store.fd_, &st) != 0) {
        throw IndexBuildError("cannot stat corpus: " + corpus_path);
    }
    store.file_size_ = static_cast<std::uint64_t>(st.st_size);
    return store;
}

CorpusStore::CorpusStore(CorpusStore&& other) noexcept
    : fd_(other.fd_),
      file_size_(other.file_size_),
      index_(std::move(other.index_)),
      bytes_read_(other.bytes_read_.load()) {
    other.fd_ = -1;
}

CorpusStore::~CorpusStore() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::string CorpusStore::read_line_bytes(std::uint64_t line_number) const {
    if (line_number >= index_.count()) {
        throw RangeError("line " + std::to_string(line_number) + " out of range (" +
                         std::to_string(index_.count()) + " lines)");
    }
    std::uint64_t begin = index_.offsets[line_number];
    std::uint64_t end = (line_number + 1 < index_.count())
                            ? index_.offsets[line_number + 1]
                            : file_size_;
    std::string buf(end - begin, '\0');
    std::size_t done = 0;
    while (done < buf.size()) {
        ssize_t got = ::pread(fd_, buf.data() + done, buf.size() - done,
                              static_cast<off_t>(begin + done));
        if (got < 0) {
            if (errno == EINTR) continue;
            throw IndexBuildError("pread failed: " + std::string(std::strerror(errno)));
        }
        if (got == 0) {
            throw IndexBuildError("corpus truncated under an existing index");
        }
        done += static_cast<std::size_t>(got);
    }
    bytes_read_.fetch_add(buf.size());
    return buf;
}

Document CorpusStore::get_line(std::uint64_t line_number, std::uint16_t shard_id) const {
    std::string raw = utf8_lossy(read_line_bytes(line_number));

    nlohmann::json record = nlohmann::json::parse(raw, nullptr, false);
    if (record.is_discarded()) {
        throw ParseError("line " + std::to_string(line_number) + ": malformed JSON",
                         line_number);
    }
    auto it = record.find("text");
    if (!record.is_object() || it == record.end()) {
        throw ParseError("line " + std::to_string(line_number) + ": missing \"text\" field",
                         line_number);
    }
    if (!it->is_string()) {
        throw ParseError("line " + std::to_string(line_number) + ": \"text\" is not a string",
                         line_number);
    }
    return Document{DocumentRef{shard_id, line_number}, it->get<std::string>()};
}

}  // namespace tttnn
