#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <lzma.h>

#include "twinspect/bytes.hpp"
#include "twinspect/digest.hpp"

namespace twinspect {

enum class Compression { none, xz };

inline const char* to_string(Compression c) {
    return c == Compression::xz ? "xz" : "none";
}

struct ImageDescriptor {
    std::string source_path;
    Compression compression = Compression::none;
    uint64_t decompressed_byte_size = 0;
    std::string digest; // SHA-256 of the decompressed content, lowercase hex
    std::string label;  // free text tag, e.g. "io" or "com"
};

struct OpenedImage {
    ImageDescriptor descriptor;
    std::shared_ptr<ByteSource> source;
};

struct ImageOpenOptions {
    // Decompressed payloads larger than this spill to an anonymous temp file
    // instead of staying in memory.
    uint64_t spill_threshold = uint64_t(512) << 20;
    bool compute_digest = true;
    std::string label;
};

inline constexpr std::array<uint8_t, 6> kXzMagic = {0xFD, '7', 'z', 'X', 'Z', 0x00};

inline uint64_t byte_size(const std::filesystem::path& path) {
    std::error_code ec;
    uint64_t size = std::filesystem::file_size(path, ec);
    if (ec)
        throw io_error("cannot size " + path.string() + ": " + ec.message());
    return size;
}

// SHA-256 of the full stream; throws on read failure without emitting a
// partial digest.
inline std::string hash_bytes(const ByteSource& src) {
    return sha256_hex(src, 0, src.size());
}

inline std::string hash_file(const std::filesystem::path& path) {
    FileSource src(path);
    return hash_bytes(src);
}

namespace detail {

// Write sink that keeps payloads in memory until they outgrow the spill
// threshold, then moves everything to an unlinked temp file.
class SpillSink {
public:
    explicit SpillSink(uint64_t threshold) : threshold_(threshold) {}

    SpillSink(const SpillSink&) = delete;
    SpillSink& operator=(const SpillSink&) = delete;

    ~SpillSink() {
        if (fd_ >= 0)
            ::close(fd_);
    }

    void append(std::span<const uint8_t> data) {
        total_ += data.size();
        if (fd_ < 0 && total_ > threshold_)
            spill();
        if (fd_ >= 0)
            write_all(data);
        else
            memory_.insert(memory_.end(), data.begin(), data.end());
    }

    uint64_t total() const noexcept { return total_; }

    std::shared_ptr<ByteSource> finish() {
        if (fd_ >= 0) {
            int fd = fd_;
            fd_ = -1;
            return std::make_shared<FileSource>(fd, total_, "decompressed image (spill)");
        }
        return std::make_shared<MemorySource>(std::move(memory_));
    }

private:
    void spill() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "twinspect-spill-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        fd_ = ::mkstemp(buf.data());
        if (fd_ < 0)
            throw io_error(std::string("cannot create spill file: ") + std::strerror(errno));
        ::unlink(buf.data());
        write_all(memory_);
        memory_.clear();
        memory_.shrink_to_fit();
    }

    void write_all(std::span<const uint8_t> data) {
        size_t done = 0;
        while (done < data.size()) {
            ssize_t n = ::write(fd_, data.data() + done, data.size() - done);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw io_error(std::string("spill write failed: ") + std::strerror(errno));
            }
            done += static_cast<size_t>(n);
        }
    }

    uint64_t threshold_;
    uint64_t total_ = 0;
    std::vector<uint8_t> memory_;
    int fd_ = -1;
};

struct XzResult {
    std::shared_ptr<ByteSource> source;
    uint64_t size = 0;
    std::string digest;
};

// Decodes a single-stream XZ container. Reports the input offset on error.
inline XzResult decompress_xz(const ByteSource& input, const ImageOpenOptions& opts) {
    lzma_stream strm = LZMA_STREAM_INIT;
    lzma_ret rc = lzma_stream_decoder(&strm, UINT64_MAX, 0);
    if (rc != LZMA_OK)
        throw io_error("lzma_stream_decoder init failed");

    SpillSink sink(opts.spill_threshold);
    std::optional<StreamDigest> digest;
    if (opts.compute_digest)
        digest.emplace(StreamDigest::Algo::sha256);

    std::vector<uint8_t> in_buf(1 << 20);
    std::vector<uint8_t> out_buf(1 << 20);
    uint64_t in_pos = 0;
    bool done = false;

    strm.next_in = nullptr;
    strm.avail_in = 0;
    while (!done) {
        if (strm.avail_in == 0 && in_pos < input.size()) {
            size_t want = static_cast<size_t>(
                std::min<uint64_t>(in_buf.size(), input.size() - in_pos));
            input.read_exact(in_pos, std::span<uint8_t>(in_buf.data(), want));
            in_pos += want;
            strm.next_in = in_buf.data();
            strm.avail_in = want;
        }
        lzma_action action = in_pos >= input.size() ? LZMA_FINISH : LZMA_RUN;
        strm.next_out = out_buf.data();
        strm.avail_out = out_buf.size();
        rc = lzma_code(&strm, action);

        size_t produced = out_buf.size() - strm.avail_out;
        if (produced > 0) {
            std::span<const uint8_t> chunk(out_buf.data(), produced);
            sink.append(chunk);
            if (digest)
                digest->update(chunk);
        }

        if (rc == LZMA_STREAM_END) {
            // A second stream would silently truncate the payload, so only
            // NUL stream padding (4-byte aligned) may follow.
            uint64_t trailing = strm.avail_in + (input.size() - in_pos);
            bool padding_ok = trailing % 4 == 0;
            for (size_t i = 0; padding_ok && i < strm.avail_in; ++i)
                if (strm.next_in[i] != 0)
                    padding_ok = false;
            while (padding_ok && in_pos < input.size()) {
                size_t want = static_cast<size_t>(
                    std::min<uint64_t>(in_buf.size(), input.size() - in_pos));
                input.read_exact(in_pos, std::span<uint8_t>(in_buf.data(), want));
                in_pos += want;
                for (size_t i = 0; i < want; ++i)
                    if (in_buf[i] != 0)
                        padding_ok = false;
            }
            if (!padding_ok) {
                uint64_t offset = strm.total_in;
                lzma_end(&strm);
                throw io_error("trailing data after the XZ stream at offset " +
                               std::to_string(offset) +
                               "; multi-stream containers are not supported");
            }
            done = true;
        } else if (rc == LZMA_BUF_ERROR && action == LZMA_FINISH) {
            lzma_end(&strm);
            throw io_error("truncated XZ container: input ended at offset " +
                           std::to_string(strm.total_in) + " before the stream finished");
        } else if (rc != LZMA_OK) {
            uint64_t offset = strm.total_in;
            lzma_end(&strm);
            const char* what = rc == LZMA_DATA_ERROR     ? "corrupt XZ stream"
                               : rc == LZMA_FORMAT_ERROR ? "not an XZ container"
                               : rc == LZMA_MEMLIMIT_ERROR || rc == LZMA_MEM_ERROR
                                   ? "XZ decoder out of memory"
                                   : "XZ decode error";
            throw io_error(std::string(what) + " at stream offset " + std::to_string(offset));
        }
    }
    lzma_end(&strm);

    XzResult result;
    result.size = sink.total();
    result.source = sink.finish();
    if (digest)
        result.digest = digest->finish_hex();
    return result;
}

} // namespace detail

inline bool has_xz_magic(const ByteSource& src) {
    if (src.size() < kXzMagic.size())
        return false;
    std::array<uint8_t, kXzMagic.size()> head{};
    src.read_exact(0, head);
    return head == kXzMagic;
}

// Opens a raw or XZ-compressed disk image. Compression is decided by the
// magic bytes, not the file name.
inline OpenedImage open_image(const std::filesystem::path& path,
                              const ImageOpenOptions& opts = {}) {
    auto file = std::make_shared<FileSource>(path);

    OpenedImage out;
    out.descriptor.source_path = path.string();
    out.descriptor.label = opts.label.empty() ? path.stem().string() : opts.label;

    if (has_xz_magic(*file)) {
        out.descriptor.compression = Compression::xz;
        detail::XzResult xz = detail::decompress_xz(*file, opts);
        out.descriptor.decompressed_byte_size = xz.size;
        out.descriptor.digest = xz.digest;
        out.source = std::move(xz.source);
    } else {
        out.descriptor.compression = Compression::none;
        out.descriptor.decompressed_byte_size = file->size();
        if (opts.compute_digest)
            out.descriptor.digest = hash_bytes(*file);
        out.source = std::move(file);
    }
    return out;
}

} // namespace twinspect
