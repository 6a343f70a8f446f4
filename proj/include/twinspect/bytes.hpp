#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

namespace twinspect {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Random-access, read-only view of a run of bytes (a file, a decompressed
// image, a partition slice). read_at is safe to call from several threads
// at once; a short read only happens when the range crosses end-of-source.
class ByteSource {
public:
    virtual ~ByteSource() = default;

    virtual uint64_t size() const noexcept = 0;
    virtual size_t read_at(uint64_t offset, std::span<uint8_t> dst) const = 0;

    void read_exact(uint64_t offset, std::span<uint8_t> dst) const {
        size_t got = read_at(offset, dst);
        if (got != dst.size())
            throw io_error("short read at offset " + std::to_string(offset) +
                           ": wanted " + std::to_string(dst.size()) +
                           " bytes, got " + std::to_string(got));
    }

    std::vector<uint8_t> read_range(uint64_t offset, size_t len) const {
        std::vector<uint8_t> buf(len);
        read_exact(offset, buf);
        return buf;
    }
};

class MemorySource final : public ByteSource {
public:
    MemorySource() = default;
    explicit MemorySource(std::vector<uint8_t> data) : data_(std::move(data)) {}

    uint64_t size() const noexcept override { return data_.size(); }

    size_t read_at(uint64_t offset, std::span<uint8_t> dst) const override {
        if (offset >= data_.size())
            return 0;
        size_t n = std::min<uint64_t>(dst.size(), data_.size() - offset);
        std::memcpy(dst.data(), data_.data() + offset, n);
        return n;
    }

    const std::vector<uint8_t>& bytes() const noexcept { return data_; }

private:
    std::vector<uint8_t> data_;
};

// pread-backed file source. Also used for anonymous spill files, where the
// fd is handed over already unlinked.
class FileSource final : public ByteSource {
public:
    explicit FileSource(const std::filesystem::path& path) : path_(path.string()) {
        fd_ = ::open(path_.c_str(), O_RDONLY | O_CLOEXEC);
        if (fd_ < 0)
            throw io_error("cannot open " + path_ + ": " + std::strerror(errno));
        struct ::stat st{};
        if (::fstat(fd_, &st) != 0 || !S_ISREG(st.st_mode)) {
            ::close(fd_);
            fd_ = -1;
            throw io_error("not a regular file: " + path_);
        }
        size_ = static_cast<uint64_t>(st.st_size);
    }

    FileSource(int owned_fd, uint64_t size, std::string label)
        : path_(std::move(label)), fd_(owned_fd), size_(size) {}

    FileSource(const FileSource&) = delete;
    FileSource& operator=(const FileSource&) = delete;

    ~FileSource() override {
        if (fd_ >= 0)
            ::close(fd_);
    }

    uint64_t size() const noexcept override { return size_; }

    size_t read_at(uint64_t offset, std::span<uint8_t> dst) const override {
        size_t total = 0;
        while (total < dst.size()) {
            ssize_t n = ::pread(fd_, dst.data() + total, dst.size() - total,
                                static_cast<off_t>(offset + total));
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw io_error("read error in " + path_ + " at offset " +
                               std::to_string(offset + total) + ": " + std::strerror(errno));
            }
            if (n == 0)
                break;
            total += static_cast<size_t>(n);
        }
        return total;
    }

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
    int fd_ = -1;
    uint64_t size_ = 0;
};

// A sub-range of another source (one partition of an image).
class SliceSource final : public ByteSource {
public:
    SliceSource(std::shared_ptr<const ByteSource> parent, uint64_t offset, uint64_t length)
        : parent_(std::move(parent)), offset_(offset), length_(length) {
        if (offset_ + length_ > parent_->size())
            throw io_error("slice [" + std::to_string(offset_) + ", +" +
                           std::to_string(length_) + ") exceeds source of " +
                           std::to_string(parent_->size()) + " bytes");
    }

    uint64_t size() const noexcept override { return length_; }

    size_t read_at(uint64_t offset, std::span<uint8_t> dst) const override {
        if (offset >= length_)
            return 0;
        size_t n = std::min<uint64_t>(dst.size(), length_ - offset);
        return parent_->read_at(offset_ + offset, dst.first(n));
    }

private:
    std::shared_ptr<const ByteSource> parent_;
    uint64_t offset_ = 0;
    uint64_t length_ = 0;
};

inline uint16_t read_u16le(std::span<const uint8_t> b, size_t off) {
    return static_cast<uint16_t>(b[off] | (b[off + 1] << 8));
}

inline uint32_t read_u32le(std::span<const uint8_t> b, size_t off) {
    return static_cast<uint32_t>(b[off]) | (static_cast<uint32_t>(b[off + 1]) << 8) |
           (static_cast<uint32_t>(b[off + 2]) << 16) | (static_cast<uint32_t>(b[off + 3]) << 24);
}

inline uint64_t read_u64le(std::span<const uint8_t> b, size_t off) {
    return static_cast<uint64_t>(read_u32le(b, off)) |
           (static_cast<uint64_t>(read_u32le(b, off + 4)) << 32);
}

// Streams [offset, offset+length) of src through fn in bounded chunks.
template <typename Fn>
void for_each_chunk(const ByteSource& src, uint64_t offset, uint64_t length, Fn&& fn,
                    size_t chunk_size = 1 << 20) {
    std::vector<uint8_t> buf(std::min<uint64_t>(chunk_size, std::max<uint64_t>(length, 1)));
    uint64_t done = 0;
    while (done < length) {
        size_t want = static_cast<size_t>(std::min<uint64_t>(buf.size(), length - done));
        src.read_exact(offset + done, std::span<uint8_t>(buf.data(), want));
        fn(std::span<const uint8_t>(buf.data(), want));
        done += want;
    }
}

} // namespace twinspect
