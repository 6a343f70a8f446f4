#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "twinspect/bytes.hpp"
#include "twinspect/digest.hpp"
#include "twinspect/treediff.hpp"

namespace twinspect {

class ext2_error : public io_error {
public:
    using io_error::io_error;
};

inline constexpr uint16_t kExt2Magic = 0xEF53;

// incompat feature bits
inline constexpr uint32_t kIncompatFiletype = 0x0002;

struct Ext2Superblock {
    uint32_t inode_count = 0;
    uint32_t block_count = 0;
    uint32_t first_data_block = 0;
    uint32_t block_size = 0; // 1024 << s_log_block_size
    uint32_t blocks_per_group = 0;
    uint32_t inodes_per_group = 0;
    uint16_t magic = 0;
    uint32_t rev_level = 0;
    uint32_t first_inode = 11;
    uint32_t inode_size = 128;
    uint32_t feature_compat = 0;
    uint32_t feature_incompat = 0;
    uint32_t feature_ro_compat = 0;
    std::string volume_label;
    std::string uuid; // canonical 8-4-4-4-12

    bool has_filetype() const { return feature_incompat & kIncompatFiletype; }
};

namespace detail {

inline std::string ext2_uuid_text(std::span<const uint8_t> raw16) {
    std::string hex = to_hex(raw16);
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
           hex.substr(16, 4) + "-" + hex.substr(20, 12);
}

inline std::string incompat_flag_names(uint32_t flags) {
    static const std::pair<uint32_t, const char*> known[] = {
        {0x0001, "compression"}, {0x0002, "filetype"},   {0x0004, "recover"},
        {0x0008, "journal_dev"}, {0x0010, "meta_bg"},    {0x0040, "extents"},
        {0x0080, "64bit"},       {0x0100, "mmp"},        {0x0200, "flex_bg"},
        {0x0400, "ea_inode"},    {0x1000, "dirdata"},    {0x2000, "csum_seed"},
        {0x4000, "largedir"},    {0x8000, "inline_data"}, {0x10000, "encrypt"},
    };
    std::string out;
    uint32_t named = 0;
    for (const auto& [bit, name] : known) {
        if (flags & bit) {
            if (!out.empty())
                out += ", ";
            out += name;
            named |= bit;
        }
    }
    if (uint32_t rest = flags & ~named) {
        if (!out.empty())
            out += ", ";
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%x", rest);
        out += buf;
    }
    return out;
}

} // namespace detail

// Parses the superblock at partition offset 1024 and refuses filesystems
// whose incompat features go beyond the classic ext2 set.
inline Ext2Superblock read_ext2_superblock(const ByteSource& partition) {
    if (partition.size() < 2048)
        throw ext2_error("partition too small to hold an ext2 superblock (" +
                         std::to_string(partition.size()) + " bytes)");
    auto raw = partition.read_range(1024, 1024);
    std::span<const uint8_t> sb(raw);

    Ext2Superblock out;
    out.magic = read_u16le(sb, 56);
    if (out.magic != kExt2Magic)
        throw ext2_error("not an ext2 filesystem (bad magic)");
    out.inode_count = read_u32le(sb, 0);
    out.block_count = read_u32le(sb, 4);
    out.first_data_block = read_u32le(sb, 20);
    uint32_t log_block_size = read_u32le(sb, 24);
    if (log_block_size > 2)
        throw ext2_error("unsupported block size (log " + std::to_string(log_block_size) + ")");
    out.block_size = 1024u << log_block_size;
    out.blocks_per_group = read_u32le(sb, 32);
    out.inodes_per_group = read_u32le(sb, 40);
    out.rev_level = read_u32le(sb, 76);
    if (out.rev_level >= 1) {
        out.first_inode = read_u32le(sb, 84);
        out.inode_size = read_u16le(sb, 88);
        out.feature_compat = read_u32le(sb, 92);
        out.feature_incompat = read_u32le(sb, 96);
        out.feature_ro_compat = read_u32le(sb, 100);
    }
    auto label = sb.subspan(120, 16);
    for (uint8_t c : label) {
        if (c == 0)
            break;
        out.volume_label.push_back(static_cast<char>(c));
    }
    out.uuid = detail::ext2_uuid_text(sb.subspan(104, 16));

    if (out.blocks_per_group == 0 || out.inodes_per_group == 0)
        throw ext2_error("corrupt superblock: zero blocks or inodes per group");
    if (out.inode_size < 128 || out.inode_size > out.block_size)
        throw ext2_error("corrupt superblock: inode size " + std::to_string(out.inode_size));

    if (uint32_t unsupported = out.feature_incompat & ~kIncompatFiletype) {
        throw ext2_error("unsupported incompat features: " +
                         detail::incompat_flag_names(unsupported) +
                         "; ext4 not supported, extract via host mount and pass the directory");
    }
    return out;
}

struct InodeRecord {
    uint32_t ino = 0;
    uint16_t mode_raw = 0; // type + 12 permission bits
    uint32_t uid = 0;
    uint32_t gid = 0;
    uint64_t size = 0;
    int64_t mtime = 0;
    uint16_t links = 0;
    uint32_t blocks512 = 0;
    uint32_t file_acl = 0;
    std::array<uint32_t, 15> block{};

    bool is_regular() const { return (mode_raw & 0xF000) == 0x8000; }
    bool is_directory() const { return (mode_raw & 0xF000) == 0x4000; }
    bool is_symlink() const { return (mode_raw & 0xF000) == 0xA000; }
    uint32_t permissions() const { return mode_raw & 07777; }
};

struct Ext2DirEntry {
    std::string name;
    uint32_t inode = 0;
};

// Read-only ext2 filesystem over an immutable byte source.
class Ext2Filesystem {
public:
    explicit Ext2Filesystem(std::shared_ptr<const ByteSource> partition)
        : src_(std::move(partition)), sb_(read_ext2_superblock(*src_)) {
        uint64_t groups =
            (uint64_t(sb_.block_count) + sb_.blocks_per_group - 1) / sb_.blocks_per_group;
        uint64_t gdt_offset = uint64_t(sb_.first_data_block + 1) * sb_.block_size;
        group_inode_tables_.reserve(groups);
        for (uint64_t g = 0; g < groups; ++g) {
            auto desc = src_->read_range(gdt_offset + g * 32, 32);
            group_inode_tables_.push_back(read_u32le(desc, 8));
        }
    }

    const Ext2Superblock& superblock() const { return sb_; }

    InodeRecord read_inode(uint32_t ino) const {
        if (ino == 0 || ino > sb_.inode_count)
            throw ext2_error("inode " + std::to_string(ino) + " out of range");
        uint32_t group = (ino - 1) / sb_.inodes_per_group;
        uint32_t index = (ino - 1) % sb_.inodes_per_group;
        if (group >= group_inode_tables_.size())
            throw ext2_error("inode " + std::to_string(ino) + " in missing group");
        uint64_t offset = uint64_t(group_inode_tables_[group]) * sb_.block_size +
                          uint64_t(index) * sb_.inode_size;
        auto raw = src_->read_range(offset, 128);
        std::span<const uint8_t> in(raw);

        InodeRecord rec;
        rec.ino = ino;
        rec.mode_raw = read_u16le(in, 0);
        rec.uid = read_u16le(in, 2);
        rec.gid = read_u16le(in, 24);
        rec.size = read_u32le(in, 4);
        if (rec.is_regular())
            rec.size |= uint64_t(read_u32le(in, 108)) << 32;
        rec.mtime = read_u32le(in, 16);
        rec.links = read_u16le(in, 26);
        rec.blocks512 = read_u32le(in, 28);
        rec.file_acl = read_u32le(in, 104);
        for (size_t i = 0; i < 15; ++i)
            rec.block[i] = read_u32le(in, 40 + 4 * i);
        // Linux osd2 carries the high uid/gid halves.
        rec.uid |= uint32_t(read_u16le(in, 120)) << 16;
        rec.gid |= uint32_t(read_u16le(in, 122)) << 16;
        return rec;
    }

    // Streams file content in block-sized chunks; holes read as zeros.
    // Sizes far beyond what the filesystem could address are refused so
    // corrupt inodes cannot stall the walk.
    template <typename Fn>
    void read_file(const InodeRecord& inode, Fn&& fn) const {
        uint64_t plausible = uint64_t(sb_.block_count) * sb_.block_size * 16;
        if (inode.size > plausible)
            throw ext2_error("inode " + std::to_string(inode.ino) +
                             " claims an implausible size of " + std::to_string(inode.size) +
                             " bytes");
        const uint32_t bs = sb_.block_size;
        std::vector<uint8_t> buf(bs);
        const std::vector<uint8_t> zeros(bs, 0);
        uint64_t remaining = inode.size;
        detail_cache cache;
        for (uint64_t logical = 0; remaining > 0; ++logical) {
            uint32_t physical = block_for_logical(inode, logical, cache);
            size_t take = static_cast<size_t>(std::min<uint64_t>(bs, remaining));
            if (physical == 0) {
                fn(std::span<const uint8_t>(zeros.data(), take));
            } else {
                src_->read_exact(uint64_t(physical) * bs,
                                 std::span<uint8_t>(buf.data(), take));
                fn(std::span<const uint8_t>(buf.data(), take));
            }
            remaining -= take;
        }
    }

    std::string file_digest(const InodeRecord& inode) const {
        StreamDigest digest(StreamDigest::Algo::sha256);
        read_file(inode, [&](std::span<const uint8_t> chunk) { digest.update(chunk); });
        return digest.finish_hex();
    }

    std::string read_symlink(const InodeRecord& inode) const {
        if (!inode.is_symlink())
            throw ext2_error("inode " + std::to_string(inode.ino) + " is not a symlink");
        if (inode.size > 4096)
            throw ext2_error("symlink target too long");
        uint32_t acl_blocks = inode.file_acl ? sb_.block_size / 512 : 0;
        if (inode.blocks512 == acl_blocks && inode.size <= 59) {
            // Fast symlink: the target lives in the block-pointer area.
            std::string out;
            for (uint64_t i = 0; i < inode.size; ++i) {
                uint32_t word = inode.block[i / 4];
                out.push_back(static_cast<char>((word >> (8 * (i % 4))) & 0xFF));
            }
            return out;
        }
        std::string out;
        read_file(inode, [&](std::span<const uint8_t> chunk) {
            out.append(reinterpret_cast<const char*>(chunk.data()), chunk.size());
        });
        return out;
    }

    struct DirReadResult {
        std::vector<Ext2DirEntry> entries; // "." and ".." excluded
        std::vector<std::string> errors;   // per-block corruption notes
    };

    DirReadResult read_directory(const InodeRecord& inode) const {
        if (!inode.is_directory())
            throw ext2_error("inode " + std::to_string(inode.ino) + " is not a directory");
        DirReadResult out;
        if (inode.size > uint64_t(sb_.block_count) * sb_.block_size) {
            out.errors.push_back("directory inode " + std::to_string(inode.ino) +
                                 " claims an implausible size of " +
                                 std::to_string(inode.size) + " bytes");
            return out;
        }
        const uint32_t bs = sb_.block_size;
        std::vector<uint8_t> block;
        uint64_t remaining = inode.size;
        uint64_t logical = 0;
        detail_cache cache;
        while (remaining > 0) {
            size_t take = static_cast<size_t>(std::min<uint64_t>(bs, remaining));
            uint32_t physical = block_for_logical(inode, logical, cache);
            block.assign(take, 0);
            if (physical != 0)
                src_->read_exact(uint64_t(physical) * bs, block);

            size_t pos = 0;
            while (pos + 8 <= block.size()) {
                std::span<const uint8_t> e(block.data() + pos, block.size() - pos);
                uint32_t entry_inode = read_u32le(e, 0);
                uint16_t rec_len = read_u16le(e, 4);
                size_t name_len = sb_.has_filetype() ? e[6] : read_u16le(e, 6);
                if (rec_len < 8 || rec_len % 4 != 0 || pos + rec_len > block.size() ||
                    8 + name_len > rec_len) {
                    out.errors.push_back("corrupt directory entry in inode " +
                                         std::to_string(inode.ino) + " block " +
                                         std::to_string(logical) + " at offset " +
                                         std::to_string(pos));
                    break;
                }
                if (entry_inode != 0) {
                    std::string name(reinterpret_cast<const char*>(e.data() + 8), name_len);
                    if (name != "." && name != "..")
                        out.entries.push_back({std::move(name), entry_inode});
                }
                pos += rec_len;
            }
            remaining -= take;
            ++logical;
        }
        return out;
    }

    // Walks directory entries from root inode 2. Follows symlinks, at most
    // one level per component, with a total depth cap of 40.
    InodeRecord resolve_path(std::string_view path) const {
        std::deque<std::string> todo;
        auto push_components = [&](std::string_view p, bool front) {
            std::vector<std::string> parts;
            size_t start = 0;
            for (size_t i = 0; i <= p.size(); ++i) {
                if (i == p.size() || p[i] == '/') {
                    if (i > start)
                        parts.emplace_back(p.substr(start, i - start));
                    start = i + 1;
                }
            }
            if (front)
                todo.insert(todo.begin(), parts.begin(), parts.end());
            else
                todo.insert(todo.end(), parts.begin(), parts.end());
        };
        push_components(path, false);

        InodeRecord current = read_inode(2);
        int follows = 0;
        while (!todo.empty()) {
            std::string component = std::move(todo.front());
            todo.pop_front();
            if (component == ".")
                continue;
            if (!current.is_directory())
                throw ext2_error("not a directory while resolving \"" + component + "\"");
            if (component == "..") {
                // Parent walks use the real ".." entry.
                auto dir = read_directory_raw(current);
                current = read_inode(dir.count(".." ) ? dir.at("..") : 2);
                continue;
            }
            auto dir = read_directory(current);
            const Ext2DirEntry* hit = nullptr;
            for (const auto& entry : dir.entries)
                if (entry.name == component)
                    hit = &entry;
            if (!hit)
                throw ext2_error("path component not found: \"" + component + "\"");
            InodeRecord next = read_inode(hit->inode);
            if (next.is_symlink()) {
                if (++follows > 40)
                    throw ext2_error("symlink depth exceeded resolving \"" + component + "\"");
                std::string target = read_symlink(next);
                if (!target.empty() && target.front() == '/')
                    current = read_inode(2);
                push_components(target, true);
                continue;
            }
            current = next;
        }
        return current;
    }

    // Depth-first walk, children sorted bytewise; records sorted by path.
    // "." and ".." excluded; the root itself is not emitted.
    TreeSnapshot walk_tree() const {
        TreeSnapshot snap;
        struct Frame {
            std::string rel;
            uint32_t ino;
        };
        std::vector<Frame> stack = {{"", 2}};
        std::set<uint32_t> visited_dirs = {2};
        while (!stack.empty()) {
            Frame frame = std::move(stack.back());
            stack.pop_back();
            InodeRecord dir_inode = read_inode(frame.ino);
            auto dir = read_directory(dir_inode);
            for (const auto& err : dir.errors)
                snap.errors.push_back({frame.rel, err});
            std::sort(dir.entries.begin(), dir.entries.end(),
                      [](const Ext2DirEntry& a, const Ext2DirEntry& b) {
                          return a.name < b.name;
                      });
            for (const auto& entry : dir.entries) {
                std::string rel =
                    frame.rel.empty() ? entry.name : frame.rel + "/" + entry.name;
                InodeRecord ino;
                try {
                    ino = read_inode(entry.inode);
                } catch (const std::exception& e) {
                    snap.errors.push_back({rel, e.what()});
                    continue;
                }
                FileRecord rec;
                rec.rel_path = rel;
                rec.mode = ino.permissions();
                rec.uid = ino.uid;
                rec.gid = ino.gid;
                rec.mtime = ino.mtime;
                if (ino.is_regular()) {
                    rec.kind = FileKind::file;
                    rec.size_bytes = ino.size;
                    try {
                        rec.digest = file_digest(ino);
                    } catch (const std::exception& e) {
                        snap.errors.push_back({rel, std::string("unreadable file: ") + e.what()});
                        continue;
                    }
                } else if (ino.is_directory()) {
                    rec.kind = FileKind::dir;
                    rec.size_bytes = 0;
                    if (visited_dirs.insert(entry.inode).second) {
                        stack.push_back({rel, entry.inode});
                    } else {
                        // A directory hard link back into the tree;
                        // descending again would never terminate.
                        snap.errors.push_back({rel, "directory cycle: inode " +
                                                        std::to_string(entry.inode) +
                                                        " already visited"});
                    }
                } else if (ino.is_symlink()) {
                    rec.kind = FileKind::symlink;
                    try {
                        rec.symlink_target = read_symlink(ino);
                    } catch (const std::exception& e) {
                        snap.errors.push_back({rel, e.what()});
                        continue;
                    }
                    rec.size_bytes = rec.symlink_target->size();
                } else {
                    snap.errors.push_back({rel, "unsupported inode kind"});
                    continue;
                }
                snap.records.push_back(std::move(rec));
            }
        }
        detail::sort_records(snap.records);
        std::sort(snap.errors.begin(), snap.errors.end(),
                  [](const SnapshotError& a, const SnapshotError& b) {
                      return a.rel_path < b.rel_path;
                  });
        return snap;
    }

private:
    // One-entry cache per indirection level; sequential walks hit it almost
    // every time.
    struct detail_cache {
        uint32_t l1_block = 0;
        std::vector<uint8_t> l1;
        uint32_t l2_block = 0;
        std::vector<uint8_t> l2;
        uint32_t l3_block = 0;
        std::vector<uint8_t> l3;
    };

    std::map<std::string, uint32_t> read_directory_raw(const InodeRecord& inode) const {
        std::map<std::string, uint32_t> out;
        const uint32_t bs = sb_.block_size;
        uint64_t remaining = inode.size;
        uint64_t logical = 0;
        detail_cache cache;
        std::vector<uint8_t> block;
        while (remaining > 0) {
            size_t take = static_cast<size_t>(std::min<uint64_t>(bs, remaining));
            uint32_t physical = block_for_logical(inode, logical, cache);
            block.assign(take, 0);
            if (physical != 0)
                src_->read_exact(uint64_t(physical) * bs, block);
            size_t pos = 0;
            while (pos + 8 <= block.size()) {
                std::span<const uint8_t> e(block.data() + pos, block.size() - pos);
                uint32_t entry_inode = read_u32le(e, 0);
                uint16_t rec_len = read_u16le(e, 4);
                size_t name_len = sb_.has_filetype() ? e[6] : read_u16le(e, 6);
                if (rec_len < 8 || rec_len % 4 != 0 || pos + rec_len > block.size() ||
                    8 + name_len > rec_len)
                    break;
                if (entry_inode != 0)
                    out.emplace(std::string(reinterpret_cast<const char*>(e.data() + 8),
                                            name_len),
                                entry_inode);
                pos += rec_len;
            }
            remaining -= take;
            ++logical;
        }
        return out;
    }

    const std::vector<uint8_t>& load_pointer_block(uint32_t block_no, uint32_t& cached_no,
                                                   std::vector<uint8_t>& cached) const {
        if (cached_no != block_no || cached.empty()) {
            cached = src_->read_range(uint64_t(block_no) * sb_.block_size, sb_.block_size);
            cached_no = block_no;
        }
        return cached;
    }

    uint32_t block_for_logical(const InodeRecord& inode, uint64_t logical,
                               detail_cache& cache) const {
        const uint64_t ppb = sb_.block_size / 4;
        if (logical < 12)
            return inode.block[logical];
        logical -= 12;
        if (logical < ppb) {
            if (inode.block[12] == 0)
                return 0;
            const auto& l1 = load_pointer_block(inode.block[12], cache.l1_block, cache.l1);
            return read_u32le(l1, static_cast<size_t>(logical * 4));
        }
        logical -= ppb;
        if (logical < ppb * ppb) {
            if (inode.block[13] == 0)
                return 0;
            const auto& l1 = load_pointer_block(inode.block[13], cache.l1_block, cache.l1);
            uint32_t l2_no = read_u32le(l1, static_cast<size_t>(logical / ppb * 4));
            if (l2_no == 0)
                return 0;
            const auto& l2 = load_pointer_block(l2_no, cache.l2_block, cache.l2);
            return read_u32le(l2, static_cast<size_t>(logical % ppb * 4));
        }
        logical -= ppb * ppb;
        if (logical < ppb * ppb * ppb) {
            if (inode.block[14] == 0)
                return 0;
            const auto& l1 = load_pointer_block(inode.block[14], cache.l1_block, cache.l1);
            uint32_t l2_no = read_u32le(l1, static_cast<size_t>(logical / (ppb * ppb) * 4));
            if (l2_no == 0)
                return 0;
            const auto& l2 = load_pointer_block(l2_no, cache.l2_block, cache.l2);
            uint32_t l3_no = read_u32le(l2, static_cast<size_t>(logical / ppb % ppb * 4));
            if (l3_no == 0)
                return 0;
            const auto& l3 = load_pointer_block(l3_no, cache.l3_block, cache.l3);
            return read_u32le(l3, static_cast<size_t>(logical % ppb * 4));
        }
        throw ext2_error("logical block beyond triple-indirect range");
    }

    std::shared_ptr<const ByteSource> src_;
    Ext2Superblock sb_;
    std::vector<uint32_t> group_inode_tables_;
};

} // namespace twinspect
