#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "twinspect/bytes.hpp"
#include "twinspect/digest.hpp"

namespace twinspect {

class gpt_error : public io_error {
public:
    using io_error::io_error;
};

enum class FsKind { ext2, ext4, vfat, empty, unknown };

inline const char* to_string(FsKind k) {
    switch (k) {
    case FsKind::ext2: return "ext2";
    case FsKind::ext4: return "ext4";
    case FsKind::vfat: return "vfat";
    case FsKind::empty: return "empty";
    default: return "unknown";
    }
}

struct PartitionEntry {
    uint32_t index = 0; // 1-based entry-array slot
    uint64_t start_lba = 0;
    uint64_t end_lba = 0; // inclusive
    uint64_t size_bytes = 0;
    std::string type_guid;   // canonical mixed-endian text, lowercase
    std::string unique_guid;
    std::string name; // decoded from UTF-16LE
    FsKind fs_kind = FsKind::unknown;
    std::optional<std::string> fs_label;
    std::optional<std::string> fs_uuid;

    uint64_t start_byte() const { return start_lba * 512; }
};

struct PartitionTable {
    uint32_t sector_size = 512;
    std::vector<PartitionEntry> entries; // sorted by index
    bool header_crc_ok = true;           // primary header CRC
    bool used_backup_header = false;
    std::string disk_guid;
};

namespace detail {

inline std::string guid_text(std::span<const uint8_t> g) {
    char buf[40];
    std::snprintf(buf, sizeof buf,
                  "%02x%02x%02x%02x-%02x%02x-%02x%02x-%02x%02x-%02x%02x%02x%02x%02x%02x",
                  g[3], g[2], g[1], g[0], g[5], g[4], g[7], g[6], g[8], g[9], g[10], g[11],
                  g[12], g[13], g[14], g[15]);
    return buf;
}

inline bool all_zero(std::span<const uint8_t> bytes) {
    for (uint8_t b : bytes)
        if (b)
            return false;
    return true;
}

inline std::string utf16le_name(std::span<const uint8_t> raw) {
    std::string out;
    for (size_t i = 0; i + 1 < raw.size(); i += 2) {
        uint16_t unit = read_u16le(raw, i);
        if (unit == 0)
            break;
        if (unit < 0x80) {
            out.push_back(static_cast<char>(unit));
        } else if (unit < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (unit >> 6)));
            out.push_back(static_cast<char>(0x80 | (unit & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xE0 | (unit >> 12)));
            out.push_back(static_cast<char>(0x80 | ((unit >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (unit & 0x3F)));
        }
    }
    return out;
}

struct GptHeader {
    uint64_t current_lba = 0;
    uint64_t backup_lba = 0;
    uint64_t first_usable = 0;
    uint64_t last_usable = 0;
    std::string disk_guid;
    uint64_t entry_lba = 0;
    uint32_t num_entries = 0;
    uint32_t entry_size = 0;
    uint32_t entries_crc = 0;
};

// Validates signature + CRC of one header sector; returns std::nullopt when
// the signature is absent, throws only for internal read problems.
inline std::optional<GptHeader> try_header(const ByteSource& image, uint64_t lba,
                                           bool& crc_ok, std::string& crc_message) {
    crc_ok = false;
    auto sector = image.read_range(lba * 512, 512);
    if (std::memcmp(sector.data(), "EFI PART", 8) != 0)
        return std::nullopt;
    uint32_t header_size = read_u32le(sector, 12);
    if (header_size < 92 || header_size > 512) {
        crc_message = "GPT header at LBA " + std::to_string(lba) + " has bad size " +
                      std::to_string(header_size);
        return std::nullopt;
    }
    uint32_t stored_crc = read_u32le(sector, 16);
    std::vector<uint8_t> scratch(sector.begin(), sector.begin() + header_size);
    scratch[16] = scratch[17] = scratch[18] = scratch[19] = 0;
    uint32_t computed = static_cast<uint32_t>(
        ::crc32(0L, scratch.data(), static_cast<uInt>(scratch.size())));
    if (computed != stored_crc) {
        crc_message = "GPT header CRC mismatch at LBA " + std::to_string(lba) + " (stored 0x" +
                      to_hex(std::span<const uint8_t>(sector.data() + 16, 4)) + ")";
        return std::nullopt;
    }
    crc_ok = true;
    GptHeader h;
    h.current_lba = read_u64le(sector, 24);
    h.backup_lba = read_u64le(sector, 32);
    h.first_usable = read_u64le(sector, 40);
    h.last_usable = read_u64le(sector, 48);
    h.disk_guid = guid_text(std::span<const uint8_t>(sector.data() + 56, 16));
    h.entry_lba = read_u64le(sector, 72);
    h.num_entries = read_u32le(sector, 80);
    h.entry_size = read_u32le(sector, 84);
    h.entries_crc = read_u32le(sector, 88);
    return h;
}

// "MBR only" versus "garbage": a valid boot-sector signature with real
// partition entries and no 0xEE protective entry means a plain MBR disk.
inline std::string classify_no_gpt(const ByteSource& image) {
    if (image.size() < 512)
        return "no GPT found (image smaller than one sector)";
    auto mbr = image.read_range(0, 512);
    if (mbr[510] != 0x55 || mbr[511] != 0xAA)
        return "no GPT found (no EFI PART signature at LBA 1, no MBR boot signature)";
    bool any_entry = false;
    bool protective = false;
    for (int i = 0; i < 4; ++i) {
        uint8_t type = mbr[446 + 16 * i + 4];
        if (type == 0xEE)
            protective = true;
        else if (type != 0)
            any_entry = true;
    }
    if (protective)
        return "no GPT found (protective MBR present but the GPT header is missing or corrupt)";
    if (any_entry)
        return "no GPT found (MBR partition table only)";
    return "no GPT found (no EFI PART signature at LBA 1)";
}

} // namespace detail

// Parses the GPT at LBA 1 (512-byte sectors). Falls back to the backup
// header only when the primary fails its CRC; entry-array CRC failures are
// fatal and name the CRC that failed.
inline PartitionTable parse_gpt(const ByteSource& image) {
    if (image.size() < 2 * 512)
        throw gpt_error("no GPT found (image smaller than two sectors)");

    PartitionTable table;
    bool primary_crc_ok = false;
    std::string crc_message;
    auto header = detail::try_header(image, 1, primary_crc_ok, crc_message);
    table.header_crc_ok = primary_crc_ok;

    if (!header) {
        // A 4096-byte-sector GPT would put its header at byte 4096.
        if (image.size() >= 4096 + 512) {
            auto probe = image.read_range(4096, 8);
            if (std::memcmp(probe.data(), "EFI PART", 8) == 0)
                throw gpt_error("GPT uses 4096-byte sectors, which this parser rejects "
                                "(512-byte sectors only)");
        }
        bool signature_present = !crc_message.empty();
        if (!signature_present) {
            throw gpt_error(detail::classify_no_gpt(image));
        }
        // Signature was there but the CRC failed: consult the backup.
        uint64_t last_lba = image.size() / 512 - 1;
        bool backup_crc_ok = false;
        std::string backup_message;
        auto backup = detail::try_header(image, last_lba, backup_crc_ok, backup_message);
        if (!backup)
            throw gpt_error("GPT header CRC failure: " + crc_message +
                            (backup_message.empty()
                                 ? "; backup header at LBA " + std::to_string(last_lba) +
                                       " is also unusable"
                                 : "; backup: " + backup_message));
        header = backup;
        table.used_backup_header = true;
    }

    if (header->num_entries == 0 || header->num_entries > 512)
        throw gpt_error("GPT header entry count " + std::to_string(header->num_entries) +
                        " is implausible");
    if (header->entry_size < 128 || header->entry_size > 4096)
        throw gpt_error("GPT entry size " + std::to_string(header->entry_size) +
                        " is implausible");
    uint64_t array_bytes = uint64_t(header->num_entries) * header->entry_size;
    uint64_t array_offset = header->entry_lba * 512;
    if (array_offset + array_bytes > image.size())
        throw gpt_error("GPT entry array runs past the end of the image");

    auto entries = image.read_range(array_offset, static_cast<size_t>(array_bytes));
    uint32_t computed = static_cast<uint32_t>(
        ::crc32(0L, entries.data(), static_cast<uInt>(entries.size())));
    if (computed != header->entries_crc)
        throw gpt_error("GPT entry-array CRC mismatch (the header CRC was valid)");

    table.disk_guid = header->disk_guid;
    uint64_t image_sectors = image.size() / 512;
    for (uint32_t slot = 0; slot < header->num_entries; ++slot) {
        std::span<const uint8_t> e(entries.data() + size_t(slot) * header->entry_size,
                                   header->entry_size);
        if (detail::all_zero(e.first(16)))
            continue;
        PartitionEntry p;
        p.index = slot + 1;
        p.type_guid = detail::guid_text(e.first(16));
        p.unique_guid = detail::guid_text(e.subspan(16, 16));
        p.start_lba = read_u64le(e, 32);
        p.end_lba = read_u64le(e, 40);
        p.name = detail::utf16le_name(e.subspan(56, std::min<size_t>(72, e.size() - 56)));
        if (p.start_lba > p.end_lba)
            throw gpt_error("partition " + std::to_string(p.index) +
                            " has start LBA after end LBA");
        if (p.end_lba >= image_sectors)
            throw gpt_error("partition " + std::to_string(p.index) +
                            " runs past the end of the image");
        p.size_bytes = (p.end_lba - p.start_lba + 1) * 512;
        table.entries.push_back(std::move(p));
    }

    // Entries must not overlap one another.
    std::vector<const PartitionEntry*> by_start;
    for (const auto& p : table.entries)
        by_start.push_back(&p);
    std::sort(by_start.begin(), by_start.end(),
              [](const PartitionEntry* a, const PartitionEntry* b) {
                  return a->start_lba < b->start_lba;
              });
    for (size_t i = 1; i < by_start.size(); ++i) {
        if (by_start[i]->start_lba <= by_start[i - 1]->end_lba)
            throw gpt_error("partitions " + std::to_string(by_start[i - 1]->index) + " and " +
                            std::to_string(by_start[i]->index) + " overlap");
    }
    return table;
}

namespace detail {

// ext2-set incompat features; anything beyond classifies the probe as ext4.
inline constexpr uint32_t kProbeExt2Incompat = 0x0002; // filetype

inline bool probe_ext(const ByteSource& image, PartitionEntry& entry) {
    if (entry.size_bytes < 2048)
        return false;
    auto sb = image.read_range(entry.start_byte() + 1024, 1024);
    if (read_u16le(sb, 56) != 0xEF53)
        return false;
    uint32_t log_block_size = read_u32le(sb, 24);
    if (log_block_size > 6)
        return false;
    uint32_t incompat = read_u32le(sb, 96);
    entry.fs_kind = (incompat & ~kProbeExt2Incompat) ? FsKind::ext4 : FsKind::ext2;
    std::string label;
    for (size_t i = 120; i < 136 && sb[i]; ++i)
        label.push_back(static_cast<char>(sb[i]));
    if (!label.empty())
        entry.fs_label = label;
    std::string hex = to_hex(std::span<const uint8_t>(sb.data() + 104, 16));
    entry.fs_uuid = hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
                    hex.substr(16, 4) + "-" + hex.substr(20, 12);
    return true;
}

inline bool probe_fat(const ByteSource& image, PartitionEntry& entry) {
    if (entry.size_bytes < 512)
        return false;
    auto bs = image.read_range(entry.start_byte(), 512);
    if (bs[510] != 0x55 || bs[511] != 0xAA)
        return false;
    if (bs[0] != 0xEB && bs[0] != 0xE9)
        return false;
    uint16_t bytes_per_sector = read_u16le(bs, 11);
    if (bytes_per_sector != 512 && bytes_per_sector != 1024 && bytes_per_sector != 2048 &&
        bytes_per_sector != 4096)
        return false;
    uint8_t spc = bs[13];
    if (spc == 0 || (spc & (spc - 1)) != 0)
        return false;
    uint8_t num_fats = bs[16];
    if (num_fats == 0 || num_fats > 2)
        return false;

    uint16_t root_entries = read_u16le(bs, 17);
    size_t ext_sig_off = root_entries != 0 ? 38 : 66;
    size_t serial_off = root_entries != 0 ? 39 : 67;
    size_t label_off = root_entries != 0 ? 43 : 71;
    entry.fs_kind = FsKind::vfat;
    if (bs[ext_sig_off] == 0x29) {
        uint32_t serial = read_u32le(bs, serial_off);
        char buf[12];
        std::snprintf(buf, sizeof buf, "%04X-%04X", serial >> 16, serial & 0xFFFF);
        entry.fs_uuid = buf;
        std::string label(reinterpret_cast<const char*>(bs.data() + label_off), 11);
        while (!label.empty() && label.back() == ' ')
            label.pop_back();
        if (!label.empty() && label != "NO NAME")
            entry.fs_label = label;
    }
    return true;
}

inline bool range_all_zero(const ByteSource& image, uint64_t offset, uint64_t length) {
    bool zero = true;
    for_each_chunk(image, offset, length, [&](std::span<const uint8_t> chunk) {
        if (zero && !all_zero(chunk))
            zero = false;
    });
    return zero;
}

} // namespace detail

// Fills fs_kind/fs_label/fs_uuid for one entry. Never fails: content that
// matches nothing is unknown, an all-zero leading range (2 MiB cap) is
// empty.
inline void probe_filesystem(const ByteSource& image, PartitionEntry& entry) {
    entry.fs_kind = FsKind::unknown;
    entry.fs_label.reset();
    entry.fs_uuid.reset();
    try {
        if (detail::probe_ext(image, entry))
            return;
        if (detail::probe_fat(image, entry))
            return;
        uint64_t scan = std::min<uint64_t>(entry.size_bytes, 2 << 20);
        if (detail::range_all_zero(image, entry.start_byte(), scan))
            entry.fs_kind = FsKind::empty;
    } catch (const std::exception&) {
        entry.fs_kind = FsKind::unknown;
    }
}

inline void probe_all(const ByteSource& image, PartitionTable& table) {
    for (auto& entry : table.entries)
        probe_filesystem(image, entry);
}

// SHA-256 of exactly the partition's byte range.
inline std::string hash_partition(const ByteSource& image, const PartitionEntry& entry) {
    if (entry.start_byte() + entry.size_bytes > image.size())
        throw gpt_error("partition " + std::to_string(entry.index) +
                        " range exceeds the image");
    return sha256_hex(image, entry.start_byte(), entry.size_bytes);
}

enum class PartitionDiffStatus { identical, differs, only_left, only_right };

inline const char* to_string(PartitionDiffStatus s) {
    switch (s) {
    case PartitionDiffStatus::identical: return "identical";
    case PartitionDiffStatus::differs: return "differs";
    case PartitionDiffStatus::only_left: return "only_left";
    default: return "only_right";
    }
}

struct PartitionDiffRecord {
    uint32_t index = 0;
    PartitionDiffStatus status = PartitionDiffStatus::identical;
    bool size_equal = true;
    bool type_equal = true;
    bool name_equal = true;
    bool label_equal = true;
    bool digest_equal = true;
    std::string detail;
};

struct PartitionTableDiff {
    std::vector<PartitionDiffRecord> records;
    size_t left_count = 0;
    size_t right_count = 0;
    bool count_equal = true;
};

// Pairs entries by index. Digests run parallel to each table's entries.
inline PartitionTableDiff diff_partition_tables(const PartitionTable& a,
                                                const std::vector<std::string>& digests_a,
                                                const PartitionTable& b,
                                                const std::vector<std::string>& digests_b) {
    PartitionTableDiff diff;
    diff.left_count = a.entries.size();
    diff.right_count = b.entries.size();
    diff.count_equal = diff.left_count == diff.right_count;

    std::map<uint32_t, std::pair<const PartitionEntry*, const std::string*>> left, right;
    for (size_t i = 0; i < a.entries.size(); ++i)
        left[a.entries[i].index] = {&a.entries[i], i < digests_a.size() ? &digests_a[i] : nullptr};
    for (size_t i = 0; i < b.entries.size(); ++i)
        right[b.entries[i].index] = {&b.entries[i], i < digests_b.size() ? &digests_b[i] : nullptr};

    std::vector<uint32_t> indices;
    for (const auto& [idx, _] : left)
        indices.push_back(idx);
    for (const auto& [idx, _] : right)
        if (!left.contains(idx))
            indices.push_back(idx);
    std::sort(indices.begin(), indices.end());

    for (uint32_t idx : indices) {
        PartitionDiffRecord rec;
        rec.index = idx;
        bool in_left = left.contains(idx);
        bool in_right = right.contains(idx);
        if (in_left && !in_right) {
            rec.status = PartitionDiffStatus::only_left;
            rec.detail = "present only in left table";
        } else if (!in_left && in_right) {
            rec.status = PartitionDiffStatus::only_right;
            rec.detail = "present only in right table";
        } else {
            const auto& [le, ld] = left[idx];
            const auto& [re, rd] = right[idx];
            rec.size_equal = le->size_bytes == re->size_bytes;
            rec.type_equal = le->type_guid == re->type_guid;
            rec.name_equal = le->name == re->name;
            rec.label_equal = le->fs_label == re->fs_label;
            rec.digest_equal = ld && rd ? *ld == *rd : true;
            std::vector<std::string> bad;
            if (!rec.size_equal)
                bad.push_back("size");
            if (!rec.type_equal)
                bad.push_back("type");
            if (!rec.name_equal)
                bad.push_back("name");
            if (!rec.label_equal)
                bad.push_back("label");
            if (!rec.digest_equal)
                bad.push_back("content");
            if (bad.empty()) {
                rec.status = PartitionDiffStatus::identical;
            } else {
                rec.status = PartitionDiffStatus::differs;
                for (size_t i = 0; i < bad.size(); ++i)
                    rec.detail += (i ? "," : "") + bad[i];
            }
        }
        diff.records.push_back(std::move(rec));
    }
    return diff;
}

} // namespace twinspect
