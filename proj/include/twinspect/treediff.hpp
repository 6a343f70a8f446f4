#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <sys/stat.h>

#include "twinspect/bytes.hpp"
#include "twinspect/credparse.hpp" // parse_error
#include "twinspect/digest.hpp"
#include "twinspect/parallel.hpp"

namespace twinspect {

enum class FileKind { file, dir, symlink };

inline const char* to_string(FileKind k) {
    switch (k) {
    case FileKind::file: return "file";
    case FileKind::dir: return "dir";
    default: return "symlink";
    }
}

// One filesystem object, content-addressed for regular files. Directories
// carry no digest and a zero size; their differences surface through
// children.
struct FileRecord {
    std::string rel_path; // slash-separated, never starts with '/'
    FileKind kind = FileKind::file;
    uint64_t size_bytes = 0;
    uint32_t mode = 0; // 12 permission bits (rwxrwxrwx + setuid/setgid/sticky)
    uint32_t uid = 0;
    uint32_t gid = 0;
    std::optional<std::string> digest; // present iff kind == file
    std::optional<std::string> symlink_target;
    std::optional<int64_t> mtime; // seconds; never serialized, compared on request
};

struct SnapshotError {
    std::string rel_path;
    std::string message;
};

struct TreeSnapshot {
    std::vector<FileRecord> records; // sorted bytewise by rel_path
    std::vector<SnapshotError> errors;
};

enum class DiffStatus { only_left, only_right, content_differs, metadata_differs, identical };

inline const char* to_string(DiffStatus s) {
    switch (s) {
    case DiffStatus::only_left: return "only_left";
    case DiffStatus::only_right: return "only_right";
    case DiffStatus::content_differs: return "content_differs";
    case DiffStatus::metadata_differs: return "metadata_differs";
    default: return "identical";
    }
}

struct DiffEntry {
    std::string rel_path;
    DiffStatus status = DiffStatus::identical;
    std::optional<FileRecord> left;
    std::optional<FileRecord> right;
    std::string detail; // names the differing fields
};

struct DiffSummary {
    size_t identical = 0;
    size_t content_differs = 0;
    size_t metadata_differs = 0;
    size_t only_left = 0;
    size_t only_right = 0;

    size_t non_identical() const {
        return content_differs + metadata_differs + only_left + only_right;
    }
};

struct TreeDiff {
    std::vector<DiffEntry> entries;
    DiffSummary summary;
};

struct CompareOptions {
    // Image builds legitimately differ in timestamps; mtime only joins the
    // metadata comparison when asked.
    bool include_mtime = false;
};

namespace detail {

inline void sort_records(std::vector<FileRecord>& records) {
    std::sort(records.begin(), records.end(),
              [](const FileRecord& a, const FileRecord& b) { return a.rel_path < b.rel_path; });
}

} // namespace detail

// Snapshot of a host directory tree. Symlinks are recorded, never
// followed. Unreadable or unsupported entries become errors and the walk
// continues. File hashing fans out across `jobs` workers; output is
// byte-identical for any worker count.
inline TreeSnapshot snapshot_tree(const std::filesystem::path& root, unsigned jobs = 1) {
    std::error_code ec;
    if (!std::filesystem::is_directory(std::filesystem::symlink_status(root, ec)))
        throw io_error("snapshot root is not a directory: " + root.string());

    TreeSnapshot snap;
    std::vector<std::string> dirs = {""}; // relative paths, "" is the root
    while (!dirs.empty()) {
        std::string rel_dir = std::move(dirs.back());
        dirs.pop_back();
        std::filesystem::path abs_dir =
            rel_dir.empty() ? root : root / std::filesystem::path(rel_dir);

        std::vector<std::string> names;
        std::error_code iter_ec;
        std::filesystem::directory_iterator it(abs_dir, iter_ec);
        if (iter_ec) {
            snap.errors.push_back({rel_dir, "unreadable directory: " + iter_ec.message()});
            continue;
        }
        for (const auto& entry : it)
            names.push_back(entry.path().filename().string());
        std::sort(names.begin(), names.end());

        for (const auto& name : names) {
            std::string rel = rel_dir.empty() ? name : rel_dir + "/" + name;
            std::filesystem::path abs = root / std::filesystem::path(rel);
            struct stat st{};
            if (::lstat(abs.c_str(), &st) != 0) {
                snap.errors.push_back({rel, std::string("lstat failed: ") + std::strerror(errno)});
                continue;
            }
            FileRecord rec;
            rec.rel_path = rel;
            rec.mode = st.st_mode & 07777;
            rec.uid = st.st_uid;
            rec.gid = st.st_gid;
            rec.mtime = static_cast<int64_t>(st.st_mtime);
            if (S_ISREG(st.st_mode)) {
                rec.kind = FileKind::file;
                rec.size_bytes = static_cast<uint64_t>(st.st_size);
            } else if (S_ISDIR(st.st_mode)) {
                rec.kind = FileKind::dir;
                rec.size_bytes = 0;
                dirs.push_back(rel);
            } else if (S_ISLNK(st.st_mode)) {
                rec.kind = FileKind::symlink;
                std::error_code link_ec;
                auto target = std::filesystem::read_symlink(abs, link_ec);
                if (link_ec) {
                    snap.errors.push_back({rel, "readlink failed: " + link_ec.message()});
                    continue;
                }
                rec.symlink_target = target.string();
                rec.size_bytes = rec.symlink_target->size();
            } else {
                snap.errors.push_back({rel, "unsupported file kind (not file/dir/symlink)"});
                continue;
            }
            snap.records.push_back(std::move(rec));
        }
    }

    // Hash regular files; ordering stays independent of the worker count.
    std::vector<size_t> file_indices;
    for (size_t i = 0; i < snap.records.size(); ++i)
        if (snap.records[i].kind == FileKind::file)
            file_indices.push_back(i);
    std::mutex error_mutex;
    std::vector<size_t> failed;
    parallel_for(file_indices.size(), jobs, [&](size_t n) {
        FileRecord& rec = snap.records[file_indices[n]];
        try {
            FileSource src(root / std::filesystem::path(rec.rel_path));
            rec.digest = sha256_hex(src, 0, src.size());
            rec.size_bytes = src.size();
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            failed.push_back(file_indices[n]);
            snap.errors.push_back({rec.rel_path, std::string("unreadable file: ") + e.what()});
        }
    });
    if (!failed.empty()) {
        std::sort(failed.begin(), failed.end(), std::greater<>());
        for (size_t idx : failed)
            snap.records.erase(snap.records.begin() + static_cast<ptrdiff_t>(idx));
    }

    detail::sort_records(snap.records);
    std::sort(snap.errors.begin(), snap.errors.end(),
              [](const SnapshotError& a, const SnapshotError& b) {
                  return a.rel_path < b.rel_path;
              });
    return snap;
}

namespace detail {

inline DiffEntry classify_pair(const FileRecord& l, const FileRecord& r,
                               const CompareOptions& opts) {
    DiffEntry entry;
    entry.rel_path = l.rel_path;
    entry.left = l;
    entry.right = r;

    std::vector<std::string> fields;
    bool content = l.kind == FileKind::file && r.kind == FileKind::file && l.digest &&
                   r.digest && *l.digest != *r.digest;
    if (content)
        fields.push_back("content");
    if (l.kind != r.kind)
        fields.push_back("kind");
    if (l.mode != r.mode)
        fields.push_back("mode");
    if (l.uid != r.uid)
        fields.push_back("uid");
    if (l.gid != r.gid)
        fields.push_back("gid");
    if (l.symlink_target != r.symlink_target)
        fields.push_back("target");
    if (opts.include_mtime && l.mtime != r.mtime)
        fields.push_back("mtime");

    if (fields.empty()) {
        entry.status = DiffStatus::identical;
        return entry;
    }
    entry.status = content ? DiffStatus::content_differs : DiffStatus::metadata_differs;
    for (size_t i = 0; i < fields.size(); ++i)
        entry.detail += (i ? "," : "") + fields[i];
    return entry;
}

} // namespace detail

// Merge-join over two sorted snapshots.
inline TreeDiff compare_trees(const std::vector<FileRecord>& a, const std::vector<FileRecord>& b,
                              const CompareOptions& opts = {}) {
    TreeDiff diff;
    size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j >= b.size() || (i < a.size() && a[i].rel_path < b[j].rel_path)) {
            diff.entries.push_back(
                {a[i].rel_path, DiffStatus::only_left, a[i], std::nullopt, {}});
            ++diff.summary.only_left;
            ++i;
        } else if (i >= a.size() || b[j].rel_path < a[i].rel_path) {
            diff.entries.push_back(
                {b[j].rel_path, DiffStatus::only_right, std::nullopt, b[j], {}});
            ++diff.summary.only_right;
            ++j;
        } else {
            DiffEntry entry = detail::classify_pair(a[i], b[j], opts);
            switch (entry.status) {
            case DiffStatus::identical: ++diff.summary.identical; break;
            case DiffStatus::content_differs: ++diff.summary.content_differs; break;
            default: ++diff.summary.metadata_differs; break;
            }
            diff.entries.push_back(std::move(entry));
            ++i;
            ++j;
        }
    }
    return diff;
}

inline constexpr uint32_t kSpecialBits = 07000; // setuid | setgid | sticky

// Records carrying setuid/setgid/sticky bits, in path order.
inline std::vector<FileRecord> audit_special_bits(const std::vector<FileRecord>& records) {
    std::vector<FileRecord> out;
    for (const auto& rec : records)
        if (rec.mode & kSpecialBits)
            out.push_back(rec);
    return out;
}

struct SpecialBitDiffEntry {
    std::string rel_path;
    std::optional<uint32_t> left_mode;
    std::optional<uint32_t> right_mode;
};

// Cross-snapshot comparison of the special-bit sets: paths present in one
// set only, or present in both with different bits.
inline std::vector<SpecialBitDiffEntry> compare_special_bits(
    const std::vector<FileRecord>& a, const std::vector<FileRecord>& b) {
    auto la = audit_special_bits(a);
    auto rb = audit_special_bits(b);
    std::vector<SpecialBitDiffEntry> out;
    size_t i = 0, j = 0;
    while (i < la.size() || j < rb.size()) {
        if (j >= rb.size() || (i < la.size() && la[i].rel_path < rb[j].rel_path)) {
            out.push_back({la[i].rel_path, la[i].mode, std::nullopt});
            ++i;
        } else if (i >= la.size() || rb[j].rel_path < la[i].rel_path) {
            out.push_back({rb[j].rel_path, std::nullopt, rb[j].mode});
            ++j;
        } else {
            if (la[i].mode != rb[j].mode)
                out.push_back({la[i].rel_path, la[i].mode, rb[j].mode});
            ++i;
            ++j;
        }
    }
    return out;
}

namespace detail {

inline std::string escape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

inline std::string unescape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char c = s[++i];
            out.push_back(c == 't' ? '\t' : c == 'n' ? '\n' : c);
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

} // namespace detail

// Line-oriented snapshot interchange: one record per line, tab-separated
// path, kind, mode octal, uid, gid, size, digest-or-dash, target-or-dash.
inline std::string serialize_snapshot(const std::vector<FileRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        char mode[8];
        std::snprintf(mode, sizeof mode, "%04o", rec.mode);
        out += detail::escape_field(rec.rel_path);
        out += '\t';
        out += to_string(rec.kind);
        out += '\t';
        out += mode;
        out += '\t';
        out += std::to_string(rec.uid);
        out += '\t';
        out += std::to_string(rec.gid);
        out += '\t';
        out += std::to_string(rec.size_bytes);
        out += '\t';
        out += rec.digest ? *rec.digest : "-";
        out += '\t';
        out += rec.symlink_target ? detail::escape_field(*rec.symlink_target) : "-";
        out += '\n';
    }
    return out;
}

inline TreeSnapshot parse_snapshot(std::string_view text) {
    TreeSnapshot snap;
    size_t start = 0;
    size_t line_number = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_number;
        if (!line.empty()) {
            std::vector<std::string> cols;
            size_t field_start = 0;
            for (size_t i = 0; i <= line.size(); ++i) {
                if (i == line.size() || line[i] == '\t') {
                    cols.emplace_back(line.substr(field_start, i - field_start));
                    field_start = i + 1;
                }
            }
            if (cols.size() != 8)
                throw parse_error("snapshot line " + std::to_string(line_number) +
                                  ": expected 8 tab-separated columns, found " +
                                  std::to_string(cols.size()));
            FileRecord rec;
            rec.rel_path = detail::unescape_field(cols[0]);
            if (rec.rel_path.empty() || rec.rel_path.front() == '/')
                throw parse_error("snapshot line " + std::to_string(line_number) +
                                  ": bad path \"" + cols[0] + "\"");
            if (cols[1] == "file")
                rec.kind = FileKind::file;
            else if (cols[1] == "dir")
                rec.kind = FileKind::dir;
            else if (cols[1] == "symlink")
                rec.kind = FileKind::symlink;
            else
                throw parse_error("snapshot line " + std::to_string(line_number) +
                                  ": unknown kind \"" + cols[1] + "\"");
            try {
                rec.mode = static_cast<uint32_t>(std::stoul(cols[2], nullptr, 8));
                rec.uid = static_cast<uint32_t>(std::stoul(cols[3]));
                rec.gid = static_cast<uint32_t>(std::stoul(cols[4]));
                rec.size_bytes = std::stoull(cols[5]);
            } catch (const std::exception&) {
                throw parse_error("snapshot line " + std::to_string(line_number) +
                                  ": bad numeric field");
            }
            if (rec.mode > 07777)
                throw parse_error("snapshot line " + std::to_string(line_number) +
                                  ": mode out of range");
            if (cols[6] != "-")
                rec.digest = cols[6];
            if (cols[7] != "-")
                rec.symlink_target = detail::unescape_field(cols[7]);
            if ((rec.kind == FileKind::file) != rec.digest.has_value())
                throw parse_error("snapshot line " + std::to_string(line_number) +
                                  ": digest must be present exactly for regular files");
            snap.records.push_back(std::move(rec));
        }
        start = end + 1;
    }
    detail::sort_records(snap.records);
    return snap;
}

} // namespace twinspect
