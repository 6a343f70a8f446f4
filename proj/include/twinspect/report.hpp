#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinspect/binmeta.hpp"
#include "twinspect/credparse.hpp"
#include "twinspect/ext2.hpp"
#include "twinspect/gpt.hpp"
#include "twinspect/image_io.hpp"
#include "twinspect/parallel.hpp"
#include "twinspect/treediff.hpp"
#include "twinspect/version.hpp"
#include "twinspect/vulnrules.hpp"

namespace twinspect {

enum class Verdict { identical, metadata_only_drift, content_drift, findings_present };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::identical: return "identical";
    case Verdict::metadata_only_drift: return "metadata_only_drift";
    case Verdict::content_drift: return "content_drift";
    default: return "findings_present";
    }
}

enum class ReportFormat { json, text };

struct PartitionTreeSection {
    uint32_t index = 0;
    std::string label;
    DiffSummary summary;
    std::vector<DiffEntry> non_identical;
    std::vector<SpecialBitDiffEntry> special_bit_diff;
    std::string note; // set when the partition was skipped instead
};

struct ComparisonReport {
    std::string tool_version = kVersion;
    ImageDescriptor left, right;
    PartitionTable left_table, right_table;
    std::vector<std::string> left_digests, right_digests; // parallel to entries
    PartitionTableDiff partition_diff;
    std::vector<PartitionTreeSection> tree_sections;
    std::vector<Finding> left_findings, right_findings;
    std::vector<BuildBanner> left_banners, right_banners;
    std::optional<BannerDelta> banner_delta_result;
    std::vector<std::string> notes;
    bool content_drift = false;
    Verdict verdict = Verdict::identical;
};

struct ReportOptions {
    RulePolicy policy;
    size_t min_str_len = 4;
    unsigned jobs = 1;
    bool include_mtime = false;
};

// Exit status is a pure function of the verdict and finding severities:
// 1 when critical findings or content drift are present.
inline int exit_code_for(const ComparisonReport& report) {
    bool critical = false;
    for (const auto* findings : {&report.left_findings, &report.right_findings})
        for (const auto& f : *findings)
            if (f.severity == Severity::critical)
                critical = true;
    return (critical || report.content_drift) ? 1 : 0;
}

namespace detail {

inline std::string human_size(uint64_t bytes) {
    if (bytes < 1024)
        return std::to_string(bytes) + "B";
    static const char units[] = "KMGTPE";
    double v = static_cast<double>(bytes);
    int unit = -1;
    while (v >= 1024.0 && unit < 5) {
        v /= 1024.0;
        ++unit;
    }
    double rounded = std::round(v * 10.0) / 10.0;
    char buf[32];
    if (rounded < 10.0 && rounded != std::floor(rounded))
        std::snprintf(buf, sizeof buf, "%.1f%c", rounded, units[unit]);
    else
        std::snprintf(buf, sizeof buf, "%.0f%c", rounded, units[unit]);
    return buf;
}

inline nlohmann::ordered_json descriptor_json(const ImageDescriptor& d) {
    nlohmann::ordered_json j;
    j["path"] = d.source_path;
    j["label"] = d.label;
    j["compression"] = to_string(d.compression);
    j["size_bytes"] = d.decompressed_byte_size;
    j["sha256"] = d.digest;
    return j;
}

inline nlohmann::ordered_json finding_json(const Finding& f) {
    nlohmann::ordered_json j;
    j["rule"] = f.rule_id;
    j["severity"] = to_string(f.severity);
    j["cwe_ids"] = f.cwe_ids;
    j["file"] = f.subject_file;
    j["line"] = f.subject_line;
    j["key"] = f.subject_key;
    j["evidence"] = f.evidence;
    j["recommendation"] = f.recommendation;
    return j;
}

inline nlohmann::ordered_json banner_json(const BuildBanner& b) {
    nlohmann::ordered_json j;
    j["version"] = b.version;
    j["git_hash"] = b.git_hash;
    j["dirty"] = b.dirty;
    j["builder_user"] = b.builder_user;
    j["build_host"] = b.build_host;
    j["build_number"] = b.build_number;
    if (b.timestamp) {
        j["timestamp"] = b.timestamp_text;
        j["timestamp_epoch"] = *b.timestamp;
    }
    if (!b.parse_warning.empty())
        j["warning"] = b.parse_warning;
    j["raw"] = b.raw;
    return j;
}

inline nlohmann::ordered_json partition_json(const PartitionEntry& p, const std::string* digest) {
    nlohmann::ordered_json j;
    j["index"] = p.index;
    j["start_lba"] = p.start_lba;
    j["end_lba"] = p.end_lba;
    j["size_bytes"] = p.size_bytes;
    j["type_guid"] = p.type_guid;
    j["unique_guid"] = p.unique_guid;
    j["name"] = p.name;
    j["fs_kind"] = to_string(p.fs_kind);
    if (p.fs_label)
        j["fs_label"] = *p.fs_label;
    if (p.fs_uuid)
        j["fs_uuid"] = *p.fs_uuid;
    if (digest && !digest->empty())
        j["sha256"] = *digest;
    return j;
}

inline std::string utc_now_iso8601() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

struct RenderOptions {
    ReportFormat format = ReportFormat::text;
    bool include_timestamp = true;
};

inline std::string render_report(const ComparisonReport& report, const RenderOptions& opts) {
    if (opts.format == ReportFormat::json) {
        nlohmann::ordered_json j;
        j["tool"] = "twinspect";
        j["tool_version"] = report.tool_version;
        if (opts.include_timestamp)
            j["generated_at"] = detail::utc_now_iso8601();
        j["inputs"] = {detail::descriptor_json(report.left),
                       detail::descriptor_json(report.right)};
        j["verdict"] = to_string(report.verdict);
        j["content_drift"] = report.content_drift;

        nlohmann::ordered_json parts;
        parts["left_count"] = report.partition_diff.left_count;
        parts["right_count"] = report.partition_diff.right_count;
        parts["count_equal"] = report.partition_diff.count_equal;
        parts["left"] = nlohmann::ordered_json::array();
        for (size_t i = 0; i < report.left_table.entries.size(); ++i)
            parts["left"].push_back(detail::partition_json(
                report.left_table.entries[i],
                i < report.left_digests.size() ? &report.left_digests[i] : nullptr));
        parts["right"] = nlohmann::ordered_json::array();
        for (size_t i = 0; i < report.right_table.entries.size(); ++i)
            parts["right"].push_back(detail::partition_json(
                report.right_table.entries[i],
                i < report.right_digests.size() ? &report.right_digests[i] : nullptr));
        parts["diff"] = nlohmann::ordered_json::array();
        for (const auto& rec : report.partition_diff.records) {
            nlohmann::ordered_json r;
            r["index"] = rec.index;
            r["status"] = to_string(rec.status);
            r["size_equal"] = rec.size_equal;
            r["type_equal"] = rec.type_equal;
            r["name_equal"] = rec.name_equal;
            r["label_equal"] = rec.label_equal;
            r["digest_equal"] = rec.digest_equal;
            if (!rec.detail.empty())
                r["detail"] = rec.detail;
            parts["diff"].push_back(std::move(r));
        }
        j["partitions"] = std::move(parts);

        j["tree_diffs"] = nlohmann::ordered_json::array();
        for (const auto& section : report.tree_sections) {
            nlohmann::ordered_json s;
            s["partition"] = section.index;
            s["label"] = section.label;
            if (!section.note.empty()) {
                s["note"] = section.note;
            } else {
                s["summary"] = {{"identical", section.summary.identical},
                                {"content_differs", section.summary.content_differs},
                                {"metadata_differs", section.summary.metadata_differs},
                                {"only_left", section.summary.only_left},
                                {"only_right", section.summary.only_right}};
                s["non_identical"] = nlohmann::ordered_json::array();
                for (const auto& e : section.non_identical) {
                    nlohmann::ordered_json entry;
                    entry["path"] = e.rel_path;
                    entry["status"] = to_string(e.status);
                    if (!e.detail.empty())
                        entry["detail"] = e.detail;
                    s["non_identical"].push_back(std::move(entry));
                }
                s["special_bit_diff"] = nlohmann::ordered_json::array();
                for (const auto& e : section.special_bit_diff) {
                    nlohmann::ordered_json entry;
                    entry["path"] = e.rel_path;
                    if (e.left_mode) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "%04o", *e.left_mode);
                        entry["left_mode"] = buf;
                    }
                    if (e.right_mode) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "%04o", *e.right_mode);
                        entry["right_mode"] = buf;
                    }
                    s["special_bit_diff"].push_back(std::move(entry));
                }
            }
            j["tree_diffs"].push_back(std::move(s));
        }

        j["findings"] = nlohmann::ordered_json::object();
        j["findings"]["left"] = nlohmann::ordered_json::array();
        for (const auto& f : report.left_findings)
            j["findings"]["left"].push_back(detail::finding_json(f));
        j["findings"]["right"] = nlohmann::ordered_json::array();
        for (const auto& f : report.right_findings)
            j["findings"]["right"].push_back(detail::finding_json(f));

        j["banners"] = nlohmann::ordered_json::object();
        j["banners"]["left"] = nlohmann::ordered_json::array();
        for (const auto& b : report.left_banners)
            j["banners"]["left"].push_back(detail::banner_json(b));
        j["banners"]["right"] = nlohmann::ordered_json::array();
        for (const auto& b : report.right_banners)
            j["banners"]["right"].push_back(detail::banner_json(b));
        if (report.banner_delta_result) {
            nlohmann::ordered_json d;
            d["seconds"] = report.banner_delta_result->seconds;
            d["fields_equal"] = report.banner_delta_result->fields_equal;
            j["banners"]["delta"] = std::move(d);
        }

        j["notes"] = report.notes;
        return j.dump(2) + "\n";
    }

    // Text format: digest lines, a partition table, banner lines.
    std::ostringstream out;
    out << "twinspect comparison report (v" << report.tool_version << ")\n";
    if (opts.include_timestamp)
        out << "generated: " << detail::utc_now_iso8601() << "\n";
    out << "\n";
    for (const auto* side : {&report.left, &report.right}) {
        out << side->digest << "  " << side->source_path << "\n";
        out << "    label " << side->label << ", compression " << to_string(side->compression)
            << ", " << side->decompressed_byte_size << " bytes\n";
    }
    out << "\nverdict: " << to_string(report.verdict) << "\n";

    if (!report.left_table.entries.empty() || !report.right_table.entries.empty()) {
        out << "\npartitions (" << report.partition_diff.left_count << " vs "
            << report.partition_diff.right_count << "):\n";
        out << "  IDX  NAME          SIZE    FSTYPE   LABEL         MATCH\n";
        for (const auto& rec : report.partition_diff.records) {
            const PartitionEntry* entry = nullptr;
            for (const auto& e : report.left_table.entries)
                if (e.index == rec.index)
                    entry = &e;
            if (!entry)
                for (const auto& e : report.right_table.entries)
                    if (e.index == rec.index)
                        entry = &e;
            char line[160];
            std::snprintf(line, sizeof line, "  %-4u %-13s %-7s %-8s %-13s %s",
                          rec.index, entry ? entry->name.c_str() : "-",
                          entry ? detail::human_size(entry->size_bytes).c_str() : "-",
                          entry ? to_string(entry->fs_kind) : "-",
                          entry && entry->fs_label ? entry->fs_label->c_str() : "-",
                          rec.status == PartitionDiffStatus::identical
                              ? "identical"
                              : rec.detail.c_str());
            out << line << "\n";
        }
    }

    for (const auto& section : report.tree_sections) {
        out << "\ntree diff, partition " << section.index;
        if (!section.label.empty())
            out << " (" << section.label << ")";
        out << ":\n";
        if (!section.note.empty()) {
            out << "  " << section.note << "\n";
            continue;
        }
        out << "  " << section.summary.identical << " identical, "
            << section.summary.content_differs << " content, "
            << section.summary.metadata_differs << " metadata, "
            << section.summary.only_left << " only-left, "
            << section.summary.only_right << " only-right\n";
        for (const auto& e : section.non_identical) {
            out << "  " << to_string(e.status) << "  " << e.rel_path;
            if (!e.detail.empty())
                out << "  [" << e.detail << "]";
            out << "\n";
        }
        if (!section.special_bit_diff.empty()) {
            out << "  special permission bits:\n";
            for (const auto& e : section.special_bit_diff) {
                auto mode_text = [](const std::optional<uint32_t>& m) {
                    if (!m)
                        return std::string("absent");
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "%04o", *m);
                    return std::string(buf);
                };
                out << "    " << e.rel_path << "  " << mode_text(e.left_mode) << " -> "
                    << mode_text(e.right_mode) << "\n";
            }
        } else {
            out << "  special permission bits: same on both sides\n";
        }
    }

    auto print_findings = [&](const char* tag, const std::vector<Finding>& findings) {
        out << "\nfindings (" << tag << "): " << findings.size() << "\n";
        for (const auto& f : findings) {
            out << "  [" << to_string(f.severity) << "] " << f.rule_id << "  " << f.subject();
            if (!f.cwe_ids.empty()) {
                out << "  CWE-";
                for (size_t i = 0; i < f.cwe_ids.size(); ++i)
                    out << (i ? "," : "") << f.cwe_ids[i];
            }
            out << "\n";
            std::istringstream ev(f.evidence);
            std::string line;
            while (std::getline(ev, line))
                out << "      | " << line << "\n";
            out << "      fix: " << f.recommendation << "\n";
        }
    };
    print_findings("left", report.left_findings);
    print_findings("right", report.right_findings);

    auto print_banners = [&](const char* tag, const std::vector<BuildBanner>& banners) {
        out << "\nkernel build banners (" << tag << "):\n";
        if (banners.empty())
            out << "  none found\n";
        for (const auto& b : banners)
            out << "  " << b.raw << "\n";
    };
    print_banners("left", report.left_banners);
    print_banners("right", report.right_banners);
    if (report.banner_delta_result) {
        const auto& d = *report.banner_delta_result;
        out << "build-time delta: " << (d.seconds >= 0 ? "+" : "") << d.seconds
            << " seconds (right - left)\n";
        out << "banner fields: ";
        bool first = true;
        for (const auto& [field, equal] : d.fields_equal) {
            out << (first ? "" : ", ") << field << (equal ? " equal" : " DIFFERS");
            first = false;
        }
        out << "\n";
    }

    if (!report.notes.empty()) {
        out << "\nnotes:\n";
        for (const auto& note : report.notes)
            out << "  - " << note << "\n";
    }
    return out.str();
}

namespace detail {

struct SideTree {
    bool walked = false;
    TreeSnapshot snapshot;
    std::string error;
};

inline SideTree try_walk(const std::shared_ptr<ByteSource>& image, const PartitionEntry& entry) {
    SideTree side;
    try {
        auto slice = std::make_shared<SliceSource>(image, entry.start_byte(), entry.size_bytes);
        Ext2Filesystem fs(slice);
        side.snapshot = fs.walk_tree();
        side.walked = true;
    } catch (const std::exception& e) {
        side.error = e.what();
    }
    return side;
}

inline std::vector<BuildBanner> scan_banners_in_range(const ByteSource& image,
                                                      const PartitionEntry& entry,
                                                      size_t min_len) {
    SliceSource slice(std::shared_ptr<const ByteSource>(&image, [](const ByteSource*) {}),
                      entry.start_byte(), entry.size_bytes);
    StringsOptions opts;
    opts.min_len = min_len;
    return find_build_banners(extract_strings(slice, opts));
}

} // namespace detail

// Full dual-image pipeline: whole-image digests, GPT parse + probe,
// per-partition hashes, file-level diffs of paired ext2 partitions,
// credential audits of each side, and kernel-banner extraction.
inline ComparisonReport build_comparison_report(const OpenedImage& left,
                                                const OpenedImage& right,
                                                const ReportOptions& opts = {}) {
    ComparisonReport report;
    report.left = left.descriptor;
    report.right = right.descriptor;

    if (left.descriptor.digest == right.descriptor.digest &&
        !left.descriptor.digest.empty()) {
        report.verdict = Verdict::identical;
        report.content_drift = false;
        report.notes.push_back("whole-image digests are equal; per-partition and file-level "
                               "analysis skipped");
        return report;
    }

    report.left_table = parse_gpt(*left.source);
    report.right_table = parse_gpt(*right.source);
    probe_all(*left.source, report.left_table);
    probe_all(*right.source, report.right_table);

    auto hash_side = [&](const std::shared_ptr<ByteSource>& source, const PartitionTable& table,
                         std::vector<std::string>& digests) {
        digests.assign(table.entries.size(), {});
        parallel_for(table.entries.size(), opts.jobs, [&](size_t i) {
            digests[i] = hash_partition(*source, table.entries[i]);
        });
    };
    hash_side(left.source, report.left_table, report.left_digests);
    hash_side(right.source, report.right_table, report.right_digests);
    report.partition_diff = diff_partition_tables(report.left_table, report.left_digests,
                                                  report.right_table, report.right_digests);

    bool content_drift = !report.partition_diff.count_equal;
    bool any_digest_drift = false;

    auto left_entry_by_index = [&](uint32_t idx) -> const PartitionEntry* {
        for (size_t i = 0; i < report.left_table.entries.size(); ++i)
            if (report.left_table.entries[i].index == idx)
                return &report.left_table.entries[i];
        return nullptr;
    };
    auto right_entry_by_index = [&](uint32_t idx) -> const PartitionEntry* {
        for (size_t i = 0; i < report.right_table.entries.size(); ++i)
            if (report.right_table.entries[i].index == idx)
                return &report.right_table.entries[i];
        return nullptr;
    };

    size_t banner_min_len = std::max<size_t>(opts.min_str_len, 16);
    bool creds_audited_left = false, creds_audited_right = false;

    for (const auto& rec : report.partition_diff.records) {
        if (rec.status == PartitionDiffStatus::only_left ||
            rec.status == PartitionDiffStatus::only_right) {
            content_drift = true;
            continue;
        }
        if (!rec.size_equal || !rec.type_equal || !rec.name_equal)
            content_drift = true;
        const PartitionEntry* le = left_entry_by_index(rec.index);
        const PartitionEntry* re = right_entry_by_index(rec.index);
        if (!le || !re)
            continue;
        bool both_ext2 = le->fs_kind == FsKind::ext2 && re->fs_kind == FsKind::ext2;

        if (rec.digest_equal) {
            // Identical bytes: nothing to walk, but a same-content ext2
            // root still gets its credential audit below.
        } else {
            any_digest_drift = true;
        }

        if (both_ext2) {
            auto lt = detail::try_walk(left.source, *le);
            auto rt = detail::try_walk(right.source, *re);
            PartitionTreeSection section;
            section.index = rec.index;
            section.label = le->fs_label.value_or(le->name);
            if (!lt.walked || !rt.walked) {
                section.note = "ext2 walk failed: " + (lt.walked ? rt.error : lt.error);
                report.tree_sections.push_back(std::move(section));
                content_drift = true;
                continue;
            }
            if (!rec.digest_equal) {
                auto diff = compare_trees(lt.snapshot.records, rt.snapshot.records,
                                          CompareOptions{opts.include_mtime});
                section.summary = diff.summary;
                for (auto& entry : diff.entries)
                    if (entry.status != DiffStatus::identical)
                        section.non_identical.push_back(entry);
                section.special_bit_diff =
                    compare_special_bits(lt.snapshot.records, rt.snapshot.records);
                if (diff.summary.content_differs || diff.summary.only_left ||
                    diff.summary.only_right)
                    content_drift = true;
                report.tree_sections.push_back(section);
            }

            // Credential audit from the first root-like tree on each side.
            auto audit_side = [&](const TreeSnapshot& snap,
                                  const std::shared_ptr<ByteSource>& source,
                                  const PartitionEntry& entry, std::vector<Finding>& findings,
                                  bool& done) {
                if (done)
                    return;
                bool has_passwd = false;
                for (const auto& r : snap.records)
                    if (r.rel_path == "etc/passwd")
                        has_passwd = true;
                if (!has_passwd)
                    return;
                try {
                    auto slice = std::make_shared<SliceSource>(source, entry.start_byte(),
                                                               entry.size_bytes);
                    Ext2Filesystem fs(slice);
                    auto read_text = [&](const char* path) {
                        std::string text;
                        auto ino = fs.resolve_path(path);
                        fs.read_file(ino, [&](std::span<const uint8_t> chunk) {
                            text.append(reinterpret_cast<const char*>(chunk.data()),
                                        chunk.size());
                        });
                        return text;
                    };
                    auto passwd = parse_passwd(read_text("/etc/passwd"));
                    std::string shadow_text;
                    try {
                        shadow_text = read_text("/etc/shadow");
                    } catch (const std::exception&) {
                    }
                    auto shadow = parse_shadow(shadow_text);
                    findings = audit_credentials(passwd.entries, shadow.entries, opts.policy);
                    for (const char* candidate :
                         {"/etc/ssh/sshd_config", "/etc/ssh/sshd.conf"}) {
                        try {
                            auto sshd = audit_sshd_config(read_text(candidate), opts.policy,
                                                          candidate + 1);
                            findings.insert(findings.end(), sshd.begin(), sshd.end());
                            break;
                        } catch (const std::exception&) {
                        }
                    }
                    detail::sort_findings(findings);
                    done = true;
                } catch (const std::exception&) {
                }
            };
            audit_side(lt.snapshot, left.source, *le, report.left_findings, creds_audited_left);
            audit_side(rt.snapshot, right.source, *re, report.right_findings,
                       creds_audited_right);

            // Kernel-like files inside the trees feed the banner scan.
            if (!rec.digest_equal) {
                auto scan_tree_kernels = [&](const TreeSnapshot& snap,
                                             const std::shared_ptr<ByteSource>& source,
                                             const PartitionEntry& entry,
                                             std::vector<BuildBanner>& banners) {
                    for (const auto& r : snap.records) {
                        if (r.kind != FileKind::file)
                            continue;
                        auto base = r.rel_path.rfind('/');
                        std::string name = base == std::string::npos
                                               ? r.rel_path
                                               : r.rel_path.substr(base + 1);
                        if (name.rfind("vmlinuz", 0) != 0)
                            continue;
                        try {
                            auto slice = std::make_shared<SliceSource>(
                                source, entry.start_byte(), entry.size_bytes);
                            Ext2Filesystem fs(slice);
                            auto ino = fs.resolve_path("/" + r.rel_path);
                            std::vector<uint8_t> content;
                            fs.read_file(ino, [&](std::span<const uint8_t> chunk) {
                                content.insert(content.end(), chunk.begin(), chunk.end());
                            });
                            StringsOptions sopts;
                            sopts.min_len = banner_min_len;
                            auto found = find_build_banners(
                                extract_strings(std::span<const uint8_t>(content), sopts));
                            banners.insert(banners.end(), found.begin(), found.end());
                        } catch (const std::exception&) {
                        }
                    }
                };
                scan_tree_kernels(lt.snapshot, left.source, *le, report.left_banners);
                scan_tree_kernels(rt.snapshot, right.source, *re, report.right_banners);
            }
        } else if (!rec.digest_equal) {
            content_drift = true; // opaque partition content changed
            if (le->fs_kind == FsKind::vfat || le->fs_kind == FsKind::unknown) {
                auto lb = detail::scan_banners_in_range(*left.source, *le, banner_min_len);
                auto rb = detail::scan_banners_in_range(*right.source, *re, banner_min_len);
                report.left_banners.insert(report.left_banners.end(), lb.begin(), lb.end());
                report.right_banners.insert(report.right_banners.end(), rb.begin(), rb.end());
            }
            PartitionTreeSection section;
            section.index = rec.index;
            section.label = le->fs_label.value_or(le->name);
            section.note = std::string("content differs; ") + to_string(le->fs_kind) +
                           " partitions are not walked (ext2 only) - host-mount to diff files";
            report.tree_sections.push_back(std::move(section));
        }
    }

    if (!report.left_banners.empty() && !report.right_banners.empty() &&
        report.left_banners[0].timestamp && report.right_banners[0].timestamp) {
        report.banner_delta_result =
            banner_delta(report.left_banners[0], report.right_banners[0]);
    }

    (void)any_digest_drift;
    report.content_drift = content_drift;
    bool findings_present = !report.left_findings.empty() || !report.right_findings.empty();
    if (findings_present)
        report.verdict = Verdict::findings_present;
    else if (content_drift)
        report.verdict = Verdict::content_drift;
    else
        report.verdict = Verdict::metadata_only_drift;
    return report;
}

} // namespace twinspect
