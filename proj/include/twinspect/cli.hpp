#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "twinspect/report.hpp"

namespace twinspect {

namespace cli_detail {

inline unsigned default_jobs() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : std::min(hw, 8u);
}

struct GlobalOptions {
    std::string format = "text";
    std::string policy_file;
    size_t min_str_len = 4;
    bool no_timestamp = false;
    unsigned jobs = default_jobs();
    RulePolicy policy;

    bool json() const { return format == "json"; }
    RenderOptions render() const {
        return {json() ? ReportFormat::json : ReportFormat::text, !no_timestamp};
    }
};

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// "disk.img:part3" addresses one partition of an image. A real file whose
// name happens to contain ":part" wins over the split.
inline std::optional<std::pair<std::string, uint32_t>> split_partition_ref(
    const std::string& spec) {
    if (std::filesystem::exists(spec))
        return std::nullopt;
    static const std::regex ref_re(R"(^(.+):part([0-9]+)$)");
    std::smatch m;
    if (!std::regex_match(spec, m, ref_re))
        return std::nullopt;
    return std::make_pair(m[1].str(), static_cast<uint32_t>(std::stoul(m[2].str())));
}

struct PartitionHandle {
    OpenedImage image;
    PartitionEntry entry;
    std::shared_ptr<SliceSource> slice;
};

inline PartitionHandle open_partition(const std::string& image_path, uint32_t part_index,
                                      const GlobalOptions& opts) {
    PartitionHandle h;
    ImageOpenOptions io;
    io.compute_digest = false;
    (void)opts;
    h.image = open_image(image_path, io);
    auto table = parse_gpt(*h.image.source);
    const PartitionEntry* found = nullptr;
    for (auto& e : table.entries)
        if (e.index == part_index)
            found = &e;
    if (!found)
        throw gpt_error("image has no partition " + std::to_string(part_index));
    h.entry = *found;
    probe_filesystem(*h.image.source, h.entry);
    if (h.entry.fs_kind != FsKind::ext2)
        throw ext2_error("partition " + std::to_string(part_index) + " is " +
                         to_string(h.entry.fs_kind) +
                         ", not ext2; host-mount it and pass the directory instead");
    h.slice = std::make_shared<SliceSource>(h.image.source, h.entry.start_byte(),
                                            h.entry.size_bytes);
    return h;
}

// Tree sources: a directory (host walk), image:partN (ext2 walk), or a
// snapshot file in the tab-separated interchange format.
inline TreeSnapshot load_tree(const std::string& spec, const GlobalOptions& opts) {
    if (auto ref = split_partition_ref(spec)) {
        auto handle = open_partition(ref->first, ref->second, opts);
        Ext2Filesystem fs(handle.slice);
        return fs.walk_tree();
    }
    std::filesystem::path path(spec);
    if (std::filesystem::is_directory(path))
        return snapshot_tree(path, opts.jobs);
    if (std::filesystem::is_regular_file(path))
        return parse_snapshot(read_text_file(path));
    throw io_error("tree source not found: " + spec);
}

struct CredInput {
    std::string passwd_text;
    std::string shadow_text;
    std::optional<std::string> sshd_text;
    std::string sshd_name = "etc/ssh/sshd_config";
};

inline CredInput load_cred_root(const std::string& spec, const GlobalOptions& opts) {
    CredInput in;
    if (auto ref = split_partition_ref(spec)) {
        auto handle = open_partition(ref->first, ref->second, opts);
        Ext2Filesystem fs(handle.slice);
        auto read = [&](const char* p) {
            std::string text;
            auto ino = fs.resolve_path(p);
            fs.read_file(ino, [&](std::span<const uint8_t> chunk) {
                text.append(reinterpret_cast<const char*>(chunk.data()), chunk.size());
            });
            return text;
        };
        in.passwd_text = read("/etc/passwd");
        in.shadow_text = read("/etc/shadow");
        for (const char* candidate : {"/etc/ssh/sshd_config", "/etc/ssh/sshd.conf"}) {
            try {
                in.sshd_text = read(candidate);
                in.sshd_name = candidate + 1;
                break;
            } catch (const ext2_error&) {
            }
        }
        return in;
    }
    std::filesystem::path root(spec);
    if (!std::filesystem::is_directory(root))
        throw io_error("audit root not found or not a directory: " + spec);
    in.passwd_text = read_text_file(root / "etc" / "passwd");
    in.shadow_text = read_text_file(root / "etc" / "shadow");
    for (const char* candidate : {"etc/ssh/sshd_config", "etc/ssh/sshd.conf"}) {
        if (std::filesystem::is_regular_file(root / candidate)) {
            in.sshd_text = read_text_file(root / candidate);
            in.sshd_name = candidate;
            break;
        }
    }
    return in;
}

inline nlohmann::ordered_json findings_json(const std::vector<Finding>& findings) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : findings)
        arr.push_back(detail::finding_json(f));
    return arr;
}

inline void print_findings_text(std::ostream& out, const std::vector<Finding>& findings) {
    out << "findings: " << findings.size() << "\n";
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
}

inline int run_hash(const std::string& path, const GlobalOptions& opts, std::ostream& out) {
    auto image = open_image(path);
    if (opts.json()) {
        out << detail::descriptor_json(image.descriptor).dump(2) << "\n";
    } else {
        out << image.descriptor.digest << "  " << image.descriptor.source_path << "\n";
        out << "compression: " << to_string(image.descriptor.compression) << "\n";
        out << "size: " << image.descriptor.decompressed_byte_size << " bytes\n";
    }
    return 0;
}

inline int run_partitions(const std::string& path, const GlobalOptions& opts,
                          std::ostream& out) {
    ImageOpenOptions io;
    io.compute_digest = false;
    auto image = open_image(path, io);
    auto table = parse_gpt(*image.source);
    probe_all(*image.source, table);
    if (opts.json()) {
        nlohmann::ordered_json j;
        j["path"] = image.descriptor.source_path;
        j["sector_size"] = table.sector_size;
        j["disk_guid"] = table.disk_guid;
        j["header_crc_ok"] = table.header_crc_ok;
        j["used_backup_header"] = table.used_backup_header;
        j["partitions"] = nlohmann::ordered_json::array();
        for (const auto& e : table.entries)
            j["partitions"].push_back(detail::partition_json(e, nullptr));
        out << j.dump(2) << "\n";
    } else {
        out << "disk " << table.disk_guid << ", " << table.entries.size()
            << " partitions, sector size " << table.sector_size << "\n";
        if (!table.header_crc_ok)
            out << "warning: primary header CRC failed; backup header in use\n";
        out << "IDX   NAME          SIZE    FSTYPE   LABEL         UUID\n";
        for (const auto& e : table.entries) {
            char line[200];
            std::snprintf(line, sizeof line, "%-5u %-13s %-7s %-8s %-13s %s", e.index,
                          e.name.c_str(), detail::human_size(e.size_bytes).c_str(),
                          to_string(e.fs_kind), e.fs_label ? e.fs_label->c_str() : "-",
                          e.fs_uuid ? e.fs_uuid->c_str() : "-");
            out << line << "\n";
        }
    }
    return 0;
}

inline int run_part_hash(const std::string& path, const GlobalOptions& opts,
                         std::ostream& out) {
    ImageOpenOptions io;
    io.compute_digest = false;
    auto image = open_image(path, io);
    auto table = parse_gpt(*image.source);
    std::vector<std::string> digests(table.entries.size());
    parallel_for(table.entries.size(), opts.jobs, [&](size_t i) {
        digests[i] = hash_partition(*image.source, table.entries[i]);
    });
    if (opts.json()) {
        auto arr = nlohmann::ordered_json::array();
        for (size_t i = 0; i < table.entries.size(); ++i) {
            nlohmann::ordered_json j;
            j["index"] = table.entries[i].index;
            j["name"] = table.entries[i].name;
            j["size_bytes"] = table.entries[i].size_bytes;
            j["sha256"] = digests[i];
            arr.push_back(std::move(j));
        }
        out << arr.dump(2) << "\n";
    } else {
        for (size_t i = 0; i < table.entries.size(); ++i) {
            char line[160];
            std::snprintf(line, sizeof line, "%-5u %s  %s", table.entries[i].index,
                          digests[i].c_str(), table.entries[i].name.c_str());
            out << line << "\n";
        }
    }
    return 0;
}

inline int run_tree_snapshot(const std::string& spec, const GlobalOptions& opts,
                             std::ostream& out) {
    auto snap = load_tree(spec, opts);
    if (opts.json()) {
        nlohmann::ordered_json j;
        j["records"] = nlohmann::ordered_json::array();
        for (const auto& r : snap.records) {
            nlohmann::ordered_json rec;
            rec["path"] = r.rel_path;
            rec["kind"] = to_string(r.kind);
            char mode[8];
            std::snprintf(mode, sizeof mode, "%04o", r.mode);
            rec["mode"] = mode;
            rec["uid"] = r.uid;
            rec["gid"] = r.gid;
            rec["size"] = r.size_bytes;
            if (r.digest)
                rec["sha256"] = *r.digest;
            if (r.symlink_target)
                rec["target"] = *r.symlink_target;
            j["records"].push_back(std::move(rec));
        }
        j["errors"] = nlohmann::ordered_json::array();
        for (const auto& e : snap.errors)
            j["errors"].push_back({{"path", e.rel_path}, {"message", e.message}});
        out << j.dump(2) << "\n";
    } else {
        out << serialize_snapshot(snap.records);
        for (const auto& e : snap.errors)
            std::cerr << "snapshot error: " << e.rel_path << ": " << e.message << "\n";
    }
    return 0;
}

inline int run_tree_diff(const std::string& left_spec, const std::string& right_spec,
                         bool include_mtime, const GlobalOptions& opts, std::ostream& out) {
    auto left = load_tree(left_spec, opts);
    auto right = load_tree(right_spec, opts);
    CompareOptions copts;
    copts.include_mtime = include_mtime;
    auto diff = compare_trees(left.records, right.records, copts);
    auto special = compare_special_bits(left.records, right.records);

    if (opts.json()) {
        nlohmann::ordered_json j;
        j["left"] = left_spec;
        j["right"] = right_spec;
        j["summary"] = {{"identical", diff.summary.identical},
                        {"content_differs", diff.summary.content_differs},
                        {"metadata_differs", diff.summary.metadata_differs},
                        {"only_left", diff.summary.only_left},
                        {"only_right", diff.summary.only_right}};
        j["non_identical"] = nlohmann::ordered_json::array();
        for (const auto& e : diff.entries) {
            if (e.status == DiffStatus::identical)
                continue;
            nlohmann::ordered_json entry;
            entry["path"] = e.rel_path;
            entry["status"] = to_string(e.status);
            if (!e.detail.empty())
                entry["detail"] = e.detail;
            j["non_identical"].push_back(std::move(entry));
        }
        j["special_bit_diff"] = nlohmann::ordered_json::array();
        for (const auto& e : special) {
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
            j["special_bit_diff"].push_back(std::move(entry));
        }
        out << j.dump(2) << "\n";
    } else {
        out << diff.summary.identical << " identical, " << diff.summary.content_differs
            << " content, " << diff.summary.metadata_differs << " metadata, "
            << diff.summary.only_left << " only-left, " << diff.summary.only_right
            << " only-right\n";
        for (const auto& e : diff.entries) {
            if (e.status == DiffStatus::identical)
                continue;
            out << to_string(e.status) << "  " << e.rel_path;
            if (!e.detail.empty())
                out << "  [" << e.detail << "]";
            out << "\n";
        }
        if (special.empty()) {
            out << "special permission bits: same on both sides\n";
        } else {
            out << "special permission bits:\n";
            for (const auto& e : special) {
                auto text = [](const std::optional<uint32_t>& m) {
                    if (!m)
                        return std::string("absent");
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "%04o", *m);
                    return std::string(buf);
                };
                out << "  " << e.rel_path << "  " << text(e.left_mode) << " -> "
                    << text(e.right_mode) << "\n";
            }
        }
    }
    bool drift = diff.summary.content_differs || diff.summary.only_left ||
                 diff.summary.only_right;
    return drift ? 1 : 0;
}

inline int run_audit_creds(const std::string& spec, const GlobalOptions& opts,
                           std::ostream& out) {
    auto input = load_cred_root(spec, opts);
    auto passwd = parse_passwd(input.passwd_text);
    auto shadow = parse_shadow(input.shadow_text);
    auto findings = audit_credentials(passwd.entries, shadow.entries, opts.policy);
    if (input.sshd_text) {
        auto sshd = audit_sshd_config(*input.sshd_text, opts.policy, input.sshd_name);
        findings.insert(findings.end(), sshd.begin(), sshd.end());
        detail::sort_findings(findings);
    }

    if (opts.json()) {
        nlohmann::ordered_json j;
        j["root"] = spec;
        j["findings"] = findings_json(findings);
        j["parse_errors"] = nlohmann::ordered_json::array();
        for (const auto* parsed_errors : {&passwd.errors, &shadow.errors})
            for (const auto& e : *parsed_errors)
                j["parse_errors"].push_back({{"line", e.line_number}, {"message", e.message}});
        out << j.dump(2) << "\n";
    } else {
        print_findings_text(out, findings);
        for (const auto* parsed_errors : {&passwd.errors, &shadow.errors})
            for (const auto& e : *parsed_errors)
                out << "parse error at line " << e.line_number << ": " << e.message << "\n";
    }
    for (const auto& f : findings)
        if (f.severity == Severity::critical)
            return 1;
    return 0;
}

inline int run_binmeta(const std::string& path, bool dump_strings, const GlobalOptions& opts,
                       std::ostream& out) {
    FileSource src(path);
    StringsOptions sopts;
    sopts.min_len = opts.min_str_len;
    auto hits = extract_strings(src, sopts);
    auto banners = find_build_banners(hits);

    if (opts.json()) {
        nlohmann::ordered_json j;
        j["path"] = path;
        j["size_bytes"] = src.size();
        j["sha256"] = hash_bytes(src);
        j["strings_count"] = hits.size();
        j["min_str_len"] = opts.min_str_len;
        j["banners"] = nlohmann::ordered_json::array();
        for (const auto& b : banners)
            j["banners"].push_back(detail::banner_json(b));
        if (dump_strings) {
            j["strings"] = nlohmann::ordered_json::array();
            for (const auto& h : hits)
                j["strings"].push_back({{"offset", h.offset}, {"text", h.text}});
        }
        out << j.dump(2) << "\n";
    } else {
        out << src.size() << "\t" << path << "\n";
        out << "sha256: " << hash_bytes(src) << "\n";
        out << "printable strings (min " << opts.min_str_len << "): " << hits.size()
            << " hits\n";
        if (banners.empty())
            out << "build banners: none found\n";
        for (const auto& b : banners) {
            out << "build banner: " << b.raw << "\n";
            if (b.timestamp)
                out << "  built " << b.timestamp_text << " by " << b.builder_user << "@"
                    << b.build_host << " (#" << b.build_number << ")\n";
            else
                out << "  warning: " << b.parse_warning << "\n";
        }
        if (dump_strings)
            for (const auto& h : hits) {
                char line[32];
                std::snprintf(line, sizeof line, "%8llu  ",
                              static_cast<unsigned long long>(h.offset));
                out << line << h.text << "\n";
            }
    }
    return 0;
}

inline int run_compare(const std::string& left_path, const std::string& right_path,
                       bool include_mtime, const GlobalOptions& opts, std::ostream& out) {
    auto left = open_image(left_path);
    auto right = open_image(right_path);

    ReportOptions ropts;
    ropts.policy = opts.policy;
    ropts.min_str_len = opts.min_str_len;
    ropts.jobs = opts.jobs;
    ropts.include_mtime = include_mtime;
    auto report = build_comparison_report(left, right, ropts);
    out << render_report(report, opts.render());
    return exit_code_for(report);
}

} // namespace cli_detail

// Command-line front end. Returns the process exit code: 0 clean, 1 for
// critical findings or content drift, 2 usage errors, 3 input failures.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    GlobalOptions opts;

    CLI::App app{"differential forensic auditor for OS disk images"};
    app.set_version_flag("--version", std::string("twinspect ") + kVersion);
    app.option_defaults()->always_capture_default();
    app.add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"json", "text"}));
    app.add_option("--policy", opts.policy_file, "rule policy file (key=value)");
    app.add_option("--min-str-len", opts.min_str_len, "minimum printable-string length")
        ->check(CLI::PositiveNumber);
    app.add_flag("--no-timestamp", opts.no_timestamp, "omit timestamps from reports");
    app.add_option("--jobs", opts.jobs, "worker threads for hashing")
        ->check(CLI::PositiveNumber);
    app.require_subcommand(1);

    std::string arg_a, arg_b;
    bool include_mtime = false;
    bool dump_strings = false;

    auto* hash_cmd = app.add_subcommand("hash", "digest a raw or xz-compressed image");
    hash_cmd->add_option("image", arg_a, "image path")->required();
    auto* parts_cmd = app.add_subcommand("partitions", "parse and probe the GPT");
    parts_cmd->add_option("image", arg_a, "image path")->required();
    auto* phash_cmd = app.add_subcommand("part-hash", "hash every partition's byte range");
    phash_cmd->add_option("image", arg_a, "image path")->required();
    auto* snap_cmd = app.add_subcommand("tree-snapshot",
                                        "snapshot a directory or image:partN into records");
    snap_cmd->add_option("source", arg_a, "directory | image:partN")->required();
    auto* tdiff_cmd = app.add_subcommand("tree-diff", "compare two tree sources");
    tdiff_cmd->add_option("left", arg_a, "directory | image:partN | snapshot file")->required();
    tdiff_cmd->add_option("right", arg_b, "directory | image:partN | snapshot file")
        ->required();
    tdiff_cmd->add_flag("--mtime", include_mtime, "include mtime in metadata comparison");
    auto* audit_cmd = app.add_subcommand("audit-creds",
                                         "audit passwd/shadow/sshd under a root");
    audit_cmd->add_option("root", arg_a, "directory | image:partN")->required();
    auto* bin_cmd = app.add_subcommand("binmeta", "strings, build banners, size of a binary");
    bin_cmd->add_option("file", arg_a, "binary file")->required();
    bin_cmd->add_flag("--strings", dump_strings, "dump every printable-string hit");
    auto* cmp_cmd = app.add_subcommand("compare", "full dual-image comparison pipeline");
    cmp_cmd->add_option("left", arg_a, "image path")->required();
    cmp_cmd->add_option("right", arg_b, "image path")->required();
    cmp_cmd->add_flag("--mtime", include_mtime, "include mtime in metadata comparison");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << app.version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }

    try {
        if (!opts.policy_file.empty())
            opts.policy = parse_policy(read_text_file(opts.policy_file));

        if (hash_cmd->parsed())
            return run_hash(arg_a, opts, out);
        if (parts_cmd->parsed())
            return run_partitions(arg_a, opts, out);
        if (phash_cmd->parsed())
            return run_part_hash(arg_a, opts, out);
        if (snap_cmd->parsed())
            return run_tree_snapshot(arg_a, opts, out);
        if (tdiff_cmd->parsed())
            return run_tree_diff(arg_a, arg_b, include_mtime, opts, out);
        if (audit_cmd->parsed())
            return run_audit_creds(arg_a, opts, out);
        if (bin_cmd->parsed())
            return run_binmeta(arg_a, dump_strings, opts, out);
        if (cmp_cmd->parsed())
            return run_compare(arg_a, arg_b, include_mtime, opts, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
    err << "no subcommand\n";
    return 2;
}

} // namespace twinspect
