#pragma once

// Disk-image fixture builders shared by the unit and acceptance suites.
// All heavy lifting goes through external tools: the Python GPT/FAT16
// builders (independent of the C++ parsers) and mke2fs (the reference
// ext2 formatter).

#include <filesystem>
#include <string>

#include <json.hpp>

#include "support.hpp"

namespace testsupport {

inline std::string tools_dir() { return TWINSPECT_TEST_TOOLS_DIR; }

inline nlohmann::json build_gpt_image(const std::filesystem::path& img,
                                      const nlohmann::json& spec) {
    auto spec_path = img.string() + ".spec.json";
    write_file(spec_path, spec.dump());
    auto out = run_checked("python3 " + shell_quote(tools_dir() + "/make_gpt.py") + " " +
                           shell_quote(img.string()) + " " + shell_quote(spec_path));
    return nlohmann::json::parse(out.output);
}

// Formats a partition range in place by extract + mkfs + splice (loop
// devices are unavailable here).
inline void format_partition(const std::filesystem::path& img, uint64_t start_lba,
                             uint64_t size_bytes, const std::string& mkfs_cmd) {
    TempDir scratch("fmt");
    auto part = scratch / "part.bin";
    run_checked("dd if=" + shell_quote(img.string()) + " of=" + shell_quote(part.string()) +
                " bs=512 skip=" + std::to_string(start_lba) + " count=" +
                std::to_string(size_bytes / 512) + " status=none");
    run_checked(mkfs_cmd + " " + shell_quote(part.string()));
    run_checked("dd if=" + shell_quote(part.string()) + " of=" + shell_quote(img.string()) +
                " bs=512 seek=" + std::to_string(start_lba) + " conv=notrunc status=none");
}

inline void format_partition_ext2(const std::filesystem::path& img, uint64_t start_lba,
                                  uint64_t size_bytes, const std::string& label,
                                  const std::filesystem::path* populate = nullptr,
                                  const std::string& type = "ext2") {
    std::string cmd = "/sbin/mke2fs -q -F -t " + type + " -L " + shell_quote(label);
    if (type == "ext2")
        cmd += " -b 1024";
    if (populate)
        cmd += " -d " + shell_quote(populate->string());
    format_partition(img, start_lba, size_bytes, cmd);
}

// Formats an ext filesystem directly at a byte offset inside the image
// (mke2fs -E offset), which keeps sparse fixtures sparse.
inline void format_ext_at_offset(const std::filesystem::path& img, uint64_t offset_bytes,
                                 uint64_t size_bytes, const std::string& label,
                                 const std::string& type = "ext2") {
    std::string cmd = "/sbin/mke2fs -q -F -t " + type + " -L " + shell_quote(label);
    if (type == "ext2")
        cmd += " -b 1024";
    cmd += " -E offset=" + std::to_string(offset_bytes) + " " + shell_quote(img.string()) +
           " " + std::to_string(size_bytes / 1024) + "k";
    run_checked(cmd);
}

inline void write_fat16_partition(const std::filesystem::path& img, uint64_t start_lba,
                                  uint64_t size_bytes, const std::string& label,
                                  const std::string& serial_hex) {
    TempDir scratch("fat");
    auto fat = scratch / "fat.bin";
    run_checked("python3 " + shell_quote(tools_dir() + "/make_fat16.py") + " " +
                shell_quote(fat.string()) + " " + std::to_string(size_bytes) + " " +
                shell_quote(label) + " " + serial_hex);
    run_checked("dd if=" + shell_quote(fat.string()) + " of=" + shell_quote(img.string()) +
                " bs=512 seek=" + std::to_string(start_lba) + " conv=notrunc status=none");
}

} // namespace testsupport
