#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include <json.hpp>

#include "twinspect/gpt.hpp"
#include "twinspect/report.hpp"
#include "twinspect/image_io.hpp"

#include "fixtures.hpp"
#include "support.hpp"

using namespace twinspect;
using namespace testsupport;
using nlohmann::json;

namespace {

json build_gpt(const std::filesystem::path& img, const json& spec) {
    auto spec_path = img.string() + ".spec.json";
    write_file(spec_path, spec.dump());
    auto out = run_checked("python3 " + shell_quote(tools_dir() + "/make_gpt.py") + " " +
                           shell_quote(img.string()) + " " + shell_quote(spec_path));
    return json::parse(out.output);
}

void patch(const std::filesystem::path& img, uint64_t offset, std::vector<uint8_t> bytes) {
    std::fstream f(img, std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(f.good());
    f.seekp(static_cast<std::streamoff>(offset));
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// Formats a partition range by extracting it, running the formatter, and
// splicing the result back (no loop devices in this environment).
void format_range(const std::filesystem::path& img, uint64_t start_byte, uint64_t len,
                  const std::string& mkfs_cmd) {
    TempDir scratch("fmt");
    auto part = scratch / "part.bin";
    run_checked("dd if=" + shell_quote(img.string()) + " of=" + shell_quote(part.string()) +
                " bs=512 skip=" + std::to_string(start_byte / 512) + " count=" +
                std::to_string(len / 512) + " status=none");
    run_checked(mkfs_cmd + " " + shell_quote(part.string()));
    run_checked("dd if=" + shell_quote(part.string()) + " of=" + shell_quote(img.string()) +
                " bs=512 seek=" + std::to_string(start_byte / 512) + " conv=notrunc status=none");
}

} // namespace

TEST_CASE("parse_gpt reproduces the builder's listing exactly", "[gpt]") {
    TempDir dir;
    auto img = dir / "three.img";
    json spec = {
        {"size_mib", 16},
        {"seed", 3},
        {"partitions",
         {{{"name", "STATE"}, {"size_bytes", 4 << 20}, {"type", "linux"}},
          {{"name", "ROOT-A"}, {"size_bytes", 6 << 20}, {"type", "cros_rootfs"}},
          {{"name", "EFI-SYSTEM"}, {"size_bytes", 2 << 20}, {"type", "efi"}}}},
    };
    json listing = build_gpt(img, spec);

    FileSource src(img);
    auto table = parse_gpt(src);
    CHECK(table.header_crc_ok);
    CHECK_FALSE(table.used_backup_header);
    CHECK(table.sector_size == 512);
    CHECK(table.disk_guid == listing["disk_guid"].get<std::string>());

    REQUIRE(table.entries.size() == listing["partitions"].size());
    for (size_t i = 0; i < table.entries.size(); ++i) {
        const auto& mine = table.entries[i];
        const auto& expect = listing["partitions"][i];
        CHECK(mine.index == expect["index"].get<uint32_t>());
        CHECK(mine.start_lba == expect["start_lba"].get<uint64_t>());
        CHECK(mine.end_lba == expect["end_lba"].get<uint64_t>());
        CHECK(mine.size_bytes == expect["size_bytes"].get<uint64_t>());
        CHECK(mine.name == expect["name"].get<std::string>());
        CHECK(mine.type_guid == expect["type_guid"].get<std::string>());
        CHECK(mine.unique_guid == expect["unique_guid"].get<std::string>());
        CHECK(mine.size_bytes == (mine.end_lba - mine.start_lba + 1) * 512);
    }
}

TEST_CASE("single-partition image parses to one matching entry", "[gpt]") {
    TempDir dir;
    auto img = dir / "one.img";
    json listing = build_gpt(
        img, {{"size_mib", 4},
              {"seed", 9},
              {"partitions", {{{"name", "data"}, {"size_bytes", 1 << 20}, {"type", "linux"}}}}});
    FileSource src(img);
    auto table = parse_gpt(src);
    REQUIRE(table.entries.size() == 1);
    CHECK(table.entries[0].name == "data");
    CHECK(table.entries[0].start_lba == listing["partitions"][0]["start_lba"].get<uint64_t>());
}

TEST_CASE("non-GPT inputs are classified, not misparsed", "[gpt]") {
    TempDir dir;

    SECTION("zero-byte and tiny images") {
        auto img = dir / "empty.img";
        write_file(img, std::string{});
        FileSource src(img);
        CHECK_THROWS_AS(parse_gpt(src), gpt_error);
    }

    SECTION("random garbage") {
        std::mt19937 rng(5);
        auto img = dir / "garbage.img";
        write_file(img, random_bytes(rng, 1 << 20));
        FileSource src(img);
        try {
            parse_gpt(src);
            FAIL("expected no-GPT error");
        } catch (const gpt_error& e) {
            CHECK(std::string(e.what()).find("no GPT found") != std::string::npos);
        }
    }

    SECTION("MBR-only disk is distinguished from garbage") {
        std::vector<uint8_t> mbr(1 << 20, 0);
        mbr[446 + 4] = 0x83; // one Linux MBR partition
        mbr[446 + 8] = 2048 & 0xFF;
        mbr[510] = 0x55;
        mbr[511] = 0xAA;
        auto img = dir / "mbr.img";
        write_file(img, mbr);
        FileSource src(img);
        try {
            parse_gpt(src);
            FAIL("expected MBR-only error");
        } catch (const gpt_error& e) {
            CHECK(std::string(e.what()).find("MBR partition table only") != std::string::npos);
        }
    }

    SECTION("4096-byte-sector GPT is rejected with a clear error") {
        std::vector<uint8_t> img_bytes(1 << 20, 0);
        std::memcpy(img_bytes.data() + 4096, "EFI PART", 8);
        auto img = dir / "sector4k.img";
        write_file(img, img_bytes);
        FileSource src(img);
        try {
            parse_gpt(src);
            FAIL("expected 4096-sector rejection");
        } catch (const gpt_error& e) {
            CHECK(std::string(e.what()).find("4096") != std::string::npos);
        }
    }
}

TEST_CASE("corrupt headers fall back or fail with the right message", "[gpt]") {
    TempDir dir;
    json spec = {{"size_mib", 8},
                 {"seed", 4},
                 {"partitions",
                  {{{"name", "p1"}, {"size_bytes", 1 << 20}, {"type", "linux"}},
                   {{"name", "p2"}, {"size_bytes", 1 << 20}, {"type", "basic_data"}}}}};

    SECTION("primary header damage falls back to the backup") {
        auto img = dir / "priharm.img";
        json listing = build_gpt(img, spec);
        patch(img, 512 + 40, {0xFF, 0xFF}); // corrupt first_usable in the primary
        FileSource src(img);
        auto table = parse_gpt(src);
        CHECK_FALSE(table.header_crc_ok);
        CHECK(table.used_backup_header);
        REQUIRE(table.entries.size() == 2);
        CHECK(table.entries[0].name == "p1");
        CHECK(table.disk_guid == listing["disk_guid"].get<std::string>());
    }

    SECTION("both headers damaged names the header CRC") {
        auto img = dir / "bothharm.img";
        build_gpt(img, spec);
        patch(img, 512 + 40, {0xFF, 0xFF});
        uint64_t last = std::filesystem::file_size(img) - 512;
        patch(img, last + 40, {0xFF, 0xFF});
        FileSource src(img);
        try {
            parse_gpt(src);
            FAIL("expected CRC error");
        } catch (const gpt_error& e) {
            CHECK(std::string(e.what()).find("header CRC") != std::string::npos);
        }
    }

    SECTION("entry array damage names the entry-array CRC") {
        auto img = dir / "entryharm.img";
        build_gpt(img, spec);
        patch(img, 2 * 512 + 32, {0xAA}); // flip a byte inside entry 0
        FileSource src(img);
        try {
            parse_gpt(src);
            FAIL("expected entry CRC error");
        } catch (const gpt_error& e) {
            CHECK(std::string(e.what()).find("entry-array CRC") != std::string::npos);
        }
    }
}

TEST_CASE("probe_filesystem never errors and identifies formatter output", "[gpt]") {
    TempDir dir;
    auto img = dir / "probe.img";
    json listing = build_gpt(
        img,
        {{"size_mib", 48},
         {"seed", 7},
         {"partitions",
          {{{"name", "ROOT-A"}, {"size_bytes", 8 << 20}, {"type", "cros_rootfs"}},
           {{"name", "OEM"}, {"size_bytes", 8 << 20}, {"type", "linux"}},
           {{"name", "EFI-SYSTEM"}, {"size_bytes", 8 << 20}, {"type", "efi"}},
           {{"name", "zeros"}, {"size_bytes", 2 << 20}, {"type", "basic_data"}},
           {{"name", "noise"}, {"size_bytes", 1 << 20}, {"type", "basic_data"}}}}});

    FileSource pre(img);
    auto table = parse_gpt(pre);
    REQUIRE(table.entries.size() == 5);

    format_range(img, table.entries[0].start_byte(), table.entries[0].size_bytes,
                 "/sbin/mke2fs -q -F -t ext2 -b 1024 -L ROOT-A");
    format_range(img, table.entries[1].start_byte(), table.entries[1].size_bytes,
                 "/sbin/mke2fs -q -F -t ext4 -L OEM");
    {
        TempDir scratch("fat");
        auto fat = scratch / "fat.bin";
        run_checked("python3 " + shell_quote(tools_dir() + "/make_fat16.py") + " " +
                    shell_quote(fat.string()) + " " +
                    std::to_string(table.entries[2].size_bytes) + " EFI-SYSTEM 29DEF214");
        run_checked("dd if=" + shell_quote(fat.string()) + " of=" + shell_quote(img.string()) +
                    " bs=512 seek=" + std::to_string(table.entries[2].start_lba) +
                    " conv=notrunc status=none");
    }
    {
        std::mt19937 rng(17);
        auto noise = random_bytes(rng, 1 << 20);
        std::fstream f(img, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(static_cast<std::streamoff>(table.entries[4].start_byte()));
        f.write(reinterpret_cast<const char*>(noise.data()),
                static_cast<std::streamsize>(noise.size()));
    }

    FileSource src(img);
    table = parse_gpt(src);
    probe_all(src, table);

    CHECK(table.entries[0].fs_kind == FsKind::ext2);
    CHECK(table.entries[0].fs_label == "ROOT-A");
    CHECK(table.entries[1].fs_kind == FsKind::ext4);
    CHECK(table.entries[1].fs_label == "OEM");
    CHECK(table.entries[2].fs_kind == FsKind::vfat);
    CHECK(table.entries[2].fs_label == "EFI-SYSTEM");
    CHECK(table.entries[2].fs_uuid == "29DE-F214");
    CHECK(table.entries[3].fs_kind == FsKind::empty);
    CHECK(table.entries[4].fs_kind == FsKind::unknown);

    // blkid, run on each extracted range, is the probe oracle.
    for (size_t i = 0; i < 3; ++i) {
        TempDir scratch("oracle");
        auto part = scratch / "part.bin";
        run_checked("dd if=" + shell_quote(img.string()) + " of=" + shell_quote(part.string()) +
                    " bs=512 skip=" + std::to_string(table.entries[i].start_lba) + " count=" +
                    std::to_string(table.entries[i].size_bytes / 512) + " status=none");
        auto blkid = run_checked("/sbin/blkid -p " + shell_quote(part.string())).output;
        std::string fstype = std::string("TYPE=\"") + to_string(table.entries[i].fs_kind) + "\"";
        CHECK(blkid.find(fstype) != std::string::npos);
        REQUIRE(table.entries[i].fs_label.has_value());
        CHECK(blkid.find("LABEL=\"" + *table.entries[i].fs_label + "\"") != std::string::npos);
    }
}

TEST_CASE("hash_partition hashes exactly the partition range", "[gpt]") {
    TempDir dir;
    std::mt19937 rng(23);

    SECTION("a range covering the whole image equals the whole-image digest") {
        auto img = dir / "whole.img";
        write_file(img, random_bytes(rng, 1 << 20));
        FileSource src(img);
        PartitionEntry whole;
        whole.index = 1;
        whole.start_lba = 0;
        whole.end_lba = (1 << 20) / 512 - 1;
        whole.size_bytes = 1 << 20;
        CHECK(hash_partition(src, whole) == hash_bytes(src));
    }

    SECTION("a one-byte flip changes exactly the containing partition's digest") {
        auto img = dir / "flip.img";
        json listing = build_gpt(
            img, {{"size_mib", 8},
                  {"seed", 11},
                  {"partitions",
                   {{{"name", "a"}, {"size_bytes", 1 << 20}, {"type", "linux"}},
                    {{"name", "b"}, {"size_bytes", 1 << 20}, {"type", "linux"}},
                    {{"name", "c"}, {"size_bytes", 1 << 20}, {"type", "linux"}}}}});
        FileSource before(img);
        auto table = parse_gpt(before);
        std::vector<std::string> before_digests;
        for (const auto& e : table.entries)
            before_digests.push_back(hash_partition(before, e));

        // Flip one byte in the middle of partition 2 (index 1).
        uint64_t victim = table.entries[1].start_byte() + table.entries[1].size_bytes / 2;
        auto original = FileSource(img).read_range(victim, 1);
        patch(img, victim, {static_cast<uint8_t>(original[0] ^ 0x5A)});

        FileSource after(img);
        std::vector<std::string> after_digests;
        for (const auto& e : table.entries)
            after_digests.push_back(hash_partition(after, e));

        CHECK(before_digests[0] == after_digests[0]);
        CHECK(before_digests[1] != after_digests[1]);
        CHECK(before_digests[2] == after_digests[2]);

        // Independent range-extract + sha256sum pipeline agrees.
        for (size_t i = 0; i < table.entries.size(); ++i) {
            auto cmd = "dd if=" + shell_quote(img.string()) + " bs=512 skip=" +
                       std::to_string(table.entries[i].start_lba) + " count=" +
                       std::to_string(table.entries[i].size_bytes / 512) +
                       " status=none | sha256sum";
            CHECK(run_checked(cmd).output.substr(0, 64) == after_digests[i]);
        }
    }
}

TEST_CASE("diff_partition_tables pairs by index", "[gpt]") {
    TempDir dir;
    auto img = dir / "diffme.img";
    json spec = {{"size_mib", 8},
                 {"seed", 21},
                 {"partitions",
                  {{{"name", "a"}, {"size_bytes", 1 << 20}, {"type", "linux"}},
                   {{"name", "b"}, {"size_bytes", 1 << 20}, {"type", "linux"}}}}};
    build_gpt(img, spec);
    FileSource src(img);
    auto table = parse_gpt(src);
    std::vector<std::string> digests;
    for (const auto& e : table.entries)
        digests.push_back(hash_partition(src, e));

    SECTION("a table against itself is identical per index") {
        auto diff = diff_partition_tables(table, digests, table, digests);
        REQUIRE(diff.records.size() == 2);
        CHECK(diff.count_equal);
        for (const auto& rec : diff.records)
            CHECK(rec.status == PartitionDiffStatus::identical);
    }

    SECTION("every digest differing yields content records per index") {
        std::vector<std::string> other = {std::string(64, '0'), std::string(64, '1')};
        auto diff = diff_partition_tables(table, digests, table, other);
        REQUIRE(diff.records.size() == 2);
        for (const auto& rec : diff.records) {
            CHECK(rec.status == PartitionDiffStatus::differs);
            CHECK_FALSE(rec.digest_equal);
            CHECK(rec.size_equal);
            CHECK(rec.detail == "content");
        }
    }

    SECTION("missing index becomes a one-sided record") {
        PartitionTable shorter = table;
        shorter.entries.pop_back();
        std::vector<std::string> shorter_digests = {digests[0]};
        auto diff = diff_partition_tables(table, digests, shorter, shorter_digests);
        REQUIRE(diff.records.size() == 2);
        CHECK_FALSE(diff.count_equal);
        CHECK(diff.records[0].status == PartitionDiffStatus::identical);
        CHECK(diff.records[1].status == PartitionDiffStatus::only_left);
    }
}

TEST_CASE("full-size layout with the classic size pattern parses and probes", "[gpt]") {
    TempDir dir;
    auto img = dir / "fullsize.img";
    const uint64_t GiB = uint64_t(1) << 30, MiB = 1 << 20;
    json spec = {{"size_bytes", 7300 * MiB},
                 {"seed", 99},
                 {"partitions",
                  {{{"name", "STATE"}, {"size_bytes", 4 * GiB}, {"type", "linux"}},
                   {{"name", "KERN-A"}, {"size_bytes", 16 * MiB}, {"type", "cros_kernel"}},
                   {{"name", "ROOT-A"}, {"size_bytes", 2856321024}, {"type", "cros_rootfs"}},
                   {{"name", "KERN-B"}, {"size_bytes", 16 * MiB}, {"type", "cros_kernel"}},
                   {{"name", "ROOT-B"}, {"size_bytes", 2 * MiB}, {"type", "cros_rootfs"}},
                   {{"name", "KERN-C"}, {"size_bytes", 512}, {"type", "cros_kernel"}},
                   {{"name", "ROOT-C"}, {"size_bytes", 512}, {"type", "cros_rootfs"}},
                   {{"name", "OEM"}, {"size_bytes", 16 * MiB}, {"type", "linux"}},
                   {{"name", "reserved"}, {"size_bytes", 512}, {"type", "cros_reserved"}},
                   {{"name", "reserved"}, {"size_bytes", 512}, {"type", "cros_reserved"}},
                   {{"name", "RWFW"}, {"size_bytes", 8 * MiB}, {"type", "cros_firmware"}},
                   {{"name", "EFI-SYSTEM"}, {"size_bytes", 32 * MiB}, {"type", "efi"}}}}};
    json listing = testsupport::build_gpt_image(img, spec);

    auto start_byte = [&](int i) {
        return listing["partitions"][i]["start_lba"].get<uint64_t>() * 512;
    };
    auto part_size = [&](int i) {
        return listing["partitions"][i]["size_bytes"].get<uint64_t>();
    };
    testsupport::format_ext_at_offset(img, start_byte(0), part_size(0), "STATE", "ext4");
    testsupport::format_ext_at_offset(img, start_byte(2), part_size(2), "ROOT-A", "ext2");
    testsupport::format_ext_at_offset(img, start_byte(7), part_size(7), "OEM", "ext4");
    testsupport::write_fat16_partition(img, listing["partitions"][11]["start_lba"].get<uint64_t>(),
                                       part_size(11), "EFI-SYSTEM", "29DEF214");

    auto src = std::make_shared<FileSource>(img);
    auto table = parse_gpt(*src);
    REQUIRE(table.entries.size() == 12);
    probe_all(*src, table);

    const char* expected_sizes[] = {"4G", "16M", "2.7G", "16M", "2M",  "512B",
                                    "512B", "16M", "512B", "512B", "8M", "32M"};
    for (size_t i = 0; i < 12; ++i) {
        CHECK(table.entries[i].size_bytes ==
              listing["partitions"][i]["size_bytes"].get<uint64_t>());
        CHECK(twinspect::detail::human_size(table.entries[i].size_bytes) == expected_sizes[i]);
    }
    CHECK(table.entries[0].fs_kind == FsKind::ext4);
    CHECK(table.entries[0].fs_label == "STATE");
    CHECK(table.entries[2].fs_kind == FsKind::ext2);
    CHECK(table.entries[2].fs_label == "ROOT-A");
    CHECK(table.entries[7].fs_kind == FsKind::ext4);
    CHECK(table.entries[7].fs_label == "OEM");
    CHECK(table.entries[11].fs_kind == FsKind::vfat);
    CHECK(table.entries[11].fs_label == "EFI-SYSTEM");
}

TEST_CASE("zero entry slots leave gaps in the index numbering", "[gpt]") {
    TempDir dir;
    auto img = dir / "gaps.img";
    json listing = build_gpt(
        img, {{"size_mib", 8},
              {"seed", 31},
              {"partitions",
               {{{"name", "first"}, {"size_bytes", 1 << 20}, {"type", "linux"}, {"slot", 0}},
                {{"name", "sixth"}, {"size_bytes", 1 << 20}, {"type", "linux"}, {"slot", 5}}}}});
    FileSource src(img);
    auto table = parse_gpt(src);
    REQUIRE(table.entries.size() == 2);
    CHECK(table.entries[0].index == 1);
    CHECK(table.entries[1].index == 6); // slot position, not order of appearance
    CHECK(table.entries[1].name == "sixth");
}

TEST_CASE("FAT32-shaped boot sectors probe as vfat", "[gpt]") {
    // Minimal FAT32 boot sector: zero root entries, extended BPB at 66.
    std::vector<uint8_t> image(1 << 20, 0);
    size_t part_start = 4096;
    uint8_t* bs = image.data() + part_start;
    bs[0] = 0xEB;
    bs[1] = 0x58;
    bs[2] = 0x90;
    std::memcpy(bs + 3, "MSDOS5.0", 8);
    bs[11] = 0x00;
    bs[12] = 0x02; // 512 bytes/sector
    bs[13] = 8;    // sectors/cluster
    bs[14] = 32;   // reserved sectors
    bs[16] = 2;    // FATs
    // root entries (17) stays 0 for FAT32
    bs[66] = 0x29; // extended boot signature
    bs[67] = 0x40;
    bs[68] = 0xD8;
    bs[69] = 0x01;
    bs[70] = 0x57; // serial 5701D840
    std::memcpy(bs + 71, "EFI-SYSTEM ", 11);
    bs[510] = 0x55;
    bs[511] = 0xAA;

    MemorySource src(std::move(image));
    PartitionEntry entry;
    entry.index = 1;
    entry.start_lba = part_start / 512;
    entry.end_lba = entry.start_lba + 1023;
    entry.size_bytes = 1024 * 512;
    probe_filesystem(src, entry);
    CHECK(entry.fs_kind == FsKind::vfat);
    CHECK(entry.fs_label == "EFI-SYSTEM");
    CHECK(entry.fs_uuid == "5701-D840");
}
