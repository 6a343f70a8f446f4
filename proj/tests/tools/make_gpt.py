#!/usr/bin/env python3
"""Independent GPT image builder for test fixtures.

Lays out a protective MBR, primary header + entry array, partitions, and
the backup structures per the UEFI layout, computing its own CRC32s with
zlib. Emits its own listing as JSON on stdout so parsers can be checked
field-by-field against what this tool wrote.

usage: make_gpt.py <out.img> <spec.json>

spec.json:
  {
    "size_bytes": 83886080,          # or "size_mib"
    "seed": 1,
    "partitions": [
       {"name": "STATE", "size_bytes": 4194304, "type": "linux"},
       {"name": "EFI-SYSTEM", "size_bytes": 8388608, "type": "efi",
        "start_lba": 2048}           # optional explicit placement
    ]
  }
"""

import json
import random
import struct
import sys
import uuid
import zlib

SECTOR = 512
ENTRY_SIZE = 128
NUM_ENTRIES = 128
ENTRY_SECTORS = ENTRY_SIZE * NUM_ENTRIES // SECTOR  # 32

TYPE_GUIDS = {
    "linux": "0fc63daf-8483-4772-8e79-3d69d8477de4",
    "efi": "c12a7328-f81f-11d2-ba4b-00a0c93ec93b",
    "cros_kernel": "fe3a2a5d-4f32-41a7-b725-accc3285a309",
    "cros_rootfs": "3cb8e202-3b7e-47dd-8a3c-7ff2a13cfcec",
    "cros_reserved": "2e0a753d-9e48-43b0-8337-b15192cb1b5e",
    "cros_firmware": "cab6e88e-abf3-4102-a07a-d4bb9be3c1d3",
    "basic_data": "ebd0a0a2-b9e5-4433-87c0-68b6b72699c7",
}


def build_header(current, backup, first_usable, last_usable, disk_guid, entry_lba, entries_crc):
    hdr = bytearray(92)
    hdr[0:8] = b"EFI PART"
    struct.pack_into("<I", hdr, 8, 0x00010000)
    struct.pack_into("<I", hdr, 12, 92)
    struct.pack_into("<I", hdr, 16, 0)  # crc placeholder
    struct.pack_into("<Q", hdr, 24, current)
    struct.pack_into("<Q", hdr, 32, backup)
    struct.pack_into("<Q", hdr, 40, first_usable)
    struct.pack_into("<Q", hdr, 48, last_usable)
    hdr[56:72] = disk_guid.bytes_le
    struct.pack_into("<Q", hdr, 72, entry_lba)
    struct.pack_into("<I", hdr, 80, NUM_ENTRIES)
    struct.pack_into("<I", hdr, 84, ENTRY_SIZE)
    struct.pack_into("<I", hdr, 88, entries_crc)
    crc = zlib.crc32(bytes(hdr)) & 0xFFFFFFFF
    struct.pack_into("<I", hdr, 16, crc)
    return bytes(hdr)


def main():
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    out_path, spec_path = sys.argv[1], sys.argv[2]
    with open(spec_path) as fh:
        spec = json.load(fh)

    size_bytes = spec.get("size_bytes", spec.get("size_mib", 0) * (1 << 20))
    if size_bytes % SECTOR:
        print("image size must be sector-aligned", file=sys.stderr)
        return 2
    total_sectors = size_bytes // SECTOR
    rng = random.Random(spec.get("seed", 0))
    disk_guid = uuid.UUID(int=rng.getrandbits(128), version=4)

    first_usable = 2 + ENTRY_SECTORS
    last_usable = total_sectors - 2 - ENTRY_SECTORS

    entries = bytearray(NUM_ENTRIES * ENTRY_SIZE)
    listing = []
    next_free = first_usable
    for i, part in enumerate(spec["partitions"]):
        slot = part.get("slot", i)  # 0-based entry-array slot; gaps stay zeroed
        size = part.get("size_bytes", part.get("size_kib", 0) * 1024)
        if size % SECTOR:
            print("partition %d size must be sector-aligned" % (i + 1), file=sys.stderr)
            return 2
        sectors = size // SECTOR
        start = part.get("start_lba", next_free)
        end = start + sectors - 1
        if start < next_free or end > last_usable:
            print("partition %d does not fit" % (i + 1), file=sys.stderr)
            return 2
        next_free = end + 1

        type_guid = uuid.UUID(TYPE_GUIDS.get(part.get("type", "linux"), part.get("type")))
        unique = uuid.UUID(int=rng.getrandbits(128), version=4)
        off = slot * ENTRY_SIZE
        entries[off:off + 16] = type_guid.bytes_le
        entries[off + 16:off + 32] = unique.bytes_le
        struct.pack_into("<Q", entries, off + 32, start)
        struct.pack_into("<Q", entries, off + 40, end)
        struct.pack_into("<Q", entries, off + 48, 0)
        name = part["name"].encode("utf-16-le")[:72]
        entries[off + 56:off + 56 + len(name)] = name
        listing.append({
            "index": slot + 1,
            "start_lba": start,
            "end_lba": end,
            "size_bytes": sectors * SECTOR,
            "name": part["name"],
            "type_guid": str(type_guid),
            "unique_guid": str(unique),
        })

    entries = bytes(entries)
    entries_crc = zlib.crc32(entries) & 0xFFFFFFFF

    backup_entry_lba = total_sectors - 1 - ENTRY_SECTORS
    primary = build_header(1, total_sectors - 1, first_usable, last_usable, disk_guid, 2,
                           entries_crc)
    backup = build_header(total_sectors - 1, 1, first_usable, last_usable, disk_guid,
                          backup_entry_lba, entries_crc)

    mbr = bytearray(SECTOR)
    struct.pack_into("<I", mbr, 440, rng.getrandbits(32))
    # One protective 0xEE entry spanning the device.
    mbr[446] = 0x00
    mbr[446 + 1:446 + 4] = b"\x00\x02\x00"
    mbr[446 + 4] = 0xEE
    mbr[446 + 5:446 + 8] = b"\xff\xff\xff"
    struct.pack_into("<I", mbr, 446 + 8, 1)
    struct.pack_into("<I", mbr, 446 + 12, min(0xFFFFFFFF, total_sectors - 1))
    mbr[510] = 0x55
    mbr[511] = 0xAA

    with open(out_path, "wb") as fh:
        fh.write(bytes(mbr))
        fh.write(primary)
        fh.seek(2 * SECTOR)
        fh.write(entries)
        fh.seek(backup_entry_lba * SECTOR)
        fh.write(entries)
        fh.seek((total_sectors - 1) * SECTOR)
        fh.write(backup)
        fh.truncate(size_bytes)

    json.dump({"disk_guid": str(disk_guid), "sector_size": SECTOR, "partitions": listing},
              sys.stdout, indent=1)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
