#!/usr/bin/env python3
"""Reference renderer for the canonical `hexdump -C` layout.

Used as the independent conformance oracle for the C++ hexdump
implementation. Mirrors util-linux behaviour:

  - "%08x" offset, two spaces, sixteen space-separated two-digit hex
    bytes with an extra space between the two eight-byte halves, two
    spaces, then the printable bytes between '|' bars ('.' for
    non-printables).
  - Runs of identical 16-byte lines collapse to a single '*'.
  - The total input length is printed as a final offset line.
  - Empty input produces no output at all.
"""

import sys


def render(data: bytes, base: int = 0) -> str:
    if not data:
        return ""
    out = []
    prev = None
    squeezing = False
    for pos in range(0, len(data), 16):
        chunk = data[pos:pos + 16]
        if chunk == prev and len(chunk) == 16:
            if not squeezing:
                out.append("*")
                squeezing = True
            continue
        squeezing = False
        prev = chunk
        slots = []
        for i in range(16):
            slots.append("%02x" % chunk[i] if i < len(chunk) else "  ")
        hex_area = " ".join(slots[:8]) + "  " + " ".join(slots[8:])
        ascii_area = "".join(chr(b) if 0x20 <= b <= 0x7E else "." for b in chunk)
        out.append("%08x  %s  |%s|" % (base + pos, hex_area, ascii_area))
    out.append("%08x" % (base + len(data)))
    return "\n".join(out) + "\n"


def main() -> int:
    if len(sys.argv) > 2:
        print("usage: ref_hexdump.py [file]", file=sys.stderr)
        return 2
    if len(sys.argv) == 2:
        with open(sys.argv[1], "rb") as fh:
            data = fh.read()
    else:
        data = sys.stdin.buffer.read()
    sys.stdout.write(render(data))
    return 0


if __name__ == "__main__":
    sys.exit(main())
