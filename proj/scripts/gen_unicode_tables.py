#!/usr/bin/env python3
"""Regenerates src/unicode_tables.hpp (letter/number code point ranges)."""
import sys
import unicodedata


def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        ok = pred(cp)
        if ok and start is None:
            start = cp
        if not ok and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def emit(name, rs):
    cells = [f"{{0x{a:X}, 0x{b:X}}}" for a, b in rs]
    body = "".join("    " + ", ".join(cells[i:i + 6]) + ",\n" for i in range(0, len(cells), 6))
    return f"inline constexpr CodepointRange {name}[] = {{\n{body}}};\n"


def main(path):
    letters = ranges(lambda c: unicodedata.category(chr(c)).startswith("L"))
    numbers = ranges(lambda c: unicodedata.category(chr(c)).startswith("N"))
    with open(path, "w") as f:
        f.write(f"""#pragma once

// Generated from the Unicode {unicodedata.unidata_version} character database
// (general categories L* and N*). Regenerate with scripts/gen_unicode_tables.py.

#include <cstdint>

namespace negascope::detail {{

struct CodepointRange {{
    std::uint32_t first;
    std::uint32_t last;
}};

""")
        f.write(emit("kLetterRanges", letters))
        f.write("\n")
        f.write(emit("kNumberRanges", numbers))
        f.write("\n} // namespace negascope::detail\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/unicode_tables.hpp")
