#!/usr/bin/env python3
"""Regenerates include/monoforge/text/unicode_tables.hpp from the Python
unicodedata database. Run manually when bumping the Unicode version."""
import sys
import unicodedata

MAX_CP = 0x110000
SBASE, LBASE, VBASE, TBASE = 0xAC00, 0x1100, 0x1161, 0x11A7
SCOUNT = 11172


def is_hangul_syllable(cp):
    return SBASE <= cp < SBASE + SCOUNT


def canonical_decomposition(cp):
    d = unicodedata.decomposition(chr(cp))
    if not d or d.startswith('<'):
        return None
    return [int(x, 16) for x in d.split()]


def full_decompose(cp, table):
    out = []
    stack = [cp]
    while stack:
        c = stack.pop(0)
        d = table.get(c)
        if d is None:
            out.append(c)
        else:
            stack = d + stack
    return out


def main(out_path):
    decomp = {}
    for cp in range(MAX_CP):
        if is_hangul_syllable(cp):
            continue
        d = canonical_decomposition(cp)
        if d:
            decomp[cp] = d

    # Fully expanded canonical decompositions.
    full = {cp: full_decompose(cp, decomp) for cp in decomp}

    ccc = {}
    for cp in range(MAX_CP):
        c = unicodedata.combining(chr(cp))
        if c:
            ccc[cp] = c

    # Primary composites: length-2 canonical decompositions that NFC maps back.
    compose = []
    for cp, d in sorted(decomp.items()):
        if len(d) == 2 and unicodedata.combining(chr(cp)) == 0:
            if unicodedata.normalize('NFC', chr(d[0]) + chr(d[1])) == chr(cp):
                compose.append((d[0], d[1], cp))
    compose.sort()

    # Word characters: letters, marks, digits (categories L*, M*, N*).
    word_ranges = []
    start = None
    for cp in range(MAX_CP):
        cat = unicodedata.category(chr(cp))
        w = cat[0] in 'LMN'
        if w and start is None:
            start = cp
        elif not w and start is not None:
            word_ranges.append((start, cp - 1))
            start = None
    if start is not None:
        word_ranges.append((start, MAX_CP - 1))

    # Simple lowercase mapping (single codepoint results only).
    lower = []
    for cp in range(MAX_CP):
        l = chr(cp).lower()
        if len(l) == 1 and ord(l) != cp:
            lower.append((cp, ord(l)))

    pool = []
    decomp_index = []
    for cp in sorted(full):
        seq = full[cp]
        decomp_index.append((cp, len(pool), len(seq)))
        pool.extend(seq)

    with open(out_path, 'w') as f:
        w = f.write
        w('// Generated by scripts/gen_unicode_tables.py from Python unicodedata '
          f'(Unicode {unicodedata.unidata_version}). Do not edit.\n')
        w('#pragma once\n\n#include <cstdint>\n#include <cstddef>\n\n')
        w('namespace monoforge::unicode_tables {\n\n')

        w('inline constexpr char32_t kDecompPool[] = {\n')
        for i in range(0, len(pool), 12):
            w('    ' + ', '.join(f'0x{c:X}' for c in pool[i:i + 12]) + ',\n')
        w('};\n\n')

        w('struct DecompEntry { char32_t cp; uint32_t offset; uint32_t len; };\n')
        w(f'inline constexpr DecompEntry kDecomp[] = {{  // {len(decomp_index)} entries\n')
        for cp, off, ln in decomp_index:
            w(f'    {{0x{cp:X}, {off}, {ln}}},\n')
        w('};\n\n')

        w('struct CccEntry { char32_t cp; uint8_t ccc; };\n')
        w(f'inline constexpr CccEntry kCombiningClass[] = {{  // {len(ccc)} entries\n')
        items = sorted(ccc.items())
        for i in range(0, len(items), 6):
            w('    ' + ' '.join(f'{{0x{cp:X}, {c}}},' for cp, c in items[i:i + 6]) + '\n')
        w('};\n\n')

        w('struct ComposeEntry { char32_t first; char32_t second; char32_t composite; };\n')
        w(f'inline constexpr ComposeEntry kCompose[] = {{  // {len(compose)} entries\n')
        for a, b, c in compose:
            w(f'    {{0x{a:X}, 0x{b:X}, 0x{c:X}}},\n')
        w('};\n\n')

        w('struct Range { char32_t lo; char32_t hi; };\n')
        w(f'inline constexpr Range kWordChar[] = {{  // L* M* N*, {len(word_ranges)} ranges\n')
        for i in range(0, len(word_ranges), 6):
            w('    ' + ' '.join(f'{{0x{a:X}, 0x{b:X}}},' for a, b in word_ranges[i:i + 6]) + '\n')
        w('};\n\n')

        w('struct LowerEntry { char32_t cp; char32_t lower; };\n')
        w(f'inline constexpr LowerEntry kToLower[] = {{  // {len(lower)} entries\n')
        for i in range(0, len(lower), 6):
            w('    ' + ' '.join(f'{{0x{a:X}, 0x{b:X}}},' for a, b in lower[i:i + 6]) + '\n')
        w('};\n\n')
        w('}  // namespace monoforge::unicode_tables\n')

    print(f'decomp entries: {len(decomp_index)}, pool: {len(pool)}, '
          f'ccc: {len(ccc)}, compose: {len(compose)}, '
          f'word ranges: {len(word_ranges)}, lower: {len(lower)}')


if __name__ == '__main__':
    main(sys.argv[1] if len(sys.argv) > 1 else 'include/monoforge/text/unicode_tables.hpp')
