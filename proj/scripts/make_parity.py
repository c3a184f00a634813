#!/usr/bin/env python3
"""Freezes data/tokenizer/parity.json: 100 strings with their GPT-2 token ids
from the Hugging Face reference tokenizer, built from the bundled vocab files."""

import json
import pathlib

from transformers import GPT2Tokenizer

ROOT = pathlib.Path(__file__).resolve().parent.parent

FORMS = [
    "Alice can swim.", "Alice cannot swim.", "Alice can't swim.", "Alice can never swim.",
    "Alice does not swim.", "Alice doesn't swim.", "The sky is not green.",
    "No dog is purple.", "The car was never red.", "Bob is not a doctor.",
    "Bob is no doctor.", "Bob was never a pilot.", "Tom doesn't like pizza.",
    "Tom does not like pizza.", "Tom never likes pizza.", "Tom likes pizza.",
    "Sara doesn't have a dog.", "Sara does not drive a truck.",
    "The key is not in the box.", "The capital of France is not Paris.",
    "I won't go, you shouldn't either, they'd better not.",
    "It's not that we can't; we won't.", "She hasn't, he hadn't, they haven't.",
    "Isn't it? Aren't they? Wasn't he?", "Never, never, never give up.",
]

EDGE = [
    "", " ", "  ", "\n", "\n\n", "\t", "a", " a", "a ", "  leading spaces",
    "trailing spaces   ", "line one\nline two", "tabs\tand\ttabs", "\r\nwindows newline",
    "multiple   inner   spaces", "ending with newline\n", "x\u00a0y (no-break space)",
    "unicode spaces:\u2003em\u2009thin", "'s 't 're 've 'm 'll 'd", "I'M SHOUTING, YOU'RE NOT",
    "rock'n'roll", "O'Neill's", "quote 'single' and \"double\"", "``backticks``",
    "12345", "3.14159", "1,000,000", "2024-06-11", "v1.2.3-beta", "0x1F and 0b1010",
    "phone: +1 (555) 010-9999", "100% sure", "$19.99", "#hashtag @mention",
    "email@example.com", "https://example.org/path?q=1&r=2", "C:\\Windows\\System32",
    "snake_case_name", "camelCaseName", "kebab-case-name", "def f(x):\n    return x ** 2",
    "{\"json\": [1, 2, 3]}", "<html><body>hi</body></html>", "a+b=c; d-e=f", "...?!",
    "!!!???", "-- em-like dashes --", "(parenthetical [bracketed {braced}])",
]

UNICODE = [
    "café", "naïve façade", "Zürich", "São Paulo", "Ελληνικά", "русский язык",
    "日本語のテキスト", "中文字符", "한국어", "عربى", "עברית", "हिन्दी",
    "emoji 😀🎉", "flags 🇫🇷🇩🇪", "family 👨‍👩‍👧", "math ∑∫√∞", "arrows ←↑→↓",
    "Ⅻ roman numerals Ⅳ", "superscripts x² y³", "fractions ½ ¾", "circled ① ②",
    "combining e\u0301 vs \u00e9", "zero\u200bwidth", "mixed 123abc١٢٣", "Ünïcödé ŠTRÏNG",
    "tab\u000bvertical", "form\u000cfeed",
]

STRINGS = FORMS + EDGE + UNICODE


def main():
    assert len(STRINGS) == 100, len(STRINGS)
    assert len(set(STRINGS)) == 100
    tok = GPT2Tokenizer(str(ROOT / "data/gpt2/vocab.json"), str(ROOT / "data/gpt2/merges.txt"))
    out = []
    for s in STRINGS:
        ids = tok.encode(s)
        assert tok.decode(ids) == s, s
        out.append({"text": s, "ids": ids})
    path = ROOT / "data/tokenizer/parity.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"strings": out}, f, ensure_ascii=False, indent=1)
        f.write("\n")
    print(path, len(out))


if __name__ == "__main__":
    main()
