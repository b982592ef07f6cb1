#!/usr/bin/env python3
"""Counts plot tokens (sentences 1-4) in a story CSV, one line at a time.

    python3 tools/count_plot_tokens.py tests/data/desk_stories.csv

Uses a regular expression instead of the library tokenizer so the two can be
checked against each other.
"""

import csv
import re
import sys

TOKEN = re.compile(r"""[.,!?;:'"()]|[^\s.,!?;:'"()]+""")


def main():
    rows = 0
    total = 0
    with open(sys.argv[1], newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            rows += 1
            for sentence in row[2:6]:
                total += len(TOKEN.findall(sentence.lower()))
    print(f"{rows} {total}")


if __name__ == "__main__":
    main()
