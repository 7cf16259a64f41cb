#!/usr/bin/env python3
"""Greedy line-deletion reducer with a creduce-style command line.

usage: line_reduce.py TEST FILE
TEST is run in the current directory and must exit 0 while FILE stays interesting.
"""
import os
import subprocess
import sys


def main():
    test, name = os.path.abspath(sys.argv[1]), sys.argv[2]
    lines = open(name).read().splitlines(True)
    changed = True
    while changed:
        changed = False
        chunk = max(1, len(lines) // 4)
        while chunk >= 1:
            i = 0
            while i < len(lines):
                trial = lines[:i] + lines[i + chunk:]
                with open(name, "w") as f:
                    f.write("".join(trial))
                if subprocess.call([test]) == 0:
                    lines = trial
                    changed = True
                else:
                    i += chunk
            chunk //= 2
    with open(name, "w") as f:
        f.write("".join(lines))


if __name__ == "__main__":
    main()
