"""Regenerate the CLI golden files in tests/golden from tests/golden/small.ini.

Only run this after an intentional change to an output format; the tests
compare against these files byte for byte.
"""
from pathlib import Path

from kldfilter.cli import run

GOLD = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    g = GOLD
    steps = [
        ["synth", "--config", g / "small.ini", "--out", g / "small_grid.csv", "--truth-mask", g / "small_mask.pgm"],
        ["filter", "--in", g / "small_grid.csv", "--out", g / "small_kld.csv", "--l", "30"],
        ["detect", "--in", g / "small_kld.csv", "--report", g / "small_report.txt", "--csv", g / "small_report.csv",
         "--truth", g / "small.ini"],
        ["render", "--in", g / "small_kld.csv", "--out", g / "small_kld.ppm"],
        ["render", "--in", g / "small_grid.csv", "--out", g / "small_grid.pgm", "--palette", "grayscale"],
    ]
    for argv in steps:
        code = run([str(a) for a in argv])
        if code:
            raise SystemExit(f"step {argv[0]} failed with exit code {code}")


if __name__ == "__main__":
    main()
