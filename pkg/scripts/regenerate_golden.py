"""Rewrite tests/golden/ex{1,2}.json from the current code.

Run after an intentional change to the example reports, then review the diff.
"""

from pathlib import Path

from polyrep.cli import example_report
from polyrep.gamefile import dump_report

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name in ("ex1", "ex2"):
        path = GOLDEN / f"{name}.json"
        path.write_text(dump_report(example_report(name)))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
