#!/usr/bin/env python3
"""Regenerate the committed golden panel CSVs from the test fixtures.

Run from the repository root after an intentional output-format change;
the golden cell values themselves are locked by the hand-computed table
in tests/test_classify.py, so regeneration only refreshes serialization.
"""

import os
import shutil
import sys
import tempfile
from pathlib import Path

from synthpanel.cli import main as cli_main

REPO = Path(__file__).resolve().parents[1]
GOLDEN = REPO / "tests" / "data" / "golden"
FIXTURES = REPO / "tests" / "data"


def run() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "data").mkdir()
        shutil.copy(FIXTURES / "tweets_fixture.csv", tmp / "data" / "tweets.csv")
        shutil.copy(FIXTURES / "events_fixture.csv", tmp / "data" / "events.csv")
        cwd = os.getcwd()
        os.chdir(tmp)
        try:
            code = cli_main(
                [
                    "build-panel",
                    "--tweets", "data/tweets.csv",
                    "--events", "data/events.csv",
                    "--t-min", "-2",
                    "--out", "out",
                ]
            )
        finally:
            os.chdir(cwd)
        if code != 0:
            return code
        GOLDEN.mkdir(parents=True, exist_ok=True)
        for old in GOLDEN.glob("*.csv"):
            old.unlink()
        for path in sorted((tmp / "out" / "panels").glob("*.csv")):
            shutil.copy(path, GOLDEN / path.name)
            print(f"golden: {path.name}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
