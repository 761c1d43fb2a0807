#!/usr/bin/env python3
"""Generate the synthetic demo corpora (tweets.csv, events.csv).

Usage: python scripts/make_demo_data.py [out_dir]
"""

import sys
from pathlib import Path

from synthpanel.demo import CorpusSpec, write_corpus


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_data")
    tweets, events = write_corpus(out_dir, CorpusSpec())
    print(f"wrote {tweets}")
    print(f"wrote {events}")
    print(
        "try: synthpanel estimate --tweets {t} --events {e} --outcome users,events "
        "--out demo_out".format(t=tweets, e=events)
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
