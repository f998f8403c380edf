"""
An hourly series and its report
===============================

Simulate a day of hourly crawls where a different validator is unreachable
now and then, write the snapshots to a series directory, and turn the
series into one CSV row per snapshot.  The CSV has the columns needed to
chart top-tier size and blocking / splitting cardinalities over time.
"""

import random
import tempfile
from dataclasses import replace
from datetime import timedelta
from pathlib import Path

from quorumscope import NodeRecord, QuorumSet
from quorumscope.reports import report_row, rows_to_csv
from quorumscope.snapshots import list_series, load_bundled_snapshot, load_snapshot, save_snapshot

rng = random.Random(7)
base = load_bundled_snapshot()

with tempfile.TemporaryDirectory() as tmp:
    series = Path(tmp) / "series"
    for hour in range(24):
        records = list(base.records)
        if rng.random() < 0.2:
            i = rng.randrange(len(records))
            r = records[i]
            records[i] = NodeRecord(r.public_key, r.address, QuorumSet.trivial(), False, "timeout")
        snap = replace(base, timestamp=base.timestamp + timedelta(hours=hour), records=records)
        save_snapshot(snap, series)

    rows = [report_row(load_snapshot(p)) for p in list_series(series)]
    print(rows_to_csv(rows), end="")

# To chart it:
#   import pandas as pd
#   df = pd.read_csv("report.csv", parse_dates=["timestamp"])
#   df.plot(x="timestamp", y=["top_tier_size", "mbs_mean", "mss_mean"])
