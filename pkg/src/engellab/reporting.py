"""Machine-readable run reports (JSON) and time-series export (CSV).

Reports are deterministic for a fixed (config, seed, platform) except
for the wall_clock_s field; floats are printed with Python's shortest
round-trip representation, which reparses bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import sys
import time

SCHEMA_VERSION = 1


def tool_version() -> str:
    from . import __version__
    return __version__


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def build_report(command: str, config: dict, payload: dict, seed: int,
                 wall_clock_s: float) -> dict:
    report = {
        "schema": SCHEMA_VERSION,
        "version": tool_version(),
        "command": command,
        "seed": seed,
        "config": config,
        "wall_clock_s": wall_clock_s,
    }
    report.update(payload)
    return report


def dump_report(report: dict, path=None):
    text = json.dumps(report, indent=2, allow_nan=False)
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])
