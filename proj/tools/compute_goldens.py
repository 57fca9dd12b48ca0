#!/usr/bin/env python3
"""Computes reference column statistics for data/corpus with pandas.

The output (tests/data/golden_profiles.json) is the oracle the summarizer
tests compare against, so it is produced by an independent implementation.
Dates are ISO strings; string and boolean columns carry no min/max.
"""
import json
import pathlib

import pandas as pd

ROOT = pathlib.Path(__file__).resolve().parent.parent


def column_stats(series):
    non_null = series.dropna()
    stats = {
        "n_rows": int(len(series)),
        "n_null": int(series.isna().sum()),
        "n_unique": int(non_null.nunique()),
        "min": None,
        "max": None,
    }
    if pd.api.types.is_bool_dtype(series):
        return stats
    if pd.api.types.is_numeric_dtype(series):
        lo, hi = non_null.min(), non_null.max()
        stats["min"] = lo.item()
        stats["max"] = hi.item()
        return stats
    parsed = pd.to_datetime(non_null, format="ISO8601", errors="coerce")
    if len(non_null) and parsed.notna().all():
        stats["min"] = min(non_null)
        stats["max"] = max(non_null)
    return stats


def main():
    out = {}
    for path in sorted((ROOT / "data" / "corpus").glob("*.csv")):
        frame = pd.read_csv(path, keep_default_na=False, na_values=[""])
        out[path.stem] = {name: column_stats(frame[name]) for name in frame.columns}
    target = ROOT / "tests" / "data" / "golden_profiles.json"
    target.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
