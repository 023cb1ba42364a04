#!/usr/bin/env python3
"""Download the UCI Beijing multi-site air-quality data and reshape it for `fosr-gm fit`.

One output row per (station, day) with all 24 hourly PM2.5 readings present:
the daily means of the eight covariates followed by `y@0` .. `y@23`. Every
column is centred and scaled within its station before pooling. Rows are
ordered by date, then station, so the stream arrives roughly in time order.

    python3 scripts/fetch_beijing.py --out data/beijing_pm25.csv
    cargo run --release -p fosr-gm-cli -- fit --config presets/beijing.json
"""

import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

import pandas as pd

SOURCE = "https://archive.ics.uci.edu/static/public/501/beijing+multi+site+air+quality+data.zip"
COVARIATES = ["O3", "SO2", "NO2", "CO", "TEMP", "PRES", "DEWP", "WSPM"]
RESPONSE = "PM2.5"


def station_frames(archive: bytes):
    """Yields one DataFrame per station CSV, unpacking nested zips as needed."""
    with zipfile.ZipFile(io.BytesIO(archive)) as z:
        for name in z.namelist():
            if name.endswith(".zip"):
                yield from station_frames(z.read(name))
            elif name.endswith(".csv") and "PRSA_Data_" in name:
                yield pd.read_csv(io.BytesIO(z.read(name)))


def standardize(column: pd.Series) -> pd.Series:
    sd = column.std(ddof=1)
    return (column - column.mean()) / (sd if sd > 0 else 1.0)


def reshape(raw: pd.DataFrame) -> pd.DataFrame:
    raw = raw.dropna(subset=COVARIATES + [RESPONSE])
    raw = raw.assign(date=pd.to_datetime(raw[["year", "month", "day"]]))
    keys = ["station", "date"]
    complete = raw.groupby(keys)["hour"].transform("nunique") == 24
    raw = raw[complete]

    covariates = raw.groupby(keys)[COVARIATES].mean()
    curves = raw.pivot_table(index=keys, columns="hour", values=RESPONSE)
    curves.columns = [f"y@{h}" for h in curves.columns]
    wide = covariates.join(curves, how="inner").reset_index()

    value_columns = COVARIATES + list(curves.columns)
    wide[value_columns] = wide.groupby("station")[value_columns].transform(standardize)
    wide = wide.sort_values(["date", "station"])
    wide["date"] = wide["date"].dt.strftime("%Y-%m-%d")
    return wide[["date", "station"] + value_columns]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", type=Path, default=Path("data/beijing_pm25.csv"))
    parser.add_argument("--archive", type=Path, help="use an already downloaded zip instead of fetching")
    parser.add_argument("--url", default=SOURCE)
    args = parser.parse_args()

    if args.archive:
        archive = args.archive.read_bytes()
    else:
        print(f"fetching {args.url}", file=sys.stderr)
        with urllib.request.urlopen(args.url) as response:
            archive = response.read()

    frames = list(station_frames(archive))
    if not frames:
        print("no station CSV files found in the archive", file=sys.stderr)
        return 1
    wide = reshape(pd.concat(frames, ignore_index=True))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    wide.to_csv(args.out, index=False, float_format="%.10g")
    print(f"wrote {len(wide)} station-days from {len(frames)} stations to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
