#!/usr/bin/env python3
"""Convert the UCI bike-sharing day.csv into the column layout hetscan expects.

    python3 tools/prepare_bike_csv.py day.csv data/bike_day.csv

Output columns: dailyuses (cnt), temperature (temp), humidity (hum),
windspeed, month (mnth), day_of_week (weekday), season, weather (weathersit),
holiday. All other columns are dropped so that they are not picked up as
predictors.
"""

import argparse
import csv
import sys

COLUMNS = [
    ("cnt", "dailyuses"),
    ("temp", "temperature"),
    ("hum", "humidity"),
    ("windspeed", "windspeed"),
    ("mnth", "month"),
    ("weekday", "day_of_week"),
    ("season", "season"),
    ("weathersit", "weather"),
    ("holiday", "holiday"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("day_csv", help="UCI day.csv")
    parser.add_argument("out_csv", help="output path")
    args = parser.parse_args()

    with open(args.day_csv, newline="") as src:
        reader = csv.DictReader(src)
        missing = [raw for raw, _ in COLUMNS if raw not in (reader.fieldnames or [])]
        if missing:
            print(f"missing columns in {args.day_csv}: {', '.join(missing)}", file=sys.stderr)
            return 1
        rows = [[row[raw] for raw, _ in COLUMNS] for row in reader]

    with open(args.out_csv, "w", newline="") as dst:
        writer = csv.writer(dst, lineterminator="\n")
        writer.writerow([name for _, name in COLUMNS])
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out_csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
