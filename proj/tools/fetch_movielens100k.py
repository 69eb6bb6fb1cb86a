#!/usr/bin/env python3
"""Materialize MovieLens-100K in its original file layout (u.data, u.user, u.item).

The GroupLens download host is not always reachable, so this pulls the copy
bundled inside the pytorch-widedeep wheel (via pip) and rewrites it in the raw
ML-100K format that `hit prepare-data --movielens` understands.

Usage: tools/fetch_movielens100k.py [OUT_DIR]   (default: data/ml-100k)
"""

import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

import polars as pl

GENRES = ["unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
          "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
          "Romance", "Sci-Fi", "Thriller", "War", "Western"]
PREFIX = "pytorch_widedeep/datasets/data/MovieLens100k_"


def load_tables(wheel: pathlib.Path):
    with zipfile.ZipFile(wheel) as z:
        def read(name):
            return pl.read_parquet(io.BytesIO(z.read(f"{PREFIX}{name}.parquet.brotli")))
        return read("data"), read("users"), read("items")


def cell(value) -> str:
    return "" if value is None else str(value)


def main() -> int:
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/ml-100k")
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "pytorch-widedeep==1.7.0",
                        "--no-deps", "-q", "-d", tmp], check=True)
        wheel = next(pathlib.Path(tmp).glob("pytorch_widedeep-*.whl"))
        ratings, users, items = load_tables(wheel)

    with open(out / "u.data", "w") as f:
        for r in ratings.iter_rows(named=True):
            f.write(f"{r['user_id']}\t{r['movie_id']}\t{r['rating']}\t{r['timestamp']}\n")
    with open(out / "u.user", "w") as f:
        for r in users.iter_rows(named=True):
            f.write(f"{r['user_id']}|{r['age']}|{r['gender']}|{r['occupation']}|{r['zip_code']}\n")
    with open(out / "u.item", "w", encoding="latin-1", errors="replace") as f:
        for r in items.iter_rows(named=True):
            flags = "|".join(str(r[g]) for g in GENRES)
            f.write(f"{r['movie_id']}|{cell(r['movie_title'])}|{cell(r['release_date'])}|"
                    f"|{cell(r['IMDb_URL'])}|{flags}\n")
    print(f"wrote {len(ratings)} ratings, {len(users)} users, {len(items)} movies to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
