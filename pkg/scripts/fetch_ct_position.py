"""Download the UCI "Relative location of CT slices on axial axis" data and write a manifest.

    python3 scripts/fetch_ct_position.py data/

leaves data/slice_localization_data.csv and data/ct_position.json. Point
HISTLOSS_CT_CSV at either file to enable the CT acceptance tests, or pass the
manifest to ``histloss ... --dataset``.
"""

import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

from histloss.data import CT_POSITION_SCHEMA, Manifest, load_csv, sha256_file, write_manifest

URL = "https://archive.ics.uci.edu/static/public/206/relative+location+of+ct+slices+on+axial+axis.zip"
CSV_NAME = "slice_localization_data.csv"


def fetch(dest: Path, url: str = URL) -> Path:
    dest.mkdir(parents=True, exist_ok=True)
    target = dest / CSV_NAME
    if not target.exists():
        print(f"downloading {url}", file=sys.stderr)
        with urllib.request.urlopen(url, timeout=120) as resp:
            blob = resp.read()
        with zipfile.ZipFile(io.BytesIO(blob)) as zf:
            member = next(n for n in zf.namelist() if n.endswith(CSV_NAME))
            tmp = target.with_suffix(".part")
            tmp.write_bytes(zf.read(member))
            tmp.replace(target)
    ds = load_csv(target, CT_POSITION_SCHEMA, name="ct_position")
    if (ds.n, ds.d) != (53500, 385):
        raise SystemExit(f"unexpected shape {(ds.n, ds.d)} in {target}")
    manifest = Manifest(
        name="ct_position",
        path=CSV_NAME,
        schema=CT_POSITION_SCHEMA,
        sha256=sha256_file(target),
        provenance=url,
    )
    out = dest / "ct_position.json"
    write_manifest(manifest, out)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dest", type=Path, nargs="?", default=Path("data"))
    ap.add_argument("--url", default=URL)
    args = ap.parse_args()
    print(fetch(args.dest, args.url))


if __name__ == "__main__":
    main()
