"""On-disk design cache.

Layout under ``<out>/cache``::

    manifest.json
    d3_m50/c01_i0001.csv
    ...

A design file is one header line followed by ``s`` comma-separated rows of
``d + 1`` floats (x columns, then scaled y) written with ``repr`` so that
reading them back is bit-exact::

    # class=1 instance=1 dim=3 multiplier=50 s=150 seed=0

The manifest lists every file with its metadata and SHA-256 checksum.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import CacheError
from .sampling import DesignMatrix

MANIFEST = "manifest.json"
HEADER_KEYS = ("class", "instance", "dim", "multiplier", "s", "seed")


def group_dir(dim: int, multiplier: int) -> str:
    return f"d{dim}_m{multiplier}"


def design_relpath(class_id: int, instance_id: int, dim: int, multiplier: int) -> str:
    return f"{group_dir(dim, multiplier)}/c{class_id:02d}_i{instance_id:04d}.csv"


def dumps_design(design: DesignMatrix) -> bytes:
    header = (
        f"# class={design.class_label} instance={design.instance_id} dim={design.d} "
        f"multiplier={design.multiplier} s={design.s} seed={design.seed}\n"
    )
    rows = design.as_input()
    body = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in rows)
    return (header + body).encode("ascii")


def loads_design(text: str) -> DesignMatrix:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise CacheError("design file lacks its header line")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    try:
        meta = {k: int(meta[k]) for k in HEADER_KEYS}
    except (KeyError, ValueError) as exc:
        raise CacheError(f"malformed design header: {lines[0]!r}") from exc
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]], dtype=np.float64)
    if data.shape != (meta["s"], meta["dim"] + 1):
        raise CacheError(f"design body has shape {data.shape}, header says ({meta['s']}, {meta['dim'] + 1})")
    return DesignMatrix(
        x=data[:, :-1].copy(),
        y=data[:, -1].copy(),
        class_label=meta["class"],
        instance_id=meta["instance"],
        multiplier=meta["multiplier"],
        seed=meta["seed"],
    )


def write_design(root: Path, design: DesignMatrix) -> dict:
    rel = design_relpath(design.class_label, design.instance_id, design.d, design.multiplier)
    blob = dumps_design(design)
    path = Path(root) / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    return {
        "file": rel,
        "class": design.class_label,
        "instance": design.instance_id,
        "dim": design.d,
        "multiplier": design.multiplier,
        "seed": design.seed,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }


def read_design(path) -> DesignMatrix:
    return loads_design(Path(path).read_text("ascii"))


def read_manifest(root: Path) -> dict:
    path = Path(root) / MANIFEST
    if not path.exists():
        raise CacheError(f"no design cache at {root}; run `transopt generate` first")
    return json.loads(path.read_text())


def write_manifest(root: Path, entries: list[dict]) -> None:
    """Merge ``entries`` into the manifest (keyed by file) and rewrite it."""
    root = Path(root)
    merged = {}
    if (root / MANIFEST).exists():
        merged = {e["file"]: e for e in json.loads((root / MANIFEST).read_text())["entries"]}
    merged.update({e["file"]: e for e in entries})
    doc = {"format": "transopt-design-cache/1", "entries": [merged[k] for k in sorted(merged)]}
    (root / MANIFEST).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_group(root: Path, dim: int, multiplier: int, instances_per_class: int, seed: int) -> list[DesignMatrix]:
    """Load and checksum-verify all designs of one (dim, multiplier) group."""
    root = Path(root)
    entries = {e["file"]: e for e in read_manifest(root)["entries"]}
    regen = (
        f"re-run `transopt generate --dim {dim} --multiplier {multiplier} "
        f"--instances {instances_per_class} --seed {seed}`"
    )
    designs = []
    for class_id in range(1, 25):
        for instance_id in range(1, instances_per_class + 1):
            rel = design_relpath(class_id, instance_id, dim, multiplier)
            entry = entries.get(rel)
            if entry is None or entry["seed"] != seed:
                raise CacheError(f"design cache lacks {rel} for seed {seed}; {regen}")
            path = root / rel
            if not path.exists():
                raise CacheError(f"cache file {rel} is missing; {regen}")
            blob = path.read_bytes()
            if hashlib.sha256(blob).hexdigest() != entry["sha256"]:
                raise CacheError(f"checksum mismatch for {rel}; {regen}")
            designs.append(loads_design(blob.decode("ascii")))
    return designs
