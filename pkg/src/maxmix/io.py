"""CSV readers and writers for sites, raw observations and simulated fields."""
from __future__ import annotations

import csv
import datetime as dt
import json
from pathlib import Path

import numpy as np

from .simulate import FieldSample
from .spatial import InvalidInput, SiteSet

SEASON_MONTHS = frozenset(range(4, 10))  # April to September
INDEX_COLUMNS = ("date", "replicate")


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else format(float(x), ".17g")


def read_sites(path, metric: str = "euclidean") -> SiteSet:
    """Sites CSV with header ``id,c1,c2`` and an optional ``alt`` column (ignored)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"id", "c1", "c2"} <= set(rows[0]):
        raise InvalidInput(f"{path}: sites file needs columns id,c1,c2")
    try:
        coords = np.array([[float(r["c1"]), float(r["c2"])] for r in rows])
    except ValueError as exc:
        raise InvalidInput(f"{path}: bad coordinate ({exc})") from None
    ids = tuple(r["id"].strip() for r in rows)
    if len(set(ids)) != len(ids):
        raise InvalidInput(f"{path}: duplicated site id")
    return SiteSet(coords, metric, ids)


def write_sites(path, sites: SiteSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "c1", "c2"])
        for sid, (c1, c2) in zip(sites.ids, sites.coords):
            w.writerow([sid, _fmt(c1), _fmt(c2)])


def _parse_cell(text: str, where: str) -> float:
    text = text.strip()
    if text == "" or text.upper() == "NA":
        return float("nan")
    try:
        return float(text)
    except ValueError:
        raise InvalidInput(f"non-numeric value {text!r} at {where}") from None


def read_wide(path) -> tuple[list, list, np.ndarray]:
    """Read a wide CSV: an index column (``date`` or ``replicate``) then one column per site.

    Returns the index labels, the site ids and the (rows, sites) matrix with
    NaN for empty cells.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInput(f"{path}: empty data file") from None
        if not header or header[0] not in INDEX_COLUMNS:
            raise InvalidInput(f"{path}: first column must be one of {INDEX_COLUMNS}")
        index, rows = [], []
        for ln, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise InvalidInput(f"{path}:{ln}: expected {len(header)} fields, got {len(rec)}")
            index.append(rec[0].strip())
            rows.append([_parse_cell(c, f"{path}:{ln}:{header[k + 1]}") for k, c in enumerate(rec[1:])])
    values = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    return index, header[1:], values


def in_season(dates, months=SEASON_MONTHS) -> np.ndarray:
    """Boolean mask of ISO dates whose month is in ``months``."""
    try:
        return np.array([dt.date.fromisoformat(d).month in months for d in dates], dtype=bool)
    except ValueError as exc:
        raise InvalidInput(f"bad date ({exc})") from None


def ingest_observations(sites_path, data_path, metric: str = "euclidean",
                        season: bool = False) -> FieldSample:
    """Raw observations aligned to the sites file.

    Data columns are matched to site ids by name and reordered to the sites
    file order. ``season=True`` keeps April to September rows only (needs a
    ``date`` index column).
    """
    sites = read_sites(sites_path, metric)
    index, cols, values = read_wide(data_path)
    known = {sid: k for k, sid in enumerate(sites.ids)}
    unknown = [c for c in cols if c not in known]
    if unknown:
        raise InvalidInput(f"unknown site id(s) in data file: {', '.join(unknown)}")
    missing = [s for s in sites.ids if s not in cols]
    if missing:
        raise InvalidInput(f"no data column for site(s): {', '.join(missing)}")
    order = [cols.index(s) for s in sites.ids]
    values = values[:, order]
    if season:
        mask = in_season(index)
        values = values[mask]
        index = [d for d, m in zip(index, mask) if m]
    if len(values) == 0:
        raise InvalidInput("no observations left after filtering")
    return FieldSample(values, "raw", sites, meta={"index": index, "season": season})


def _jsonable(obj):
    if isinstance(obj, np.random.SeedSequence):
        return {"entropy": obj.entropy, "spawn_key": list(obj.spawn_key)}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def write_field(path, field: FieldSample) -> Path:
    """Write ``replicate,<site ids>`` CSV and a ``.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    ids = field.sites.ids if field.sites is not None else tuple(f"site_{k + 1}" for k in range(field.k))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", *ids])
        for r, row in enumerate(field.values, start=1):
            w.writerow([r, *map(_fmt, row)])
    side = path.with_suffix(".json")
    meta = {k: v for k, v in field.meta.items() if k != "index"}
    dump_json(side, {"margins": field.margins, "seed": field.seed, "meta": meta})
    return side


def read_field(path, sites: SiteSet | None = None, margins: str | None = None) -> FieldSample:
    """Read a field CSV; the margins tag comes from the sidecar when present."""
    path = Path(path)
    _, cols, values = read_wide(path)
    side = path.with_suffix(".json")
    info = json.loads(side.read_text()) if side.exists() else {}
    margins = margins or info.get("margins", "unit-frechet")
    if sites is not None:
        if list(sites.ids) != cols:
            known = set(sites.ids)
            unknown = [c for c in cols if c not in known]
            if unknown:
                raise InvalidInput(f"unknown site id(s) in field file: {', '.join(unknown)}")
            values = values[:, [cols.index(s) for s in sites.ids]]
    return FieldSample(values, margins, sites, info.get("seed"), info.get("meta", {}))


def write_rows(path, rows: list[dict], columns: list[str] | None = None) -> None:
    """Long CSV from a list of dicts; floats written with 17 significant digits."""
    if not rows and columns is None:
        raise InvalidInput("nothing to write")
    columns = columns or list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else
                        int(v) if isinstance(v, (bool, np.bool_)) else v for v in (r[c] for c in columns)])
