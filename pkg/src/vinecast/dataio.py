"""File formats: CSV data files, structure/copula JSON, run manifests.

All numbers are serialized with 17 significant digits so doubles
round-trip exactly.  CSV files may carry leading ``#`` comment lines
(used to reference the manifest that produced them); readers skip them.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import io
import json
import os

import numpy as np

from .errors import DataFormatError
from .matrix_core import CovMatrix, IntradayPanel
from .vine_structure import RVineStructure

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def _normalize_days(labels: list[str], what: str) -> list[str]:
    """Days must be contiguous integers or ISO dates; returns sorted labels."""
    try:
        as_int = [int(lbl) for lbl in labels]
    except ValueError:
        as_int = None
    if as_int is not None:
        ordered = sorted(as_int)
        if ordered != list(range(ordered[0], ordered[0] + len(ordered))):
            raise DataFormatError(f"{what}: integer days must be contiguous")
        return [str(d) for d in ordered]
    try:
        parsed = [(datetime.date.fromisoformat(lbl), lbl) for lbl in labels]
    except ValueError as exc:
        raise DataFormatError(
            f"{what}: days must be integers or ISO dates: {exc}") from exc
    return [lbl for _, lbl in sorted(parsed)]


def _open_rows(path: str, expected_header: list[str], what: str):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(io.StringIO("".join(lines)))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError(f"{what}: file {path} is empty") from None
    if [h.strip() for h in header] != expected_header:
        raise DataFormatError(
            f"{what}: expected header {','.join(expected_header)}, "
            f"got {','.join(header)}")
    return list(reader)


def read_cov_series(path: str) -> tuple[list[CovMatrix], list[str], list[str]]:
    """Read a long-format covariance series CSV.

    Header ``day,row_asset,col_asset,value``; only the upper triangle
    including the diagonal is required.  Returns (series, asset names,
    day labels), assets sorted by name.
    """
    rows = _open_rows(path, ["day", "row_asset", "col_asset", "value"],
                      "covariance series")
    cells: dict[str, dict[tuple[str, str], float]] = {}
    assets: set[str] = set()
    for day, ra, ca, value in rows:
        try:
            v = float(value)
        except ValueError as exc:
            raise DataFormatError(f"bad value {value!r} on day {day}") from exc
        assets.update((ra, ca))
        cells.setdefault(day, {})[(ra, ca)] = v
    if not cells:
        raise DataFormatError(f"covariance series {path} has no data rows")
    names = sorted(assets)
    index = {a: i for i, a in enumerate(names)}
    days = _normalize_days(list(cells), "covariance series")
    series = []
    d = len(names)
    for t, day in enumerate(days):
        m = np.full((d, d), np.nan)
        for (ra, ca), v in cells[day].items():
            m[index[ra], index[ca]] = v
            m[index[ca], index[ra]] = v
        if np.isnan(m).any():
            raise DataFormatError(f"day {day}: incomplete upper triangle")
        series.append(CovMatrix(m, date_index=t))
    return series, names, days


def write_cov_series(path: str, series: list[CovMatrix], assets: list[str],
                     days: list[str], manifest: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest:
            fh.write(f"# manifest={manifest}\n")
        writer = csv.writer(fh)
        writer.writerow(["day", "row_asset", "col_asset", "value"])
        for day, cov in zip(days, series):
            v = cov.values
            for i in range(len(assets)):
                for j in range(i, len(assets)):
                    writer.writerow([day, assets[i], assets[j], fmt(v[i, j])])


def read_intraday_panel(path: str) -> tuple[IntradayPanel, list[str], list[str],
                                            list[str]]:
    """Read an intraday CSV (``day,period,asset,log_return``).

    Days whose asset/period grid is incomplete are skipped with a
    warning message collected in the returned list.
    """
    rows = _open_rows(path, ["day", "period", "asset", "log_return"],
                      "intraday panel")
    data: dict[str, dict[tuple[str, str], float]] = {}
    assets: set[str] = set()
    periods: set[str] = set()
    for day, period, asset, ret in rows:
        try:
            v = float(ret)
        except ValueError as exc:
            raise DataFormatError(f"bad log_return {ret!r} on day {day}") from exc
        assets.add(asset)
        periods.add(period)
        data.setdefault(day, {})[(period, asset)] = v
    if not data:
        raise DataFormatError(f"intraday panel {path} has no data rows")
    names = sorted(assets)
    try:
        period_order = sorted(periods, key=int)
    except ValueError:
        period_order = sorted(periods)
    warnings: list[str] = []
    full_days = []
    for day in data:
        if len(data[day]) == len(names) * len(period_order):
            full_days.append(day)
        else:
            warnings.append(f"day {day}: incomplete grid, skipped")
    days = _normalize_days(full_days, "intraday panel")
    cube = np.empty((len(days), len(period_order), len(names)))
    for t, day in enumerate(days):
        for p, period in enumerate(period_order):
            for a, asset in enumerate(names):
                cube[t, p, a] = data[day][(period, asset)]
    return IntradayPanel(cube, asset_names=tuple(names)), names, days, warnings


def write_components(path: str, days: list[str], component_ids: list[str],
                     values: np.ndarray, manifest: str | None = None) -> None:
    """Transformed-series CSV: ``day,component_id,value``."""
    with open(path, "w", newline="") as fh:
        if manifest:
            fh.write(f"# manifest={manifest}\n")
        writer = csv.writer(fh)
        writer.writerow(["day", "component_id", "value"])
        for t, day in enumerate(days):
            for k, cid in enumerate(component_ids):
                writer.writerow([day, cid, fmt(values[t, k])])


def read_components(path: str) -> tuple[np.ndarray, list[str], list[str]]:
    rows = _open_rows(path, ["day", "component_id", "value"],
                      "transformed series")
    by_day: dict[str, dict[str, float]] = {}
    ids: list[str] = []
    for day, cid, value in rows:
        if cid not in ids:
            ids.append(cid)
        by_day.setdefault(day, {})[cid] = float(value)
    days = _normalize_days(list(by_day), "transformed series")
    values = np.array([[by_day[d][cid] for cid in ids] for d in days])
    return values, ids, days


def save_structure(path: str, structure: RVineStructure,
                   manifest: str | None = None) -> None:
    data = structure.to_dict()
    if manifest:
        data["manifest"] = manifest
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_structure(path: str) -> RVineStructure:
    with open(path) as fh:
        return RVineStructure.from_dict(json.load(fh))


def save_json(path: str, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_manifest(config: dict, root_seed: int, inputs: dict[str, str],
                   tool_version: str, extra: dict | None = None) -> dict:
    manifest = {
        "tool": "vinecast",
        "version": tool_version,
        "root_seed": root_seed,
        "config_hash": config_hash(config),
        "config": config,
        "inputs": {os.path.basename(p): digest for p, digest in inputs.items()},
    }
    if extra:
        manifest.update(extra)
    return manifest


def read_returns(path: str) -> tuple[np.ndarray, list[str], list[str]]:
    """Daily returns CSV (``day,asset,return``) as a (T, d) array."""
    rows = _open_rows(path, ["day", "asset", "return"], "daily returns")
    by_day: dict[str, dict[str, float]] = {}
    assets: set[str] = set()
    for day, asset, value in rows:
        assets.add(asset)
        by_day.setdefault(day, {})[asset] = float(value)
    names = sorted(assets)
    days = _normalize_days(list(by_day), "daily returns")
    try:
        values = np.array([[by_day[d][a] for a in names] for d in days])
    except KeyError as exc:
        raise DataFormatError(f"daily returns: missing asset {exc}") from exc
    return values, names, days
