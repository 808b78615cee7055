"""Serialisation of experiment results and spline files."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import Spline
from .exceptions import ConfigError, InvalidArgumentError
from .polyfit import Polynomial

SCHEMA_NAME = "report.schema.json"


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _plain(x):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


@dataclass
class ExperimentReport:
    experiment: str
    version: str
    seed: int
    config: dict
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    status: str = "ok"
    message: str = ""
    wall_time: float = 0.0

    @classmethod
    def from_study(cls, study, experiment, version, seed, config, wall_time=0.0):
        est = {k: {"mean": v.mean, "std_error": v.std_error,
                   "replicates_used": v.replicates_used} for k, v in study.estimates.items()}
        fits = {k: {"slope": f.slope, "intercept": f.intercept,
                    "slope_stderr": f.slope_stderr, "points": [list(p) for p in f.points]}
                for k, f in study.fits.items()}
        return cls(experiment, version, int(seed), dict(config), list(study.columns),
                   [dict(r) for r in study.rows], est, fits, dict(study.flags),
                   wall_time=float(wall_time))

    def to_dict(self) -> dict:
        return _plain({"experiment": self.experiment, "version": self.version,
                       "seed": self.seed, "status": self.status, "message": self.message,
                       "config": self.config, "columns": self.columns, "rows": self.rows,
                       "estimates": self.estimates, "fits": self.fits, "flags": self.flags,
                       "wall_time": self.wall_time})

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir, fmt="csv") -> list:
        """Write ``<experiment>.json`` and, for ``fmt='csv'``, ``<experiment>.csv``."""
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}; choose csv or json")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt == "csv":
            p = out / f"{self.experiment}.csv"
            p.write_text(self.csv_text())
            written.append(p)
        p = out / f"{self.experiment}.json"
        p.write_text(self.json_text())
        written.append(p)
        return written


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath(SCHEMA_NAME).read_text())


# -- path and spline files ---------------------------------------------------


def read_path_csv(path) -> tuple:
    """Two-column ``time,value`` CSV (optional header) as ``(times, values)``."""
    rows = []
    with open(path, newline="") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(x) for x in rec]
            except ValueError:
                if i == 0:
                    continue
                raise InvalidArgumentError(f"line {i + 1}: non-numeric entry {rec}") from None
            if len(vals) != 2:
                raise InvalidArgumentError(f"line {i + 1}: expected 2 columns, got {len(vals)}")
            rows.append(vals)
    if len(rows) < 2:
        raise InvalidArgumentError("input needs at least two samples")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def write_spline_file(path, spline: Spline, r: int, p: float, gamma: float):
    """Header ``# k=.. r=.. p=.. gamma=..``, then ``knot_left,knot_right,coeff_0..coeff_r``.

    Coefficients refer to shifted Legendre polynomials on each piece's
    ``[knot_left, knot_right]`` (see :class:`freeknot.polyfit.Polynomial`).
    """
    with open(path, "w", newline="") as fh:
        fh.write(f"# k={spline.k} r={r} p={_cell(float(p))} gamma={_cell(float(gamma))}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["knot_left", "knot_right"] + [f"coeff_{i}" for i in range(r + 1)])
        for piece in spline.pieces:
            c = np.zeros(r + 1)
            c[:piece.coeffs.size] = piece.coeffs
            w.writerow([_cell(piece.lo), _cell(piece.hi)] + [_cell(x) for x in c])


def read_spline_file(path) -> tuple:
    """Inverse of :func:`write_spline_file`: returns ``(meta, spline)``."""
    with open(path, newline="") as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise InvalidArgumentError("spline file lacks its header line")
        meta = dict(item.split("=", 1) for item in head[1:].split())
        meta = {"k": int(meta["k"]), "r": int(meta["r"]), "p": float(meta["p"]),
                "gamma": float(meta["gamma"])}
        rows = list(csv.reader(fh))[1:]
    knots = [float(rows[0][0])] + [float(r[1]) for r in rows]
    pieces = tuple(Polynomial(float(r[0]), float(r[1]), [float(x) for x in r[2:]]) for r in rows)
    return meta, Spline(np.array(knots), pieces)
