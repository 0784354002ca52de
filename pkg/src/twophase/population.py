"""Finite populations and the population parameters the estimators consume."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, fields
from importlib import resources
from typing import IO, Union

import numpy as np

from .errors import DataError

Source = Union[str, os.PathLike, IO]

SUMMARY_KEYS = (
    "N",
    "mean_y",
    "mean_x",
    "mean_z",
    "cv_y",
    "cv_x",
    "cv_z",
    "rho_xy",
    "rho_xz",
    "rho_yz",
    "sigma_z",
    "beta1_z",
    "beta2_z",
)


@dataclass(frozen=True, eq=False)
class FinitePopulation:
    """N units carrying the study variable y and the auxiliaries x and z.

    The value arrays are copied and made read-only on construction.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        cols = []
        for name in ("y", "x", "z"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            cols.append(arr)
        if not (len(cols[0]) == len(cols[1]) == len(cols[2])):
            raise DataError("y, x and z must have the same length")
        if len(cols[0]) < 2:
            raise DataError(f"population has N < 2 (N = {len(cols[0])})")
        for name, arr in zip("yxz", cols):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite value in column {name}")

    @property
    def size(self) -> int:
        return len(self.y)

    def __len__(self) -> int:
        return self.size

    def permuted(self, order) -> FinitePopulation:
        order = np.asarray(order)
        return FinitePopulation(self.y[order], self.x[order], self.z[order], self.label)


@dataclass(frozen=True)
class PopulationSummary:
    """Means, (co)variances, CVs, correlations and z shape coefficients.

    Variances and covariances use divisor N - 1. ``beta1_z`` follows the
    Pearson convention m3**2 / m2**3 and ``beta2_z`` is m4 / m2**2, with
    central moments taken with divisor N.
    """

    n_population: int
    mean_y: float
    mean_x: float
    mean_z: float
    s2_y: float
    s2_x: float
    s2_z: float
    s_xy: float
    s_xz: float
    s_yz: float
    cv_y: float
    cv_x: float
    cv_z: float
    rho_xy: float
    rho_xz: float
    rho_yz: float
    sigma_z: float
    beta1_z: float
    beta2_z: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def key_values(self) -> dict:
        """The 13 keys of the summary file format."""
        d = self.as_dict()
        out = {"N": self.n_population}
        out.update({k: d[k] for k in SUMMARY_KEYS[1:]})
        return out


def _open_text(source: Source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def load_population(source: Source, label: str | None = None) -> FinitePopulation:
    """Read a population from CSV with the header ``y,x,z``.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows: list[tuple[float, float, float]] = []
        if header is not None:
            if [h.strip() for h in header] != ["y", "x", "z"]:
                raise DataError(f"CSV header must be exactly 'y,x,z', got {','.join(header)!r}")
            for lineno, row in enumerate(reader, start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise DataError(f"row {lineno}: expected 3 fields, got {len(row)}")
                try:
                    vals = tuple(float(c) for c in row)
                except ValueError:
                    raise DataError(f"row {lineno}: non-numeric field in {','.join(row)!r}") from None
                if not all(math.isfinite(v) for v in vals):
                    raise DataError(f"row {lineno}: non-finite value")
                rows.append(vals)
    finally:
        if close:
            fh.close()
    if len(rows) < 2:
        raise DataError(f"population has N < 2 (N = {len(rows)})")
    arr = np.array(rows, dtype=float)
    if label is None:
        label = str(source) if isinstance(source, (str, os.PathLike)) else ""
    return FinitePopulation(arr[:, 0], arr[:, 1], arr[:, 2], label=label)


def write_population(pop: FinitePopulation, dest: Source) -> None:
    fh = open(dest, "w", newline="", encoding="utf-8") if isinstance(dest, (str, os.PathLike)) else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "x", "z"])
        for row in zip(pop.y, pop.x, pop.z):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if fh is not dest:
            fh.close()


def summarize(pop: FinitePopulation) -> PopulationSummary:
    """Compute every population parameter from raw unit values."""
    n = pop.size
    y, x, z = pop.y, pop.x, pop.z
    my, mx, mz = float(np.mean(y)), float(np.mean(x)), float(np.mean(z))
    for name, m in (("y", my), ("x", mx), ("z", mz)):
        if m == 0.0:
            raise DataError(f"mean of {name} is zero; coefficient of variation undefined")
    dy, dx, dz = y - my, x - mx, z - mz
    s2_y = float(np.dot(dy, dy)) / (n - 1)
    s2_x = float(np.dot(dx, dx)) / (n - 1)
    s2_z = float(np.dot(dz, dz)) / (n - 1)
    if s2_z == 0.0:
        raise DataError("variance of z is zero; beta1(z) and beta2(z) undefined")
    for name, s2 in (("y", s2_y), ("x", s2_x)):
        if s2 == 0.0:
            raise DataError(f"variance of {name} is zero; correlations undefined")
    s_xy = float(np.dot(dx, dy)) / (n - 1)
    s_xz = float(np.dot(dx, dz)) / (n - 1)
    s_yz = float(np.dot(dy, dz)) / (n - 1)

    def _rho(s, a, b):
        return float(np.clip(s / math.sqrt(a * b), -1.0, 1.0))

    m2 = float(np.mean(dz**2))
    m3 = float(np.mean(dz**3))
    m4 = float(np.mean(dz**4))
    sigma_z = math.sqrt(s2_z)
    return PopulationSummary(
        n_population=n,
        mean_y=my,
        mean_x=mx,
        mean_z=mz,
        s2_y=s2_y,
        s2_x=s2_x,
        s2_z=s2_z,
        s_xy=s_xy,
        s_xz=s_xz,
        s_yz=s_yz,
        cv_y=math.sqrt(s2_y) / abs(my),
        cv_x=math.sqrt(s2_x) / abs(mx),
        cv_z=sigma_z / abs(mz),
        rho_xy=_rho(s_xy, s2_x, s2_y),
        rho_xz=_rho(s_xz, s2_x, s2_z),
        rho_yz=_rho(s_yz, s2_y, s2_z),
        sigma_z=sigma_z,
        beta1_z=m3 * m3 / m2**3,
        beta2_z=m4 / m2**2,
    )


def summary_from_values(values: dict) -> PopulationSummary:
    """Build a summary from the 13 file keys, back-filling (co)variances.

    Values are taken verbatim; no mutual consistency is enforced (see
    :func:`consistency_warnings`).
    """
    for key in SUMMARY_KEYS:
        if key not in values:
            raise DataError(f"summary is missing required key {key!r}")
    v = {k: values[k] for k in SUMMARY_KEYS}
    n = int(v["N"])
    if n != v["N"] or n < 2:
        raise DataError(f"N must be an integer >= 2, got {v['N']}")
    for k in SUMMARY_KEYS[1:]:
        v[k] = float(v[k])
        if not math.isfinite(v[k]):
            raise DataError(f"{k} is not finite")
    for k in ("rho_xy", "rho_xz", "rho_yz"):
        if abs(v[k]) > 1.0:
            raise DataError(f"{k} = {v[k]} outside [-1, 1]")
    for k in ("cv_y", "cv_x", "cv_z"):
        if v[k] <= 0.0:
            raise DataError(f"{k} = {v[k]} must be > 0")
    for k in ("mean_y", "mean_x", "mean_z"):
        if v[k] == 0.0:
            raise DataError(f"{k} must be nonzero")
    if v["sigma_z"] < 0.0 or v["beta1_z"] < 0.0:
        raise DataError("sigma_z and beta1_z must be >= 0")
    if v["beta2_z"] <= 0.0:
        raise DataError("beta2_z must be > 0")
    sd_y = v["cv_y"] * abs(v["mean_y"])
    sd_x = v["cv_x"] * abs(v["mean_x"])
    sd_z = v["cv_z"] * abs(v["mean_z"])
    return PopulationSummary(
        n_population=n,
        mean_y=v["mean_y"],
        mean_x=v["mean_x"],
        mean_z=v["mean_z"],
        s2_y=sd_y**2,
        s2_x=sd_x**2,
        s2_z=sd_z**2,
        s_xy=v["rho_xy"] * sd_x * sd_y,
        s_xz=v["rho_xz"] * sd_x * sd_z,
        s_yz=v["rho_yz"] * sd_y * sd_z,
        cv_y=v["cv_y"],
        cv_x=v["cv_x"],
        cv_z=v["cv_z"],
        rho_xy=v["rho_xy"],
        rho_xz=v["rho_xz"],
        rho_yz=v["rho_yz"],
        sigma_z=v["sigma_z"],
        beta1_z=v["beta1_z"],
        beta2_z=v["beta2_z"],
    )


def parse_summary_text(text: str) -> PopulationSummary:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SUMMARY_KEYS:
            raise DataError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise DataError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = int(val) if key == "N" else float(val)
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric value for {key!r}: {val!r}") from None
    return summary_from_values(values)


def load_summary(source: Source) -> PopulationSummary:
    """Read a ``key = value`` summary file (``#`` starts a comment)."""
    fh, close = _open_text(source)
    try:
        text = fh.read()
    finally:
        if close:
            fh.close()
    return parse_summary_text(text)


def format_summary(summary: PopulationSummary, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for key, val in summary.key_values().items():
        lines.append(f"{key} = {val if key == 'N' else repr(float(val))}")
    return "\n".join(lines) + "\n"


def write_summary(summary: PopulationSummary, dest: Source, header: str | None = None) -> None:
    text = format_summary(summary, header)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def anderson_summary() -> PopulationSummary:
    """Head-measurement summary for 25 families (Anderson, 1958).

    y is the head length of the second son, x the head length of the first
    son and z the head breadth of the first son.
    """
    text = resources.files("twophase").joinpath("data/anderson.summary").read_text(encoding="utf-8")
    return parse_summary_text(text)


def consistency_warnings(summary: PopulationSummary, rtol: float = 1e-3) -> list[str]:
    """Report mutually inconsistent constants. Never raises."""
    out = []
    implied = summary.cv_z * abs(summary.mean_z)
    if summary.sigma_z > 0 and abs(implied - summary.sigma_z) > rtol * summary.sigma_z:
        out.append(
            f"sigma_z = {summary.sigma_z:g} but cv_z * |mean_z| = {implied:g}; "
            "each value is used where its own symbol appears"
        )
    if summary.beta2_z < 1.0:
        out.append(f"beta2_z = {summary.beta2_z:g} < 1 is impossible for any distribution")
    elif summary.beta2_z < summary.beta1_z + 1.0:
        out.append(f"beta2_z < beta1_z + 1 ({summary.beta2_z:g} < {summary.beta1_z + 1:g})")
    rho = np.array(
        [
            [1.0, summary.rho_xy, summary.rho_yz],
            [summary.rho_xy, 1.0, summary.rho_xz],
            [summary.rho_yz, summary.rho_xz, 1.0],
        ]
    )
    if np.linalg.eigvalsh(rho)[0] < -1e-12:
        out.append("correlations do not form a positive semi-definite matrix")
    return out
