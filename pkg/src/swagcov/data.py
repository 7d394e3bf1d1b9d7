"""Grouped matrix-variate datasets: ingestion, preprocessing, persistence.

Data layout on disk is one comma-delimited text file per group (rows =
observations, columns = the p = p1*p2 vectorized entries in column-stacking
order) plus a manifest file listing the group files and the matrix shape.
Thinned posterior draws use a small self-describing binary container.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from swagcov.linalg import MatrixShape

FMT = "%.17g"  # round-trip formatting for all emitted numeric text

DRAWS_MAGIC = b"SWAG1"
DRAWS_VERSION = 1


class DatasetFormatError(ValueError):
    """Malformed dataset manifest or group file."""


class DrawsFormatError(ValueError):
    """Corrupt or mismatched draws container."""


@dataclass
class Group:
    label: str
    Y: NDArray  # (n_j, p), rows are vectorized observations


@dataclass
class PreprocessRecord:
    """Per-group column means and scales removed during preprocessing."""

    means: dict[str, NDArray] = field(default_factory=dict)
    scales: dict[str, NDArray] = field(default_factory=dict)


@dataclass
class GroupedDataset:
    groups: list[Group]
    shape: MatrixShape
    preprocessing: PreprocessRecord | None = None

    def matrices(self) -> list[NDArray]:
        return [g.Y for g in self.groups]

    def labels(self) -> list[str]:
        return [g.label for g in self.groups]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def validate(self) -> None:
        if not self.groups:
            raise DatasetFormatError("dataset has no groups")
        p = self.shape.p
        for g in self.groups:
            if g.Y.ndim != 2 or g.Y.shape[1] != p:
                raise DatasetFormatError(
                    f"group '{g.label}' has column count {g.Y.shape[-1]}, expected p={p}"
                )
            if g.Y.shape[0] < 1:
                raise DatasetFormatError(f"group '{g.label}' is empty")
            if not np.all(np.isfinite(g.Y)):
                raise DatasetFormatError(f"group '{g.label}' contains non-finite values")


def center_and_standardize(data: GroupedDataset) -> tuple[GroupedDataset, PreprocessRecord]:
    """Per group: subtract column means, divide columns by their standard
    deviations.  The removed means/scales are recorded so covariance
    estimates can be rescaled by D^{1/2} Sigma D^{1/2} downstream.

    Zero-variance columns are reported and their scale clamped to 1.
    """
    record = PreprocessRecord()
    new_groups = []
    for g in data.groups:
        if g.Y.shape[0] < 2:
            raise DatasetFormatError(
                f"group '{g.label}' needs at least 2 observations to standardize"
            )
        mean = g.Y.mean(axis=0)
        scale = g.Y.std(axis=0, ddof=1)
        dead = scale <= 0
        if np.any(dead):
            warnings.warn(
                f"group '{g.label}': {int(dead.sum())} zero-variance column(s); "
                "scale clamped to 1"
            )
            scale = np.where(dead, 1.0, scale)
        record.means[g.label] = mean
        record.scales[g.label] = scale
        new_groups.append(Group(g.label, (g.Y - mean) / scale))
    return (
        GroupedDataset(new_groups, data.shape, preprocessing=record),
        record,
    )


def rescale_covariance(est: NDArray, record: PreprocessRecord, label: str) -> NDArray:
    """Re-introduce a group's removed scale: D^{1/2} Sigma D^{1/2}."""
    d = record.scales[label]
    return est * np.outer(d, d)


# ---------------------------------------------------------------------------
# delimited-text dataset files


def load_dataset(manifest_path: str | Path) -> GroupedDataset:
    """Load a dataset from a manifest file.

    Manifest format (flat key = value text, '#' comments):
        p1 = 2
        p2 = 3
        group = label, relative/path.csv
    Group paths are resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    p1 = p2 = None
    entries: list[tuple[str, Path]] = []
    for lineno, raw in enumerate(manifest_path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetFormatError(f"{manifest_path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "p1":
            p1 = int(val)
        elif key == "p2":
            p2 = int(val)
        elif key == "group":
            parts = [s.strip() for s in val.split(",", 1)]
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DatasetFormatError(
                    f"{manifest_path}:{lineno}: group entries are 'label, path'"
                )
            entries.append((parts[0], manifest_path.parent / parts[1]))
        else:
            raise DatasetFormatError(f"{manifest_path}:{lineno}: unknown key '{key}'")
    if p1 is None or p2 is None or not entries:
        raise DatasetFormatError(f"{manifest_path}: manifest needs p1, p2, and group lines")
    shape = MatrixShape(p1, p2)

    groups = []
    for label, path in entries:
        rows = []
        width = None
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DatasetFormatError(
                    f"{path}:{lineno}: ragged row ({len(cells)} cells, expected {width})"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: non-numeric cell") from exc
        if not rows:
            raise DatasetFormatError(f"{path}: group '{label}' is empty")
        if width != shape.p:
            raise DatasetFormatError(
                f"{path}: column count {width} does not match p1*p2 = {shape.p}"
            )
        groups.append(Group(label, np.array(rows)))
    ds = GroupedDataset(groups, shape)
    ds.validate()
    return ds


def save_dataset(data: GroupedDataset, out_dir: str | Path, name: str = "dataset") -> Path:
    """Write group CSVs plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"p1 = {data.shape.p1}", f"p2 = {data.shape.p2}"]
    for g in data.groups:
        fname = f"{name}_{g.label}.csv"
        np.savetxt(out_dir / fname, g.Y, fmt=FMT, delimiter=",")
        lines.append(f"group = {g.label}, {fname}")
    manifest = out_dir / f"{name}.manifest"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# binary draws container


def write_draws(path: str | Path, sigma_draws: NDArray) -> None:
    """Persist thinned per-group covariance draws.

    Layout: magic "SWAG1"; header of four little-endian u32 (format version,
    J, p, draw count); then little-endian float64, serialized group-major,
    draw-major, column-major within each matrix.
    """
    sigma_draws = np.asarray(sigma_draws, dtype=float)
    if sigma_draws.ndim != 4 or sigma_draws.shape[2] != sigma_draws.shape[3]:
        raise ValueError("expected draws of shape (n_draws, J, p, p)")
    n_draws, J, p, _ = sigma_draws.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(DRAWS_MAGIC)
        fh.write(struct.pack("<IIII", DRAWS_VERSION, J, p, n_draws))
        # (J, n_draws, p, p) with trailing axes swapped: C-order ravel then
        # emits each matrix column-major
        body = np.ascontiguousarray(
            sigma_draws.transpose(1, 0, 3, 2), dtype="<f8"
        )
        fh.write(body.tobytes())


def read_draws(path: str | Path) -> NDArray:
    """Read a draws container back to an array of shape (n_draws, J, p, p)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(DRAWS_MAGIC) + 16 or raw[: len(DRAWS_MAGIC)] != DRAWS_MAGIC:
        raise DrawsFormatError(f"{path}: bad magic bytes")
    version, J, p, n_draws = struct.unpack_from("<IIII", raw, len(DRAWS_MAGIC))
    if version != DRAWS_VERSION:
        raise DrawsFormatError(f"{path}: unsupported format version {version}")
    expected = len(DRAWS_MAGIC) + 16 + 8 * n_draws * J * p * p
    if len(raw) != expected:
        raise DrawsFormatError(
            f"{path}: size {len(raw)} does not match header ({expected} expected)"
        )
    body = np.frombuffer(raw, dtype="<f8", offset=len(DRAWS_MAGIC) + 16)
    return body.reshape(J, n_draws, p, p).transpose(1, 0, 3, 2).copy()


# ---------------------------------------------------------------------------
# run manifest


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_run_manifest(
    path: str | Path,
    entries: dict[str, object],
    files: dict[str, str | Path] | None = None,
) -> None:
    """Key = value run manifest with sha256 digests of the listed files."""
    lines = []
    for k, v in entries.items():
        if isinstance(v, float):
            v = FMT % v
        lines.append(f"{k} = {v}")
    for name, fpath in (files or {}).items():
        lines.append(f"sha256.{name} = {sha256_file(fpath)}")
    Path(path).write_text("\n".join(lines) + "\n")
