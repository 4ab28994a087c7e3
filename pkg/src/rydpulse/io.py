"""CSV readers and writers for fronts, evaluation logs and noise dumps.

Floats are written with 17 significant digits so every value round-trips.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from rydpulse.nsga3 import nondominated_mask


def fmt(x) -> str:
    return format(float(x), ".17g")


def genome_header(dim: int, with_duration: bool = True) -> list[str]:
    n = dim - 1 if with_duration else dim
    cols = [f"phi_{i}" for i in range(n)]
    return cols + ["T"] if with_duration else cols


class NonDominanceError(ValueError):
    pass


def write_front(path, genomes, objectives, stderrs, found) -> None:
    """Write a Pareto front; refuses rows that dominate one another."""
    objectives = np.asarray(objectives, dtype=float).reshape(-1, 2)
    if len(objectives) and not nondominated_mask(objectives).all():
        raise NonDominanceError("front rows are not mutually non-dominated")
    genomes = np.asarray(genomes, dtype=float)
    order = np.lexsort((objectives[:, 1], objectives[:, 0]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "F", "G", "F_stderr", "G_stderr"] + genome_header(genomes.shape[1]))
        for i in order:
            w.writerow(
                [int(found[i])] + [fmt(v) for v in objectives[i]] + [fmt(v) for v in stderrs[i]]
                + [fmt(v) for v in genomes[i]]
            )


def read_front(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        gcols = [c for c in reader.fieldnames or [] if c.startswith("phi_") or c == "T"]
        for row in reader:
            rows.append({
                "generation": int(row["generation"]),
                "F": float(row["F"]),
                "G": float(row["G"]),
                "F_stderr": float(row["F_stderr"]),
                "G_stderr": float(row["G_stderr"]),
                "genome": np.array([float(row[c]) for c in gcols]),
            })
    return rows


EVAL_COLUMNS = ["generation", "index", "kind", "F", "G", "F_stderr", "G_stderr", "error"]


class EvaluationLog:
    """Append-only CSV log with one row per evaluated individual."""

    def __init__(self, path, dim: int):
        self.path = Path(path)
        self.dim = dim

    def start(self, keep_through: int | None = None) -> None:
        """Create the file, or truncate it to generations <= ``keep_through``."""
        header = EVAL_COLUMNS + genome_header(self.dim)
        kept = []
        if keep_through is not None and self.path.exists():
            with open(self.path, newline="") as fh:
                reader = csv.reader(fh)
                next(reader, None)
                kept = [r for r in reader if r and int(r[0]) <= keep_through]
        with open(self.path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(kept)

    def append(self, generation, genomes, estimates, kind="eval") -> None:
        with open(self.path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for i, (g, e) in enumerate(zip(genomes, estimates)):
                w.writerow(
                    [generation, i, kind, fmt(e.F_mean), fmt(e.G_mean), fmt(e.F_stderr), fmt(e.G_stderr),
                     e.error or ""] + [fmt(v) for v in g]
                )


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_genomes(path) -> np.ndarray:
    """Genomes from a text file: one per line, comma or whitespace separated.

    Lines starting with ``#`` and a non-numeric header line are skipped.
    """
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            if rows:
                raise
            continue
    if not rows:
        raise ValueError(f"{path}: no genomes found")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: genomes have inconsistent lengths")
    return np.array(rows)
