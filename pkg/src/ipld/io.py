"""Dataset ingestion and result/trace persistence.

Edge lists are whitespace-separated ``u v`` pairs, one per line, with
``%``/``#`` comment lines, automatic 0-/1-based detection, undirected
deduplication, and self-loop dropping. Results serialize to a single JSON
document; traces to CSV with 17-significant-digit numbers so both round-trip
losslessly.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .applications import DslData, Network

__all__ = [
    "ParseError",
    "EdgeListError",
    "parse_edge_list",
    "parse_dsl_data",
    "write_dsl_data",
    "RunResult",
    "write_result",
    "read_result",
    "write_trace",
    "read_trace",
    "TRACE_HEADER",
]

TRACE_HEADER = ("k", "t", "lambda", "slave_resid", "inner_iters",
                "primal_opt", "dual_resid", "wall_ms")


class ParseError(ValueError):
    pass


EdgeListError = ParseError


def parse_edge_list(path) -> Network:
    """Parse an edge-list file into a Network.

    Lines starting with '%' or '#' (and blank lines) are skipped; the first
    two whitespace-separated tokens of each remaining line must be integer
    endpoints (extra columns such as weights are ignored). Indexing base is
    auto-detected from the minimum index; duplicate undirected edges
    collapse; self-loops are dropped with a warning.
    """
    path = Path(path)
    raw = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith(("%", "#")):
                continue
            tokens = text.split()
            if len(tokens) < 2:
                raise EdgeListError(f"{path}:{lineno}: expected 'u v', got {text!r}")
            try:
                u, v = int(tokens[0]), int(tokens[1])
            except ValueError as exc:
                raise EdgeListError(
                    f"{path}:{lineno}: non-integer endpoint in {text!r}"
                ) from exc
            raw.append((u, v, lineno))
    if not raw:
        raise EdgeListError(f"{path}: no edges found")

    base = min(min(u, v) for u, v, _ in raw)
    if base not in (0, 1):
        raise EdgeListError(f"{path}: minimum node index {base}; expected 0 or 1")
    edges = []
    dropped = 0
    for u, v, lineno in raw:
        u, v = u - base, v - base
        if u == v:
            dropped += 1
            continue
        edges.append((min(u, v), max(u, v)))
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} self-loop line(s)", stacklevel=2)
    edges = tuple(sorted(set(edges)))
    nodes = max(max(u, v) for u, v in edges) + 1
    return Network(nodes, edges)


# ---------------------------------------------------------------------------
# DSL matrix text format


def parse_dsl_data(path) -> DslData:
    """Read DSL data from the plain-text matrix format.

    Layout (whitespace-separated numbers, comments with '#'):
    header ``m M`` (users, channels); one row ``budget`` of m values; one row
    ``power_cap`` of m values; then per channel: rows ``a``, ``c``,
    ``offsets`` of m values each, followed by the m-by-m ``gains`` rows.
    """
    tokens = []
    with Path(path).open() as fh:
        for line in fh:
            text = line.split("#", 1)[0].strip()
            if text:
                tokens.extend(text.split())
    it = iter(tokens)

    def take(k):
        vals = []
        for _ in range(k):
            try:
                vals.append(float(next(it)))
            except StopIteration:
                raise EdgeListError(f"{path}: truncated DSL data file") from None
        return np.array(vals)

    m = int(take(1)[0])
    M = int(take(1)[0])
    budget = take(m)
    power_cap = take(m)
    a = np.zeros((M, m))
    c = np.zeros((M, m))
    offsets = np.zeros((M, m))
    gains = np.zeros((M, m, m))
    for i in range(M):
        a[i] = take(m)
        c[i] = take(m)
        offsets[i] = take(m)
        for row in range(m):
            gains[i, row] = take(m)
    leftovers = sum(1 for _ in it)
    if leftovers:
        raise EdgeListError(f"{path}: {leftovers} unexpected trailing value(s)")
    return DslData(a=a, c=c, offsets=offsets, gains=gains, budget=budget,
                   power_cap=power_cap)


def write_dsl_data(data: DslData, path) -> None:
    """Write DSL data in the format read by :func:`parse_dsl_data`."""
    fmt = lambda row: " ".join(format(x, ".17g") for x in np.atleast_1d(row))
    with Path(path).open("w") as fh:
        fh.write(f"{data.users} {data.channels}\n")
        fh.write(fmt(data.budget) + "\n")
        fh.write(fmt(data.power_cap) + "\n")
        for i in range(data.channels):
            fh.write(fmt(data.a[i]) + "\n")
            fh.write(fmt(data.c[i]) + "\n")
            fh.write(fmt(data.offsets[i]) + "\n")
            for row in range(data.users):
                fh.write(fmt(data.gains[i, row]) + "\n")


# ---------------------------------------------------------------------------
# results and traces


@dataclass
class RunResult:
    """One solver run: headline numbers, certificate fields, config echo."""

    solver: str
    objective: float
    feasibility: float
    iterations: int
    converged: bool
    wall_s: float
    certificate: dict | None = None
    config: dict = field(default_factory=dict)
    trace_path: str | None = None
    extra: dict = field(default_factory=dict)


def write_result(result, path) -> None:
    """Serialize a RunResult (or list of them) as one JSON document."""
    if isinstance(result, RunResult):
        doc = {"runs": [asdict(result)]}
    elif isinstance(result, dict):
        doc = result
    else:
        doc = {"runs": [asdict(r) for r in result]}
    try:
        Path(path).write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write result to {path}: {exc}") from exc


def read_result(path):
    """Inverse of :func:`write_result`; returns a list of RunResult."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OSError(f"cannot read result from {path}: {exc}") from exc
    return [RunResult(**run) for run in doc["runs"]]


def write_trace(trace, path) -> None:
    """Write per-iteration records as CSV (17 significant digits).

    ``inner_iters`` counts slave Newton steps plus master inner iterations;
    ``dual_resid`` is the dual-metric residual of the coupling perturbation.
    """
    g = lambda x: format(float(x), ".17g")
    try:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for rec in trace:
                w.writerow([
                    rec.k,
                    g(rec.t),
                    g(rec.lam),
                    g(rec.slave_resid),
                    rec.newton_iters + rec.master_inner,
                    g(rec.cert.primal_opt),
                    g(rec.cert.dual_resid_e),
                    g(rec.wall_ms),
                ])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path) -> list:
    """Read a trace CSV back as a list of dict rows (floats/int fields)."""
    rows = []
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(TRACE_HEADER):
            raise ValueError(f"{path}: unexpected trace header {reader.fieldnames}")
        for row in reader:
            rows.append({
                "k": int(row["k"]),
                "t": float(row["t"]),
                "lambda": float(row["lambda"]),
                "slave_resid": float(row["slave_resid"]),
                "inner_iters": int(row["inner_iters"]),
                "primal_opt": float(row["primal_opt"]),
                "dual_resid": float(row["dual_resid"]),
                "wall_ms": float(row["wall_ms"]),
            })
    return rows
