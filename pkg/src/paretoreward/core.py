"""Domain types, cohort CSV ingestion and candidate criteria construction."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyProfile, EmptySplit, MissingColumn, ParseError

#: Target used for half-open (maximise / minimise) profile intervals.
SENTINEL = 1e9

ASSAY_PREFIX = "assay:"
COMPONENT_PREFIX = "component:"
GENOME_PREFIX = "genome:"


def fmt(x: float) -> str:
    """Format a float with 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


class ObjectiveKind(enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"
    RANGE = "range"


@dataclass(frozen=True)
class DesignPoint:
    id: int
    genome: tuple[float, ...]
    assays: tuple[float, ...]
    components: tuple[float, ...]
    cycle: int = 0
    # Externally supplied evaluation score, when the cohort carries one.
    evaluation: float | None = None

    def __post_init__(self):
        if any(not (0.0 <= g <= 1.0) for g in self.genome):
            raise ValueError(f"point {self.id}: genome coordinates must lie in [0, 1]")
        if self.cycle < 0:
            raise ValueError(f"point {self.id}: cycle must be nonnegative")


@dataclass(frozen=True)
class AssayInterval:
    name: str
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError(f"{self.name}: NaN bound")
        if self.lower > self.upper:
            raise ValueError(f"{self.name}: lower bound exceeds upper bound")
        if math.isinf(self.lower) and math.isinf(self.upper):
            raise ValueError(f"{self.name}: at least one bound must be finite")


@dataclass(frozen=True)
class IntervalProfile:
    assays: tuple[AssayInterval, ...]

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.assays]


@dataclass(frozen=True)
class CandidateCriteria:
    targets: tuple[float, ...]
    kinds: tuple[ObjectiveKind, ...]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.targets) != len(self.kinds):
            raise DimensionMismatch("criteria targets and kinds differ in length")

    @property
    def K(self) -> int:
        return len(self.targets)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.targets, dtype=float)


@dataclass(frozen=True)
class CohortTable:
    """An immutable collection of dimensionally consistent design points."""

    points: tuple[DesignPoint, ...]
    d: int
    K: int
    N: int
    assay_names: tuple[str, ...] = ()
    component_names: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for p in self.points:
            if p.id in seen:
                raise ValueError(f"duplicate point id {p.id}")
            seen.add(p.id)
            if len(p.genome) != self.d or len(p.assays) != self.K or len(p.components) != self.N:
                raise DimensionMismatch(f"point {p.id} does not match table dimensions")
        if self.assay_names and len(self.assay_names) != self.K:
            raise DimensionMismatch("assay_names length differs from K")
        if self.component_names and len(self.component_names) != self.N:
            raise DimensionMismatch("component_names length differs from N")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([p.id for p in self.points], dtype=np.int64)

    @cached_property
    def cycles(self) -> np.ndarray:
        return np.array([p.cycle for p in self.points], dtype=np.int64)

    @cached_property
    def assay_matrix(self) -> np.ndarray:
        return np.array([p.assays for p in self.points], dtype=float).reshape(len(self), self.K)

    @cached_property
    def component_matrix(self) -> np.ndarray:
        return np.array([p.components for p in self.points], dtype=float).reshape(len(self), self.N)

    @cached_property
    def genome_matrix(self) -> np.ndarray:
        return np.array([p.genome for p in self.points], dtype=float).reshape(len(self), self.d)

    @cached_property
    def index(self) -> dict[int, int]:
        """Map from point id to row position."""
        return {p.id: i for i, p in enumerate(self.points)}

    @property
    def has_evaluations(self) -> bool:
        return bool(self.points) and all(p.evaluation is not None for p in self.points)

    def subset(self, keep: Iterable[bool]) -> "CohortTable":
        pts = tuple(p for p, k in zip(self.points, keep) if k)
        return CohortTable(pts, self.d, self.K, self.N, self.assay_names, self.component_names)


@dataclass(frozen=True)
class CohortSchema:
    """Maps CSV columns to roles.

    ``None`` for a column group means "every header column carrying the
    default prefix" (``assay:``, ``component:``, ``genome:``).
    """

    id: str = "id"
    cycle: str = "cycle"
    assays: tuple[str, ...] | None = None
    components: tuple[str, ...] | None = None
    genome: tuple[str, ...] | None = None
    evaluation: str | None = "eval"

    @classmethod
    def from_dict(cls, doc: dict) -> "CohortSchema":
        kw = dict(doc)
        for key in ("assays", "components", "genome"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        return cls(**kw)


def _strip(name: str, prefix: str) -> str:
    return name[len(prefix):] if name.startswith(prefix) else name


def _resolve(header: list[str], explicit, prefix: str) -> list[str]:
    if explicit is None:
        return [h for h in header if h.startswith(prefix)]
    missing = [c for c in explicit if c not in header]
    if missing:
        raise MissingColumn(missing[0])
    return list(explicit)


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, col, text) from None
    if not math.isfinite(value):
        raise ParseError(row, col, text)
    return value


def _parse_int(text: str, row: int, col: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(row, col, text) from None


def load_cohort(path: str | Path, schema: CohortSchema | None = None) -> CohortTable:
    """Read a cohort CSV; one :class:`DesignPoint` per data row.

    Any unparseable or non-finite numeric cell aborts the load with
    :class:`ParseError` (row numbers are 1-based data rows).
    """
    schema = schema or CohortSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(schema.id) from None
        header = [h.strip() for h in header]
        for col in (schema.id, schema.cycle):
            if col not in header:
                raise MissingColumn(col)
        assay_cols = _resolve(header, schema.assays, ASSAY_PREFIX)
        comp_cols = _resolve(header, schema.components, COMPONENT_PREFIX)
        genome_cols = _resolve(header, schema.genome, GENOME_PREFIX)
        eval_col = schema.evaluation if schema.evaluation in header else None
        pos = {h: i for i, h in enumerate(header)}

        points = []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DimensionMismatch(
                    f"row {rownum} has {len(row)} fields, header has {len(header)}"
                )
            cell = lambda c: row[pos[c]].strip()  # noqa: E731
            evaluation = None
            if eval_col is not None:
                evaluation = _parse_float(cell(eval_col), rownum, eval_col)
            genome = tuple(_parse_float(cell(c), rownum, c) for c in genome_cols)
            if any(not 0.0 <= g <= 1.0 for g in genome):
                raise ParseError(rownum, "genome", "coordinate outside [0, 1]")
            points.append(
                DesignPoint(
                    id=_parse_int(cell(schema.id), rownum, schema.id),
                    genome=genome,
                    assays=tuple(_parse_float(cell(c), rownum, c) for c in assay_cols),
                    components=tuple(_parse_float(cell(c), rownum, c) for c in comp_cols),
                    cycle=_parse_int(cell(schema.cycle), rownum, schema.cycle),
                    evaluation=evaluation,
                )
            )
    return CohortTable(
        points=tuple(points),
        d=len(genome_cols),
        K=len(assay_cols),
        N=len(comp_cols),
        assay_names=tuple(_strip(c, ASSAY_PREFIX) for c in assay_cols),
        component_names=tuple(_strip(c, COMPONENT_PREFIX) for c in comp_cols),
    )


def write_cohort(table: CohortTable, path: str | Path) -> None:
    """Write ``table`` in the default-prefix CSV layout."""
    assay_names = table.assay_names or tuple(f"a{i}" for i in range(table.K))
    comp_names = table.component_names or tuple(f"c{i}" for i in range(table.N))
    with_eval = table.has_evaluations
    header = ["id", "cycle"]
    header += [f"{ASSAY_PREFIX}{n}" for n in assay_names]
    header += [f"{COMPONENT_PREFIX}{n}" for n in comp_names]
    header += [f"{GENOME_PREFIX}{i}" for i in range(table.d)]
    if with_eval:
        header.append("eval")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for p in table.points:
            row = [str(p.id), str(p.cycle)]
            row += [fmt(v) for v in p.assays]
            row += [fmt(v) for v in p.components]
            row += [fmt(v) for v in p.genome]
            if with_eval:
                row.append(fmt(p.evaluation))
            w.writerow(row)


def load_profile(path: str | Path) -> IntervalProfile:
    """Read a profile JSON document (``null`` bounds mean unbounded)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return profile_from_dict(doc)


def profile_from_dict(doc: dict) -> IntervalProfile:
    entries = []
    for a in doc.get("assays", []):
        lo = a.get("lower")
        hi = a.get("upper")
        entries.append(
            AssayInterval(
                name=str(a["name"]),
                lower=-math.inf if lo is None else float(lo),
                upper=math.inf if hi is None else float(hi),
            )
        )
    return IntervalProfile(tuple(entries))


def criteria_from_profile(profile: IntervalProfile) -> CandidateCriteria:
    """Turn desirable assay intervals into a target point.

    Half-open intervals become maximise/minimise objectives aimed at
    ``±SENTINEL``; closed intervals target their midpoint.
    """
    if not profile.assays:
        raise EmptyProfile("profile has no assays")
    targets, kinds = [], []
    for a in profile.assays:
        if math.isinf(a.upper):
            targets.append(SENTINEL)
            kinds.append(ObjectiveKind.MAXIMIZE)
        elif math.isinf(a.lower):
            targets.append(-SENTINEL)
            kinds.append(ObjectiveKind.MINIMIZE)
        else:
            targets.append((a.lower + a.upper) / 2.0)
            kinds.append(ObjectiveKind.RANGE)
    return CandidateCriteria(tuple(targets), tuple(kinds), tuple(profile.names))


def split_by_cycle(table: CohortTable, cycle: int) -> tuple[CohortTable, CohortTable]:
    """Temporal split: train on cycles before ``cycle``, test on ``cycle``.

    Raises :class:`EmptySplit` (with ``side`` set) when either side is empty.
    """
    if cycle < 1:
        raise ValueError("cycle must be >= 1")
    cycles = table.cycles
    train = table.subset(cycles < cycle)
    test = table.subset(cycles == cycle)
    if len(train) == 0:
        raise EmptySplit("train", cycle)
    if len(test) == 0:
        raise EmptySplit("test", cycle)
    return train, test


def make_table(
    assays: Sequence[Sequence[float]] | np.ndarray,
    components: Sequence[Sequence[float]] | np.ndarray | None = None,
    genomes: Sequence[Sequence[float]] | np.ndarray | None = None,
    cycles: Sequence[int] | None = None,
    ids: Sequence[int] | None = None,
    evaluations: Sequence[float] | None = None,
    assay_names: Sequence[str] = (),
    component_names: Sequence[str] = (),
) -> CohortTable:
    """Build a table from arrays; components default to the assays."""
    A = np.asarray(assays, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch("assays must be a 2-D array")
    n = A.shape[0]
    C = A if components is None else np.asarray(components, dtype=float).reshape(n, -1)
    G = np.zeros((n, 0)) if genomes is None else np.asarray(genomes, dtype=float).reshape(n, -1)
    ids = list(range(n)) if ids is None else list(ids)
    cycles = [0] * n if cycles is None else list(cycles)
    if len(ids) != n or len(cycles) != n:
        raise DimensionMismatch("ids/cycles length differs from number of rows")
    pts = tuple(
        DesignPoint(
            id=int(ids[i]),
            genome=tuple(G[i].tolist()),
            assays=tuple(A[i].tolist()),
            components=tuple(C[i].tolist()),
            cycle=int(cycles[i]),
            evaluation=None if evaluations is None else float(evaluations[i]),
        )
        for i in range(n)
    )
    return CohortTable(pts, G.shape[1], A.shape[1], C.shape[1], tuple(assay_names), tuple(component_names))
