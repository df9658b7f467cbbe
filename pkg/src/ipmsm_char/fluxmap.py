"""Flux-linkage lookup tables over the (Id, Iq) plane.

A :class:`FluxMap` stores Ψd and Ψq on a rectangular current grid and is
queried by bilinear interpolation.  It never extrapolates.

Symmetry completion
-------------------
The flux linkage is mirror symmetric about the d-axis, Ψ(π + β) = Ψ(π - β).
Reflecting the current phasor about the d-axis maps (Id, Iq) to (Id, -Iq),
and the flux phasor is reflected with it, so in components

    Ψd(Id, -Iq) =  Ψd(Id, Iq)      (even in Iq)
    Ψq(Id, -Iq) = -Ψq(Id, Iq)      (odd in Iq)

A table computed for Iq >= 0 therefore determines the whole plane.
"""
from __future__ import annotations

import bisect
import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (BadDomain, DuplicatePoint, IncompleteGrid, NonFiniteValue,
                     OutOfRange)
from .machine import CurrentPolar, DqValue, dq_from_polar

# Queries this close to a grid bound (relative to the axis span) are snapped
# onto it; absorbs round-off such as cos(π/2) != 0.
BOUND_SNAP = 1e-9


class MapSource(enum.Enum):
    EXTERNAL = "External"
    SYNTHETIC = "Synthetic"


@dataclass(frozen=True, eq=False)
class FluxMap:
    """
    Tabulated flux linkages.

    Parameters
    ----------
    id_grid, iq_grid : ndarray
        Strictly ascending current axes (A), at least two points each.
    psi_d, psi_q : ndarray
        Flux linkages (Vs), shape ``(len(id_grid), len(iq_grid))``.
    completed_by_symmetry : bool
    source : MapSource
    """
    id_grid: np.ndarray
    iq_grid: np.ndarray
    psi_d: np.ndarray
    psi_q: np.ndarray
    completed_by_symmetry: bool = False
    source: MapSource = MapSource.EXTERNAL
    _lists: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idg = np.array(self.id_grid, dtype=float)
        iqg = np.array(self.iq_grid, dtype=float)
        pd = np.array(self.psi_d, dtype=float)
        pq = np.array(self.psi_q, dtype=float)
        for g, name in ((idg, "id_grid"), (iqg, "iq_grid")):
            if g.ndim != 1 or len(g) < 2:
                raise ValueError(f"{name} needs at least two points")
            if np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} must be strictly ascending")
        shape = (len(idg), len(iqg))
        if pd.shape != shape or pq.shape != shape:
            raise ValueError(f"flux matrices must have shape {shape}")
        for arr in (idg, iqg, pd, pq):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteValue("flux map contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "id_grid", idg)
        object.__setattr__(self, "iq_grid", iqg)
        object.__setattr__(self, "psi_d", pd)
        object.__setattr__(self, "psi_q", pq)
        # plain lists make the scalar query path several times faster
        object.__setattr__(self, "_lists", (idg.tolist(), iqg.tolist(),
                                            pd.tolist(), pq.tolist()))

    def __eq__(self, other):
        if not isinstance(other, FluxMap):
            return NotImplemented
        return (self.completed_by_symmetry == other.completed_by_symmetry
                and self.source == other.source
                and all(np.array_equal(a, b) for a, b in zip(
                    (self.id_grid, self.iq_grid, self.psi_d, self.psi_q),
                    (other.id_grid, other.iq_grid, other.psi_d, other.psi_q))))

    __hash__ = None

    @property
    def shape(self):
        return self.psi_d.shape

    def contains(self, id_, iq) -> bool:
        return (self.id_grid[0] <= id_ <= self.id_grid[-1]
                and self.iq_grid[0] <= iq <= self.iq_grid[-1])

    def psi_at(self, id_: float, iq: float):
        """Scalar bilinear query, returns ``(psi_d, psi_q)``."""
        idg, iqg, pd, pq = self._lists
        i, tx = _locate(idg, id_, "id")
        j, ty = _locate(iqg, iq, "iq")
        r0d, r1d = pd[i], pd[i + 1]
        r0q, r1q = pq[i], pq[i + 1]
        sx, sy = 1.0 - tx, 1.0 - ty
        psd = sx * (sy * r0d[j] + ty * r0d[j + 1]) + tx * (sy * r1d[j] + ty * r1d[j + 1])
        psq = sx * (sy * r0q[j] + ty * r0q[j + 1]) + tx * (sy * r1q[j] + ty * r1q[j + 1])
        return psd, psq

    def psi(self, id_, iq):
        """Vectorized bilinear query over broadcastable arrays."""
        id_, iq = np.broadcast_arrays(np.asarray(id_, float), np.asarray(iq, float))
        i, tx = _locate_array(self.id_grid, id_, "id")
        j, ty = _locate_array(self.iq_grid, iq, "iq")
        out = []
        for m in (self.psi_d, self.psi_q):
            out.append((1 - tx) * ((1 - ty) * m[i, j] + ty * m[i, j + 1])
                       + tx * ((1 - ty) * m[i + 1, j] + ty * m[i + 1, j + 1]))
        return out[0], out[1]


def _locate(grid, x, axis):
    lo, hi = grid[0], grid[-1]
    if x < lo or x > hi:
        tol = BOUND_SNAP * (hi - lo)
        if lo - tol <= x < lo:
            x = lo
        elif hi < x <= hi + tol:
            x = hi
        else:
            raise OutOfRange(axis, x, lo if x < lo else hi)
    n = len(grid)
    i = bisect.bisect_right(grid, x) - 1
    if i > n - 2:
        i = n - 2
    g0 = grid[i]
    return i, (x - g0) / (grid[i + 1] - g0)


def _locate_array(grid, x, axis):
    lo, hi = grid[0], grid[-1]
    tol = BOUND_SNAP * (hi - lo)
    bad = (x < lo - tol) | (x > hi + tol)
    if np.any(bad):
        v = float(x[bad].flat[0])
        raise OutOfRange(axis, v, lo if v < lo else hi)
    x = np.clip(x, lo, hi)
    i = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, len(grid) - 2)
    return i, (x - grid[i]) / (grid[i + 1] - grid[i])


def interpolate(fmap: FluxMap, i: DqValue) -> DqValue:
    """Bilinear flux lookup at current ``i``; raises :class:`OutOfRange`."""
    return DqValue(*fmap.psi_at(i.d, i.q))


def build_from_samples(rows: Iterable[Sequence[float]],
                       source: MapSource = MapSource.EXTERNAL) -> FluxMap:
    """
    Assemble a map from ``(Id, Iq, Ψd, Ψq)`` rows in any order.

    Every Id × Iq combination must appear exactly once.
    """
    table = {}
    for row in rows:
        id_, iq, pd, pq = (float(x) for x in row)
        if not all(math.isfinite(v) for v in (id_, iq, pd, pq)):
            raise NonFiniteValue(f"non-finite sample {row!r}")
        key = (id_, iq)
        if key in table:
            raise DuplicatePoint(f"duplicate grid point Id={id_}, Iq={iq}")
        table[key] = (pd, pq)
    id_grid = sorted({k[0] for k in table})
    iq_grid = sorted({k[1] for k in table})
    psi_d = np.empty((len(id_grid), len(iq_grid)))
    psi_q = np.empty_like(psi_d)
    missing = []
    for a, d in enumerate(id_grid):
        for b, q in enumerate(iq_grid):
            try:
                psi_d[a, b], psi_q[a, b] = table[(d, q)]
            except KeyError:
                missing.append((d, q))
    if missing:
        d, q = missing[0]
        raise IncompleteGrid(
            f"{len(missing)} grid point(s) missing, first at Id={d}, Iq={q}")
    return FluxMap(id_grid, iq_grid, psi_d, psi_q, source=source)


def complete_by_symmetry(fmap: FluxMap, tol: float = 1e-12) -> FluxMap:
    """
    Mirror a map tabulated for Iq >= 0 onto the full Iq range.

    Already completed maps are returned unchanged.
    """
    if fmap.completed_by_symmetry:
        return fmap
    iq = fmap.iq_grid
    if iq[0] < 0:
        raise BadDomain("iq_grid contains negative entries")
    if iq[0] != 0:
        raise BadDomain(f"iq_grid must start at 0, starts at {iq[0]}")
    worst = float(np.max(np.abs(fmap.psi_q[:, 0])))
    if worst > tol:
        warnings.warn(f"psi_q at Iq=0 is not zero (max |psi_q| = {worst:.3g} Vs); "
                      "the completed map is not exactly odd there", stacklevel=2)
    iq_full = np.concatenate([-iq[:0:-1], iq])
    psi_d = np.concatenate([fmap.psi_d[:, :0:-1], fmap.psi_d], axis=1)
    psi_q = np.concatenate([-fmap.psi_q[:, :0:-1], fmap.psi_q], axis=1)
    return FluxMap(fmap.id_grid, iq_full, psi_d, psi_q,
                   completed_by_symmetry=True, source=fmap.source)


def ensure_completed(fmap: FluxMap, tol: float = 1e-12) -> FluxMap:
    """
    Return a map covering both Iq signs.

    Half maps (Iq >= 0) are mirrored.  Maps tabulated on an Iq grid that is
    symmetric about 0 are accepted as-is when they already have the
    even/odd parity; anything else raises BadDomain.
    """
    if fmap.completed_by_symmetry:
        return fmap
    iq = fmap.iq_grid
    if iq[0] >= 0:
        return complete_by_symmetry(fmap, tol)
    if not np.array_equal(iq, -iq[::-1]):
        raise BadDomain("iq_grid spans negative values but is not symmetric about 0")
    scale = max(1.0, float(np.max(np.abs(fmap.psi_d))), float(np.max(np.abs(fmap.psi_q))))
    if (np.max(np.abs(fmap.psi_d - fmap.psi_d[:, ::-1])) > tol * scale
            or np.max(np.abs(fmap.psi_q + fmap.psi_q[:, ::-1])) > tol * scale):
        raise BadDomain("full-range map violates psi_d even / psi_q odd symmetry in Iq")
    return FluxMap(fmap.id_grid, fmap.iq_grid, fmap.psi_d, fmap.psi_q,
                   completed_by_symmetry=True, source=fmap.source)


@dataclass(frozen=True)
class SyntheticModelParams:
    """
    Saturable dq model standing in for field-solver output.

    The inductances fall off as ``L(i) = L0 / (1 + (i / i_sat)**sat_exponent)``.
    Use ``i_sat = inf`` for the unsaturated (linear) machine.
    """
    psi_pm: float
    l_d0: float
    l_q0: float
    i_sat_d: float
    i_sat_q: float
    sat_exponent: float = 2.0

    def __post_init__(self):
        if not (self.l_q0 >= self.l_d0 > 0):
            raise ValueError("expected l_q0 >= l_d0 > 0")
        if not (self.i_sat_d > 0 and self.i_sat_q > 0):
            raise ValueError("saturation knee currents must be > 0")
        if self.sat_exponent < 1:
            raise ValueError("sat_exponent must be >= 1")


class SyntheticMachine:
    """Closed-form flux linkages of the synthetic model (any current)."""

    def __init__(self, params: SyntheticModelParams):
        self.params = params

    def psi_at(self, id_, iq):
        p = self.params
        ld = p.l_d0 / (1.0 + (abs(id_) / p.i_sat_d) ** p.sat_exponent)
        lq = p.l_q0 / (1.0 + (abs(iq) / p.i_sat_q) ** p.sat_exponent)
        return p.psi_pm + ld * id_, lq * iq

    def psi(self, id_, iq):
        p = self.params
        id_ = np.asarray(id_, float)
        iq = np.asarray(iq, float)
        ld = p.l_d0 / (1.0 + (np.abs(id_) / p.i_sat_d) ** p.sat_exponent)
        lq = p.l_q0 / (1.0 + (np.abs(iq) / p.i_sat_q) ** p.sat_exponent)
        return p.psi_pm + ld * id_, lq * iq


def synthetic_flux_map(params: SyntheticModelParams, id_range, iq_range,
                       n_points) -> FluxMap:
    """Sample the synthetic model on a uniform grid.

    ``n_points`` is an int or an ``(n_id, n_iq)`` pair.
    """
    n_id, n_iq = (n_points, n_points) if np.isscalar(n_points) else n_points
    if n_id < 2 or n_iq < 2:
        raise ValueError("need at least two points per axis")
    id_grid = np.linspace(id_range[0], id_range[1], int(n_id))
    iq_grid = np.linspace(iq_range[0], iq_range[1], int(n_iq))
    dd, qq = np.meshgrid(id_grid, iq_grid, indexing="ij")
    psi_d, psi_q = SyntheticMachine(params).psi(dd, qq)
    return FluxMap(id_grid, iq_grid, psi_d, psi_q, source=MapSource.SYNTHETIC)


@dataclass(frozen=True)
class SkewSpec:
    """Multi-slice skew: ``n_slices`` equally weighted slices over ``total_skew_el`` (rad)."""
    n_slices: int = 1
    total_skew_el: float = 0.0

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")

    def offsets(self):
        n = self.n_slices
        if n == 1:
            return [0.0]
        return [self.total_skew_el * (k / (n - 1) - 0.5) for k in range(n)]


def skew_average(source, skew: SkewSpec, base_current: CurrentPolar) -> DqValue:
    """
    Mean dq flux linkage over the skew slices.

    Slice ``k`` is fed the current angle ``beta + δk``; its flux is rotated
    back by ``-δk`` into the reference rotor frame before averaging.
    ``source`` is any object with ``psi_at(id, iq)`` (a :class:`FluxMap` or
    :class:`SyntheticMachine`).
    """
    if skew.n_slices == 1:
        i = dq_from_polar(base_current)
        return DqValue(*source.psi_at(i.d, i.q))
    sum_d = sum_q = 0.0
    for k, delta in enumerate(skew.offsets()):
        i = dq_from_polar(CurrentPolar(base_current.amplitude, base_current.beta + delta))
        try:
            pd, pq = source.psi_at(i.d, i.q)
        except OutOfRange as exc:
            raise OutOfRange(exc.axis, exc.value, exc.bound, slice_index=k) from None
        c, s = math.cos(delta), math.sin(delta)
        sum_d += c * pd + s * pq
        sum_q += -s * pd + c * pq
    n = skew.n_slices
    return DqValue(sum_d / n, sum_q / n)


FLUXMAP_HEADER = ["id_A", "iq_A", "psi_d_Vs", "psi_q_Vs"]


def read_flux_map(path) -> FluxMap:
    """Read a flux-map CSV; ``#`` lines are comments."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader, [])]
    if header != FLUXMAP_HEADER:
        raise ValueError(f"{path}: expected header {','.join(FLUXMAP_HEADER)}, "
                         f"got {','.join(header)}")
    return build_from_samples(reader)


def write_flux_map(path, fmap: FluxMap, header_lines: Sequence[str] = ()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLUXMAP_HEADER)
        for a, d in enumerate(fmap.id_grid):
            for b, q in enumerate(fmap.iq_grid):
                w.writerow([repr(float(d)), repr(float(q)),
                            repr(float(fmap.psi_d[a, b])), repr(float(fmap.psi_q[a, b]))])
