"""Random running-cost environments with a certified finite dependence range.

A field is a sum of fixed C^1 bumps sitting on a lattice of spacing equal to
the bump radius r, each scaled by an i.i.d. uniform amplitude drawn lazily
from a counter-based hash of (seed, cell, channel).  A uniform random offset
(one per realization) makes the law translation invariant, not merely
lattice-periodic.  A point is covered by exactly 2 bumps per axis, and a
bump reaches at most r from its center, so values over regions separated by
more than 2r <= rho consume disjoint cell keys: this is the
finite-range-dependence certificate for the declared range rho.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .rng import uniform01

#: max |d/ds (1 - s^2)^2| on [0, 1], attained at s = 1/sqrt(3)
BUMP_LIP = 8.0 / (3.0 * math.sqrt(3.0))

#: integral of (1 - s^2)^2 over [-1, 1]
BUMP_MASS_1D = 16.0 / 15.0


class DomainError(ValueError):
    """Probe outside the materialized box (never silently extrapolated)."""


@dataclass(frozen=True)
class EnvSpec:
    """Parameters of the random running-cost field."""

    dimension: int
    rho: float                      # certified dependence range
    bump_radius: float              # r in (0, rho/2]; also the lattice spacing
    amp_lo: float
    amp_hi: float
    channels: int                   # |A|*|B| or 1 (shared across actions)
    box_lo: tuple[float, ...]
    box_hi: tuple[float, ...]
    seed: int

    def validate(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not 0 < self.bump_radius <= self.rho / 2:
            raise ValueError(
                f"bump_radius must lie in (0, rho/2]: got r={self.bump_radius}, "
                f"rho={self.rho} (r > rho/2 breaks the dependence-range certificate)"
            )
        if self.amp_lo > self.amp_hi:
            raise ValueError(f"amp_lo {self.amp_lo} > amp_hi {self.amp_hi}")
        if self.amp_lo < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if len(self.box_lo) != self.dimension or len(self.box_hi) != self.dimension:
            raise ValueError("box bounds must match dimension")
        if any(lo >= hi for lo, hi in zip(self.box_lo, self.box_hi)):
            raise ValueError(f"box is empty: lo={self.box_lo}, hi={self.box_hi}")

    @property
    def kernel_overlap(self) -> int:
        """Max number of bumps covering a single point (2 per axis)."""
        return 2 ** self.dimension


class Environment:
    """A fixed realization of the cost field; immutable after construction.

    Values are a pure function of the spec (seed included): the amplitude of
    the bump in lattice cell ``z`` for channel ``c`` is
    ``uniform01(seed, z..., c)`` rescaled to [amp_lo, amp_hi], generated on
    demand.
    """

    def __init__(self, spec: EnvSpec):
        spec.validate()
        self.spec = spec
        d = spec.dimension
        # per-realization stationarity offset, uniform over one lattice cell;
        # the leading tag word keeps this stream disjoint from cell amplitudes
        off = np.array([uniform01(spec.seed, 1, ax) for ax in range(d)])
        self.offset = off * spec.bump_radius

    # -- certified constants ------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def rho(self) -> float:
        return self.spec.rho

    @property
    def sup_bound(self) -> float:
        return self.spec.amp_hi * self.spec.kernel_overlap

    @property
    def lip_bound(self) -> float:
        return self.spec.kernel_overlap * self.spec.amp_hi * BUMP_LIP / self.spec.bump_radius

    @property
    def mean_value(self) -> float:
        """Exact E[cost(x)] under the uniform offset (any x, any channel).

        With lattice spacing equal to the bump radius the (r/spacing)^d
        factor is 1, leaving mean amplitude times the bump mass.
        """
        s = self.spec
        mass = BUMP_MASS_1D if s.dimension == 1 else _bump_mass_2d()
        return 0.5 * (s.amp_lo + s.amp_hi) * mass

    # -- evaluation ---------------------------------------------------------

    def check_inside(self, pts: np.ndarray) -> None:
        s = self.spec
        r = s.bump_radius
        lo = np.asarray(s.box_lo) - r
        hi = np.asarray(s.box_hi) + r
        if np.any(pts < lo) or np.any(pts > hi):
            bad = pts[np.any((pts < lo) | (pts > hi), axis=-1)][:1]
            raise DomainError(
                f"probe {bad} outside environment box [{s.box_lo}, {s.box_hi}] "
                f"(inflated by r={r})"
            )

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Field values at points ``pts`` (N, d) for all channels -> (N, C)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        self.check_inside(pts)
        return self._raw_values(pts)

    def _raw_values(self, pts: np.ndarray) -> np.ndarray:
        s = self.spec
        n, d = pts.shape
        out = np.zeros((n, s.channels))
        q = (pts - self.offset) / s.bump_radius
        base = np.floor(q).astype(np.int64)
        chans = np.arange(s.channels, dtype=np.int64)
        for corner in itertools.product((0, 1), repeat=d):
            z = base + np.array(corner, dtype=np.int64)
            centers = z * s.bump_radius + self.offset
            s2 = ((pts - centers) ** 2).sum(axis=1) / s.bump_radius**2
            w = np.where(s2 < 1.0, (1.0 - np.minimum(s2, 1.0)) ** 2, 0.0)
            live = w > 0.0
            if not np.any(live):
                continue
            amp = self._cell_amplitudes(z[live], chans)
            out[live] += w[live, None] * amp
        return out

    def _cell_amplitudes(self, z: np.ndarray, chans: np.ndarray) -> np.ndarray:
        s = self.spec
        parts = [z[:, ax, None] for ax in range(z.shape[1])]
        u = uniform01(s.seed, 0, *parts, chans[None, :])
        return s.amp_lo + (s.amp_hi - s.amp_lo) * u

    def cells_touched(self, pts: np.ndarray) -> set[tuple[int, ...]]:
        """Lattice cells whose amplitude keys the given probes consume.

        Instrumentation for the dependence-range certificate: probe sets at
        Hausdorff distance > rho must return disjoint cell sets.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        s = self.spec
        q = (pts - self.offset) / s.bump_radius
        base = np.floor(q).astype(np.int64)
        touched: set[tuple[int, ...]] = set()
        for corner in itertools.product((0, 1), repeat=s.dimension):
            z = base + np.array(corner, dtype=np.int64)
            centers = z * s.bump_radius + self.offset
            s2 = ((pts - centers) ** 2).sum(axis=1) / s.bump_radius**2
            for row in z[s2 < 1.0]:
                touched.add(tuple(int(v) for v in row))
        return touched


class ShiftedEnvironment:
    """View of a base environment translated by ``y`` (the shift operator)."""

    def __init__(self, base, y: np.ndarray):
        self.base = base
        self.y = np.asarray(y, dtype=np.float64)
        self.spec = base.spec

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def rho(self):
        return self.base.rho

    @property
    def sup_bound(self):
        return self.base.sup_bound

    @property
    def lip_bound(self):
        return self.base.lip_bound

    def values(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return self.base.values(pts + self.y)


class StripPatchedEnvironment:
    """Base field outside a slab, shifted field inside it.

    The slab is { x : <x, e> in [lo, hi] }; inside it values are read at
    ``x - shift``.  The patched field is discontinuous at the slab faces,
    which the value-function machinery tolerates (costs only need to be
    measurable and bounded).
    """

    def __init__(self, base, lo: float, hi: float, e: np.ndarray, shift: np.ndarray):
        if lo >= hi:
            raise ValueError(f"degenerate strip: lo={lo} >= hi={hi}")
        self.base = base
        self.lo = float(lo)
        self.hi = float(hi)
        self.e = np.asarray(e, dtype=np.float64)
        self.e = self.e / np.linalg.norm(self.e)
        self.shift = np.asarray(shift, dtype=np.float64)
        self.spec = base.spec

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def rho(self):
        return self.base.rho

    @property
    def sup_bound(self):
        return self.base.sup_bound

    @property
    def lip_bound(self):
        return self.base.lip_bound

    def values(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        proj = pts @ self.e
        inside = (proj >= self.lo) & (proj <= self.hi)
        out = self.base.values(pts)
        if np.any(inside):
            out[inside] = self.base.values(pts[inside] - self.shift)
        return out


class ConstantEnvironment:
    """Degenerate environment with a constant cost; handy for exact oracles."""

    def __init__(self, value: float, channels: int = 1, dimension: int = 1):
        self.value = float(value)
        self.channels = channels
        self._dimension = dimension

    @property
    def dimension(self):
        return self._dimension

    @property
    def rho(self):
        return 1.0

    @property
    def sup_bound(self):
        return abs(self.value)

    @property
    def lip_bound(self):
        return 0.0

    def values(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return np.full((pts.shape[0], self.channels), self.value)


def sample_environment(spec: EnvSpec) -> Environment:
    """Materialize (lazily) the field realization determined by ``spec``."""
    return Environment(spec)


def eval_cost(env, x: np.ndarray, a: int, b: int, n_b: int | None = None) -> float:
    """Cost at point ``x`` for action pair (a, b).

    ``n_b`` is required when the environment carries one channel per action
    pair; channel index is then ``a * n_b + b``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    vals = env.values(x)
    nchan = vals.shape[1]
    if nchan == 1:
        ch = 0
    else:
        if n_b is None:
            raise ValueError("n_b required for per-action-pair channels")
        ch = a * n_b + b
    return float(vals[0, ch])


def shift_view(env, y: np.ndarray) -> ShiftedEnvironment:
    """The translated view: values(view, x) == values(env, x + y)."""
    return ShiftedEnvironment(env, y)


def replace_on_strip(env, lo: float, hi: float, e: np.ndarray, shift: np.ndarray) -> StripPatchedEnvironment:
    """Replace the field on a slab orthogonal to ``e`` by its shifted copy."""
    return StripPatchedEnvironment(env, lo, hi, e, shift)


def with_seed(spec: EnvSpec, seed: int) -> EnvSpec:
    return replace(spec, seed=seed)


def _bump_mass_2d() -> float:
    # integral of (1 - |s|^2)^2 over the unit disc: 2*pi * int_0^1 (1-u^2)^2 u du
    return math.pi / 3.0
