"""Max-min Hamiltonians of two-player zero-sum games over random costs.

H(x, p) = max over b of min over a of { -cost(x, a, b) - <f(a, b), p> },
with finite action sets so the max-min is exact enumeration.  The module
also certifies the structural constants (growth/Lipschitz bound beta,
orientation margin delta along a direction e), folds momentum shifts into
the cost accessor, and builds the finite-action localization of a generic
Lipschitz Hamiltonian.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class OrientationError(ValueError):
    """The dynamics is not oriented (delta <= 0); experiments refuse to run."""


@dataclass(frozen=True)
class HamiltonianConstants:
    beta: float
    delta: float
    e: np.ndarray
    f_inf: float
    lip_l: float
    l_inf: float

    @property
    def oriented(self) -> bool:
        return self.delta > 0.0

    def require_oriented(self) -> None:
        if not self.oriented:
            raise OrientationError(
                f"dynamics not oriented: min <f, e> = {self.delta} <= 0"
            )


@dataclass(frozen=True)
class GameHamiltonian:
    """Finite-action game data.

    ``base_cost(points, env) -> (N, n_a, n_b)`` returns the running cost at
    each point for every action pair (broadcastable shapes allowed).  The
    momentum shift <f, theta> is folded into a single additive table so the
    solver inner loop sees one accessor call.
    """

    actions_a: np.ndarray           # (n_a, m)
    actions_b: np.ndarray           # (n_b, m)
    f_table: np.ndarray             # (n_a, n_b, d), broadcastable over b
    base_cost: Callable[[np.ndarray, object], np.ndarray]
    lip_l: float
    l_inf: float                    # bound for the *unshifted* cost
    theta: np.ndarray | None = None
    orientation_hint: np.ndarray | None = None
    shift_table: np.ndarray | None = None   # (n_a, n_b) or broadcastable

    @property
    def dim(self) -> int:
        return self.f_table.shape[-1]

    @property
    def n_a(self) -> int:
        return self.actions_a.shape[0]

    @property
    def n_b(self) -> int:
        return self.actions_b.shape[0]

    @property
    def f_inf(self) -> float:
        return float(np.max(np.linalg.norm(self.f_table, axis=-1)))

    @property
    def theta_vec(self) -> np.ndarray:
        if self.theta is None:
            return np.zeros(self.dim)
        return self.theta

    @property
    def l_inf_shifted(self) -> float:
        """Bound on the cost including the folded momentum shift."""
        return self.l_inf + self.f_inf * float(np.linalg.norm(self.theta_vec))

    def cost(self, pts: np.ndarray, env) -> np.ndarray:
        """Running cost table (N, n_a, n_b), momentum shift included."""
        c = self.base_cost(np.atleast_2d(pts), env)
        if self.shift_table is not None:
            c = c + self.shift_table
        return c


def eval_H(gh: GameHamiltonian, x: np.ndarray, p: np.ndarray, env=None) -> float:
    """Exact max-min Hamiltonian value at a single (x, p)."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    p = np.asarray(p, dtype=np.float64)
    cost = gh.cost(x, env)[0]                      # (n_a, n_b) broadcastable
    drift = gh.f_table @ p                         # (n_a, n_b) or (n_a, 1)
    s = np.broadcast_arrays(-cost - drift, np.zeros((gh.n_a, gh.n_b)))[0]
    return float(s.min(axis=0).max())


def eval_H_nodes(gh: GameHamiltonian, cost_table: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Vectorized H over many nodes with a precomputed cost table.

    cost_table: (N, n_a, n_b) broadcastable; P: (N, d) gradients.
    """
    drift = np.einsum("abd,nd->nab", np.broadcast_to(
        gh.f_table, (gh.n_a, gh.n_b, gh.dim)), P)
    s = -cost_table - drift
    return s.min(axis=1).max(axis=1)


def shift_momentum(gh: GameHamiltonian, theta: np.ndarray) -> GameHamiltonian:
    """Fold the shift cost -> cost + <f(a,b), theta> into the accessor.

    Satisfies eval_H(shifted, x, p) == eval_H(original, x, theta + p).
    """
    theta = np.asarray(theta, dtype=np.float64)
    add = gh.f_table @ theta                       # (n_a, n_b) or (n_a, 1)
    table = add if gh.shift_table is None else gh.shift_table + add
    new_theta = gh.theta_vec + theta
    return GameHamiltonian(
        actions_a=gh.actions_a,
        actions_b=gh.actions_b,
        f_table=gh.f_table,
        base_cost=gh.base_cost,
        lip_l=gh.lip_l,
        l_inf=gh.l_inf,
        theta=new_theta,
        orientation_hint=gh.orientation_hint,
        shift_table=table,
    )


def _best_direction(f_flat: np.ndarray, d: int) -> np.ndarray:
    """Unit vector maximizing the worst-case drift projection."""
    if d == 1:
        plus = float(np.min(f_flat[:, 0]))
        minus = float(np.min(-f_flat[:, 0]))
        return np.array([1.0]) if plus >= minus else np.array([-1.0])
    # coarse angular sweep then local refinement
    angles = np.linspace(0.0, 2 * math.pi, 720, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    worst = (f_flat @ dirs.T).min(axis=0)
    k = int(np.argmax(worst))
    lo, hi = angles[k] - 0.02, angles[k] + 0.02
    fine = np.linspace(lo, hi, 400)
    dirs = np.stack([np.cos(fine), np.sin(fine)], axis=1)
    worst = (f_flat @ dirs.T).min(axis=0)
    k = int(np.argmax(worst))
    return dirs[k]


def certify_constants(
    gh: GameHamiltonian,
    e: np.ndarray | None = None,
    lip_l: float | None = None,
    l_inf: float | None = None,
) -> HamiltonianConstants:
    """Compute (beta, delta, e, ...) making (H1)-(H3) hold for eval_H.

    ``delta`` is the achieved margin min <f(a,b), e>, reported as-is; a
    nonpositive value marks the game as not oriented (callers that need
    orientation must refuse to run).
    """
    f_full = np.broadcast_to(gh.f_table, (gh.n_a, gh.n_b, gh.dim))
    f_flat = f_full.reshape(-1, gh.dim)
    if e is None:
        e = gh.orientation_hint
    if e is None:
        e = _best_direction(f_flat, gh.dim)
    e = np.asarray(e, dtype=np.float64)
    e = e / np.linalg.norm(e)
    delta = float(np.min(f_flat @ e))
    f_inf = float(np.max(np.linalg.norm(f_flat, axis=1)))
    lip = gh.lip_l if lip_l is None else lip_l
    linf = gh.l_inf_shifted if l_inf is None else l_inf
    beta = max(linf, f_inf, lip)
    return HamiltonianConstants(
        beta=beta, delta=delta, e=e, f_inf=f_inf, lip_l=lip, l_inf=linf
    )


def ball_grid(radius: float, n_per_axis: int, dim: int) -> np.ndarray:
    """Uniform grid on [-radius, radius]^dim restricted to the closed ball."""
    if n_per_axis < 2:
        raise ValueError("need at least 2 grid points per axis")
    axis = np.linspace(-radius, radius, n_per_axis)
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    keep = np.einsum("ij,ij->i", pts, pts) <= radius**2 * (1 + 1e-12)
    return pts[keep]


def localize(
    G: Callable[[np.ndarray, np.ndarray], np.ndarray],
    beta: float,
    R: float,
    v: np.ndarray,
    pi: np.ndarray,
    n_a: int,
    n_b: int,
    g_inf: float | None = None,
) -> GameHamiltonian:
    """Finite-action max-min representation of H(x,p) = G(x, pi p) + <p, v>.

    ``G(points, q) -> (N,)`` must satisfy (H1)-(H3) with the supplied beta;
    ``pi`` is a linear map with pi(v) = 0.  The returned game uses
    cost(x, a, b) = -G(x, b) + beta <a, b> on ball grids A = B1, B = B_R and
    drift f(a) = pi^T(-beta a) - v.  The minus sign on v (and orientation
    direction e = -v/|v|) is what makes the enumerated max-min reproduce
    G(x, pi p) + <p, v> on |p| <= R as the grids refine, with margin
    delta = |v| exactly.
    """
    v = np.asarray(v, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    d = v.shape[0]
    if np.all(v == 0.0):
        raise ValueError("v must be nonzero")
    if np.any(pi @ v != 0.0):
        raise ValueError(f"pi(v) must vanish, got {pi @ v} (orientation certificate would fail)")
    A = ball_grid(1.0, n_a, d)
    B = ball_grid(R, n_b, d)
    f = (-beta * A) @ pi - v            # row a: pi^T(-beta a) - v
    f_table = f[:, None, :]             # independent of b
    inner = beta * (A @ B.T)            # (n_a, n_b)

    def cost(pts: np.ndarray, env) -> np.ndarray:
        pts = np.atleast_2d(pts)
        gb = np.stack([np.asarray(G(pts, b), dtype=np.float64) for b in B], axis=1)
        return -gb[:, None, :] + inner[None, :, :]

    if g_inf is None:
        g_inf = beta * (1.0 + R)        # from (H1)
    e = -v / np.linalg.norm(v)
    return GameHamiltonian(
        actions_a=A,
        actions_b=B,
        f_table=f_table,
        base_cost=cost,
        lip_l=beta,
        l_inf=g_inf + beta * R,
        orientation_hint=e,
    )


def verify_localization(
    gh: GameHamiltonian,
    G: Callable[[np.ndarray, np.ndarray], np.ndarray],
    R: float,
    v: np.ndarray,
    pi: np.ndarray,
    n_probes: int = 40,
    seed: int = 0,
    x_radius: float = 1.0,
) -> dict:
    """Sup over random probes of |eval_H - (G(x, pi p) + <p, v>)|.

    The probe set always includes a momentum with |p| = R exactly (the
    representation holds on the closed ball).
    """
    rng = np.random.default_rng(seed)
    v = np.asarray(v, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    d = v.shape[0]
    xs = rng.uniform(-x_radius, x_radius, size=(n_probes, d))
    ps = rng.normal(size=(n_probes, d))
    ps /= np.linalg.norm(ps, axis=1, keepdims=True)
    ps *= R * rng.uniform(0, 1, size=(n_probes, 1)) ** (1.0 / d)
    ps[0] = ps[0] / max(np.linalg.norm(ps[0]), 1e-300) * R   # boundary probe
    errs = []
    for x, p in zip(xs, ps):
        target = float(G(x.reshape(1, -1), pi @ p)[0]) + float(p @ v)
        got = eval_H(gh, x, p, env=None)
        errs.append(abs(got - target))
    errs = np.asarray(errs)
    return {
        "max_error": float(errs.max()),
        "mean_error": float(errs.mean()),
        "n_probes": int(n_probes),
        "n_a": int(gh.n_a),
        "n_b": int(gh.n_b),
    }
