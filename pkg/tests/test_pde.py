import numpy as np
import pytest

from hjhomog.env import ConstantEnvironment, DomainError, EnvSpec, sample_environment
from hjhomog.game import GameHamiltonian
from hjhomog.families import bind_env_constants, saddle_game, transport
from hjhomog.pde import (CFLError, Grid, SolveConfig, check_comparison,
                         check_lipschitz, check_scaling, linear_datum, solve,
                         solve_effective, solve_lf, solve_sl, zero_datum)


def field_spec(seed=0, lo=-8.0, hi=8.0):
    return EnvSpec(dimension=1, rho=1.0, bump_radius=0.5, amp_lo=0.0,
                   amp_hi=1.0, channels=1, box_lo=(lo,), box_hi=(hi,),
                   seed=seed)


def singleton_game(cost_fn, speed=1.0):
    f = np.zeros((1, 1, 1))
    f[0, 0, 0] = speed
    return GameHamiltonian(actions_a=np.zeros((1, 1)),
                           actions_b=np.zeros((1, 1)), f_table=f,
                           base_cost=cost_fn, lip_l=1.0, l_inf=1.0,
                           orientation_hint=np.array([1.0]))


def cfg(scheme, dt, dx, T, lo, hi, **kw):
    return SolveConfig(scheme=scheme, dt=dt, dx=dx, T=T, box_lo=(lo,),
                       box_hi=(hi,), **kw)


# ---------------------------------------------------------------------------
# exact solutions


@pytest.mark.parametrize("scheme", ["semi-lagrangian", "lax-friedrichs"])
def test_constant_cost_is_exact(scheme):
    env = ConstantEnvironment(0.3)
    gh = bind_env_constants(transport(1.0), env)
    res = solve(gh, env, cfg(scheme, 0.1, 0.1, 2.0, -5.0, 9.0))
    av = res.final.active_values()
    assert np.max(np.abs(av - 0.6)) < 1e-12


@pytest.mark.parametrize("scheme", ["semi-lagrangian", "lax-friedrichs"])
def test_linear_datum_invariant(scheme):
    # u(t, x) = theta x + t (c + f theta) is preserved to rounding by both
    # schemes: interpolation and central differences are exact on affine data
    c0, f0, theta = 0.45, 1.0, 0.7
    env = ConstantEnvironment(c0)
    gh = bind_env_constants(transport(f0), env)
    res = solve(gh, env, cfg(scheme, 0.1, 0.1, 1.0, -4.0, 8.0),
                linear_datum([theta]))
    fld = res.final
    lo, hi = fld.active_box()
    xs = np.linspace(lo[0], hi[0], 30)
    want = theta * xs + 1.0 * (c0 + f0 * theta)
    got = np.array([fld.value_at([x]) for x in xs])
    assert np.max(np.abs(got - want)) < 1e-12


def test_sl_matches_brute_force_dp():
    # A = {-1, +1}, f(a) = a, cost = |x|: with dt = dx the feet are exact
    # lattice nodes, so the scheme must reproduce the raw DP recursion
    def cost(pts, env):
        ax = np.abs(np.atleast_2d(pts)[:, 0])
        return np.broadcast_to(ax[:, None, None], (ax.shape[0], 2, 1))

    f = np.zeros((2, 1, 1))
    f[0, 0, 0], f[1, 0, 0] = -1.0, 1.0
    gh = GameHamiltonian(actions_a=np.array([[-1.0], [1.0]]),
                         actions_b=np.zeros((1, 1)), f_table=f,
                         base_cost=cost, lip_l=1.0, l_inf=3.0)
    dt = dx = 0.25
    res = solve_sl(gh, None, cfg("semi-lagrangian", dt, dx, 1.0, -3.0, 3.0))

    xs = np.arange(-3.0, 3.0 + dx / 2, dx)
    v = np.zeros_like(xs)
    lo, hi = 0, len(xs)
    for _ in range(4):
        lo, hi = lo + 1, hi - 1
        up = dt * np.abs(xs[lo:hi]) + v[lo + 1:hi + 1]
        dn = dt * np.abs(xs[lo:hi]) + v[lo - 1:hi - 1]
        vn = np.full_like(v, np.nan)
        vn[lo:hi] = np.maximum(up, dn)
        v = vn
    assert res.final.active == ((lo, hi),)
    assert np.max(np.abs(res.final.active_values() - v[lo:hi])) < 1e-12


def test_sin_cost_consistency():
    # transport at speed 1 over cost sin(x): u(t, x) = cos(x) - cos(x + t);
    # first-order scheme, so error halves (roughly) with the mesh
    def cost(pts, env):
        return np.sin(np.atleast_2d(pts)[:, 0])[:, None, None]

    gh = singleton_game(cost)
    errs = []
    for h in (0.04, 0.02):
        res = solve_sl(gh, None, cfg("semi-lagrangian", h, h, 1.0, -3.0, 3.0))
        fld = res.final
        xs = np.linspace(-1.0, 1.0, 41)
        want = np.cos(xs) - np.cos(xs + 1.0)
        got = np.array([fld.value_at([x]) for x in xs])
        errs.append(np.max(np.abs(got - want)))
    assert errs[1] < 0.05
    assert errs[1] < 0.8 * errs[0]


# ---------------------------------------------------------------------------
# structural properties of the schemes


def test_cross_solver_agreement():
    env = sample_environment(field_spec(seed=6))
    gh = bind_env_constants(transport(1.0), env)
    h = 0.05
    r1 = solve_sl(gh, env, cfg("semi-lagrangian", h, h, 1.0, -5.0, 7.0))
    r2 = solve_lf(gh, env, cfg("lax-friedrichs", h, h, 1.0, -5.0, 7.0))
    sl = tuple(slice(max(a[0], b[0]), min(a[1], b[1]))
               for a, b in zip(r1.final.active, r2.final.active))
    diff = np.max(np.abs(r1.final.values[sl] - r2.final.values[sl]))
    assert diff <= 5 * np.sqrt(h)


@pytest.mark.parametrize("scheme", ["semi-lagrangian", "lax-friedrichs"])
def test_monotone_in_datum(scheme):
    env = sample_environment(field_spec(seed=2))
    gh = bind_env_constants(saddle_game(1.0, 0.25), env)

    def bump(pts):
        x = np.atleast_2d(pts)[:, 0]
        return np.maximum(0.0, 1.0 - x**2)

    c = cfg(scheme, 0.1, 0.1, 1.0, -5.0, 7.0)
    r0 = solve(gh, env, c, zero_datum)
    r1 = solve(gh, env, c, bump)
    sl = r0.final.active_slices()
    assert np.all(r1.final.values[sl] >= r0.final.values[sl] - 1e-12)


@pytest.mark.parametrize("scheme", ["semi-lagrangian", "lax-friedrichs"])
def test_constant_shift_commutes(scheme):
    env = sample_environment(field_spec(seed=5))
    gh = bind_env_constants(saddle_game(1.0, 0.25), env)
    c = cfg(scheme, 0.1, 0.1, 1.0, -5.0, 7.0)
    r0 = solve(gh, env, c, zero_datum)
    r5 = solve(gh, env, c, lambda pts: np.full(np.atleast_2d(pts).shape[0], 5.0))
    sl = r0.final.active_slices()
    assert np.max(np.abs(r5.final.values[sl] - r0.final.values[sl] - 5.0)) < 1e-12


def test_comparison_preserved():
    env = sample_environment(field_spec(seed=4))
    gh = bind_env_constants(transport(1.0), env)
    c = cfg("semi-lagrangian", 0.1, 0.1, 1.0, -5.0, 7.0,
            record_times=(0.5, 1.0))
    rep = check_comparison(gh, env, c,
                           g_upper=lambda pts: np.ones(np.atleast_2d(pts).shape[0]),
                           g_lower=zero_datum)
    assert rep["ok"]
    assert rep["initial_gap"] == pytest.approx(1.0)


def test_scaling_identity():
    env = sample_environment(field_spec(seed=3, lo=-8.0, hi=16.0))
    gh = bind_env_constants(transport(1.0), env)
    c = cfg("semi-lagrangian", 0.25, 0.25, 2.0, -2.0, 8.0)
    assert check_scaling(gh, env, [0.0], 1.0, c)["max_error"] == 0.0
    assert check_scaling(gh, env, [0.0], 0.5, c)["max_error"] <= 1e-12
    gh2 = bind_env_constants(saddle_game(1.0, 0.25), env)
    assert check_scaling(gh2, env, [0.0], 0.125, c)["max_error"] <= 1e-9


def test_lipschitz_bounds_hold():
    env = sample_environment(field_spec(seed=7))
    gh = bind_env_constants(transport(1.0), env)
    c = cfg("semi-lagrangian", 0.1, 0.1, 1.0, -5.0, 7.0,
            record_times=(0.5, 1.0))
    res = solve(gh, env, c, zero_datum)
    beta = max(gh.l_inf, gh.lip_l, float(np.abs(gh.f_table).max()))
    rep = check_lipschitz(list(res.snapshots.values()),
                          beta1=beta, beta3=beta * (1 + beta), lip_g=0.0)
    assert rep["space_ok"] and rep["time_ok"]


def test_effective_solver_constant_hamiltonian():
    c = cfg("lax-friedrichs", 0.05, 0.05, 1.0, -4.0, 6.0)
    res = solve_effective(lambda P: np.full(np.atleast_2d(P).shape[0], -0.4),
                          speed=1.0, cfg=c, g=zero_datum)
    av = res.final.active_values()
    assert np.max(np.abs(av - 0.4)) < 1e-12


# ---------------------------------------------------------------------------
# refusals and validation


def test_box_exhaustion_raises_with_margin_hint():
    env = ConstantEnvironment(0.0)
    gh = bind_env_constants(transport(1.0), env)
    with pytest.raises(DomainError, match="add margin"):
        solve_sl(gh, env, cfg("semi-lagrangian", 0.1, 0.1, 5.0, 0.0, 1.0))
    with pytest.raises(DomainError, match="add margin"):
        solve_lf(gh, env, cfg("lax-friedrichs", 0.1, 0.1, 5.0, 0.0, 1.0))


def test_cfl_refusal_without_substepping():
    env = ConstantEnvironment(0.0)
    gh = bind_env_constants(transport(1.0), env)
    with pytest.raises(CFLError):
        solve_lf(gh, env, cfg("lax-friedrichs", 0.2, 0.1, 1.0, -4.0, 6.0,
                              lf_substep=False))


def test_time_grid_validation():
    env = ConstantEnvironment(0.0)
    gh = bind_env_constants(transport(1.0), env)
    with pytest.raises(ValueError, match="integer multiple"):
        solve_sl(gh, env, cfg("semi-lagrangian", 0.3, 0.1, 1.0, -4.0, 6.0))
    with pytest.raises(ValueError, match="record time"):
        solve_sl(gh, env, cfg("semi-lagrangian", 0.1, 0.1, 1.0, -4.0, 6.0,
                              record_times=(0.15,)))
    with pytest.raises(ValueError):
        cfg("semi-lagrangian", -0.1, 0.1, 1.0, 0.0, 1.0).validate()
    with pytest.raises(ValueError):
        cfg("upwind", 0.1, 0.1, 1.0, 0.0, 1.0).validate()


def test_value_at_refuses_outside_active_box():
    env = ConstantEnvironment(0.0)
    gh = bind_env_constants(transport(1.0), env)
    res = solve_sl(gh, env, cfg("semi-lagrangian", 0.1, 0.1, 1.0, -2.0, 2.0))
    lo, hi = res.final.active_box()
    assert res.final.value_at([lo[0]]) == pytest.approx(0.0)
    with pytest.raises(DomainError, match="active box"):
        res.final.value_at([hi[0] + 0.5])


def test_snapshot_lookup():
    env = ConstantEnvironment(0.1)
    gh = bind_env_constants(transport(1.0), env)
    res = solve_sl(gh, env, cfg("semi-lagrangian", 0.1, 0.1, 1.0, -2.0, 3.0,
                                record_times=(0.0, 0.5)))
    assert res.at_time(0.5).t == pytest.approx(0.5)
    with pytest.raises(KeyError):
        res.at_time(0.7)


def test_grid_from_box():
    g = Grid.from_box([-1.0], [1.0], 0.5)
    assert g.shape == (5,)
    assert np.allclose(g.axis(0), [-1.0, -0.5, 0.0, 0.5, 1.0])
    with pytest.raises(ValueError, match="degenerate"):
        Grid.from_box([0.0], [0.1], 1.0)
