"""Monte-Carlo homogenization experiments.

Estimates U(t) = E[u_theta(t, 0, .)] over independent field realizations,
extracts the effective Hamiltonian with an honest bias band from the
almost-subadditive structure, and runs the empirical checks: concentration
tails, strip perturbation, subadditivity defects, and the epsilon-rate of
convergence to the homogenized limit.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import families
from .env import DomainError, replace_on_strip, sample_environment, with_seed
from .game import GameHamiltonian, certify_constants, shift_momentum
from .pde import SolveConfig, solve_sl, solve_effective, zero_datum
from .rng import derive_seed

#: sum_{k>=1} 2^{-k/2} sqrt(k+1); converts the per-pair defect constant into
#: the bias-band constant of the doubling argument
A_OVER_KHAT = float(sum(2.0 ** (-k / 2.0) * math.sqrt(k + 1.0)
                        for k in range(1, 200)))


@dataclass
class UTable:
    theta: np.ndarray
    times: list[float]
    samples: np.ndarray            # (n_times, M)
    base_seed: int
    beta: float                    # certified beta of the unshifted game

    @property
    def M(self) -> int:
        return self.samples.shape[1]

    def means(self) -> np.ndarray:
        # fsum in sample-index order: independent of worker scheduling
        return np.array([math.fsum(row) / len(row) for row in self.samples])

    def variances(self) -> np.ndarray:
        mu = self.means()
        return np.array([
            math.fsum((x - m) ** 2 for x in row) / max(len(row) - 1, 1)
            for row, m in zip(self.samples, mu)
        ])

    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variances() / self.M)

    def to_dict(self) -> dict:
        return {
            "theta": list(np.atleast_1d(self.theta)),
            "times": list(self.times),
            "M": self.M,
            "base_seed": self.base_seed,
            "beta": self.beta,
            "means": list(self.means()),
            "variances": list(self.variances()),
            "samples": [list(row) for row in self.samples],
        }


@dataclass
class EffectiveEstimate:
    theta: np.ndarray
    H_hat: float
    ci_halfwidth: float
    bias_band: float
    mc_stderr: float
    times: list[float]
    ratio_sequence: list[float]          # -U(t)/t along the schedule
    rate_slope: float | None
    log_correction: bool
    K_hat_implied: float
    defects: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theta": list(np.atleast_1d(self.theta)),
            "H_hat": self.H_hat,
            "ci_halfwidth": self.ci_halfwidth,
            "bias_band": self.bias_band,
            "mc_stderr": self.mc_stderr,
            "times": list(self.times),
            "ratio_sequence": self.ratio_sequence,
            "rate_slope": self.rate_slope,
            "log_correction": self.log_correction,
            "K_hat_implied": self.K_hat_implied,
            "defects": self.defects,
        }


# ---------------------------------------------------------------------------
# sampling


def solve_box_for(gh: GameHamiltonian, t_max: float, dx: float,
                  report_radius: float = 0.0, margin: float | None = None):
    """Box whose domain of dependence covers B(report_radius) up to t_max."""
    d = gh.dim
    f_full = np.broadcast_to(gh.f_table, (gh.n_a, gh.n_b, d)).reshape(-1, d)
    lo, hi = [], []
    m = 4 * dx if margin is None else margin
    for i in range(d):
        fmax = max(0.0, float(f_full[:, i].max()))
        fmin = min(0.0, float(f_full[:, i].min()))
        lo.append(-report_radius + t_max * fmin - m)
        hi.append(report_radius + t_max * fmax + m)
    return tuple(lo), tuple(hi)


def _one_sample(gh_shifted: GameHamiltonian, env, times, dx: float, dt: float,
                box) -> np.ndarray:
    cfg = SolveConfig(
        scheme="semi-lagrangian", dt=dt, dx=dx, T=max(times),
        box_lo=box[0], box_hi=box[1], record_times=tuple(times),
    )
    res = solve_sl(gh_shifted, env, cfg, zero_datum)
    origin = np.zeros(gh_shifted.dim)
    return np.array([res.at_time(t).value_at(origin) for t in times])


def _pool_worker(args) -> list:
    (family_name, family_params, spec, theta, times, dx, dt, box, seeds) = args
    gh = families.build(family_name, family_params, spec.dimension)
    out = []
    for seed in seeds:
        env = sample_environment(with_seed(spec, seed))
        gh_b = families.bind_env_constants(gh, env)
        gh_th = shift_momentum(gh_b, theta)
        out.append(_one_sample(gh_th, env, times, dx, dt, box))
    return out


def estimate_U(gh: GameHamiltonian, env_spec, theta, times, M: int,
               base_seed: int, dx: float, dt: float,
               workers: int = 1, family_desc: tuple[str, dict] | None = None,
               box=None) -> UTable:
    """Monte-Carlo table of u_theta(t, 0, .) over M independent realizations.

    Sample i uses the derived seed mix(base_seed, i); aggregation is done in
    sample-index order so results do not depend on worker scheduling.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    times = sorted(float(t) for t in times)
    probe_env = sample_environment(with_seed(env_spec, derive_seed(base_seed, 0)))
    gh_b = families.bind_env_constants(gh, probe_env) if np.isnan(gh.lip_l) else gh
    consts = certify_constants(gh_b)
    consts.require_oriented()
    if box is None:
        box = solve_box_for(gh_b, max(times), dx)
    _check_env_covers(env_spec, box, probe_env.spec.bump_radius)

    seeds = [derive_seed(base_seed, i) for i in range(M)]
    rows: list[np.ndarray] = [None] * M  # type: ignore[list-item]
    if workers > 1 and family_desc is not None:
        chunks = np.array_split(np.arange(M), workers * 4)
        tasks = [
            (family_desc[0], family_desc[1], env_spec, theta, times, dx, dt, box,
             [seeds[i] for i in chunk])
            for chunk in chunks if len(chunk)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk, res in zip([c for c in chunks if len(c)],
                                  pool.map(_pool_worker, tasks)):
                for i, val in zip(chunk, res):
                    rows[i] = val
    else:
        for i, seed in enumerate(seeds):
            env = sample_environment(with_seed(env_spec, seed))
            gh_i = families.bind_env_constants(gh, env) if np.isnan(gh.lip_l) else gh
            gh_th = shift_momentum(gh_i, theta)
            rows[i] = _one_sample(gh_th, env, times, dx, dt, box)

    samples = np.stack(rows, axis=1)               # (n_times, M)
    bound = consts.beta * (1.0 + np.linalg.norm(theta))
    for k, t in enumerate(times):
        bad = np.abs(samples[k]) > bound * t + 1e-9
        if np.any(bad):
            raise AssertionError(
                f"a-priori bound violated at t={t}: |u|={np.abs(samples[k][bad]).max()} "
                f"> beta(1+|theta|)t={bound * t}"
            )
    return UTable(theta=theta, times=times, samples=samples,
                  base_seed=base_seed, beta=consts.beta)


def _check_env_covers(spec, box, r) -> None:
    lo = np.asarray(spec.box_lo)
    hi = np.asarray(spec.box_hi)
    blo = np.asarray(box[0])
    bhi = np.asarray(box[1])
    if np.any(blo < lo - 1e-9) or np.any(bhi > hi + 1e-9):
        raise DomainError(
            f"environment box [{spec.box_lo}, {spec.box_hi}] does not cover the "
            f"required solve box [{tuple(blo)}, {tuple(bhi)}]; enlarge it"
        )


# ---------------------------------------------------------------------------
# concentration


def azuma_bound(increments, M: float) -> float:
    """Two-sided martingale tail bound 2 exp(-M^2 / (2 sum c_m^2))."""
    c = np.asarray(increments, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("bounded-difference constants must be nonnegative")
    s = float(np.sum(c**2))
    if s == 0.0:
        return 2.0 if M <= 0 else 0.0
    return 2.0 * math.exp(-(M**2) / (2.0 * s))


def check_concentration(table: UTable, t: float, M_grid) -> dict:
    """Empirical tail frequencies P(|u - mean| >= M sqrt(t)) over an M-grid.

    Asserts qualitative sub-Gaussian shape (monotone tails, concave
    log-tails in M) rather than a specific constant, which the theory leaves
    existential.  The fitted c comes from regressing log-frequency on M^2.
    """
    k = table.times.index(t)
    u = table.samples[k]
    mu = table.means()[k]
    dev = np.abs(u - mu)
    M_grid = sorted(float(m) for m in M_grid)
    freqs = [float(np.mean(dev >= m * math.sqrt(t))) for m in M_grid]
    n = len(u)
    under_powered = n * freqs[-1] < 10 if freqs else True

    pos = [(m, f) for m, f in zip(M_grid, freqs) if f > 0]
    c_hat = None
    if len(pos) >= 2:
        xs = np.array([m**2 for m, _ in pos])
        ys = np.log([f for _, f in pos])
        slope = stats.linregress(xs, ys).slope
        c_hat = -float(slope)

    monotone = all(f1 >= f2 - 1e-12 for f1, f2 in zip(freqs, freqs[1:]))
    logs = [math.log(f) for f in freqs if f > 0]
    concave = True
    ms = [m for m, f in zip(M_grid, freqs) if f > 0]
    fs = [f for f in freqs if f > 0]
    for i in range(1, len(logs) - 1):
        h1, h2 = ms[i] - ms[i - 1], ms[i + 1] - ms[i]
        second = (logs[i + 1] - logs[i]) / h2 - (logs[i] - logs[i - 1]) / h1
        # binomial noise of the three log-frequencies, propagated
        sig = math.sqrt(sum((1.0 - f) / (f * n) for f in fs[i - 1:i + 2]))
        slack = 3.0 * sig * (1.0 / h1 + 1.0 / h2)
        if second > slack:
            concave = False
    return {
        "t": t,
        "M_grid": M_grid,
        "tail_freqs": freqs,
        "c_hat": c_hat,
        "monotone": monotone,
        "log_tail_concave": concave,
        "under_powered": bool(under_powered),
        "n_samples": n,
    }


def additive_surrogate_tails(t: int, n_samples: int, M_grid, seed: int = 0) -> dict:
    """Direct simulation of the i.i.d.-increment surrogate (sums of uniforms)."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=(n_samples, int(t))).sum(axis=1)
    dev = np.abs(u - u.mean())
    M_grid = sorted(float(m) for m in M_grid)
    freqs = [float(np.mean(dev >= m * math.sqrt(t))) for m in M_grid]
    pos = [(m, f) for m, f in zip(M_grid, freqs) if f > 0]
    xs = np.array([m**2 for m, _ in pos])
    ys = np.log([f for _, f in pos])
    reg = stats.linregress(xs, ys)
    return {
        "t": t,
        "M_grid": M_grid,
        "tail_freqs": freqs,
        "slope": float(reg.slope),
        "r2": float(reg.rvalue**2),
        "c_hat": -float(reg.slope),
    }


# ---------------------------------------------------------------------------
# strip perturbation


def strip_experiment(gh: GameHamiltonian, env, lo: float, hi: float, shift,
                     theta, t: float, dx: float, dt: float, box,
                     e=None) -> dict:
    """Observed vs analytic bound for a strip-localized cost perturbation.

    bound = (hi - lo) / delta * sup|l - l_hat|, the crossing-time estimate
    for oriented dynamics; sup is estimated by dense probing in the strip.
    """
    gh_b = families.bind_env_constants(gh, env) if np.isnan(gh.lip_l) else gh
    consts = certify_constants(gh_b, e=e)
    consts.require_oriented()
    if lo >= hi:
        raise ValueError(f"degenerate strip: lo={lo} >= hi={hi}")
    shift = np.atleast_1d(np.asarray(shift, dtype=np.float64))
    env_hat = replace_on_strip(env, lo, hi, consts.e, shift)

    gh_th = shift_momentum(gh_b, np.atleast_1d(theta))
    cfg = SolveConfig(scheme="semi-lagrangian", dt=dt, dx=dx, T=t,
                      box_lo=box[0], box_hi=box[1])
    res = solve_sl(gh_th, env, cfg, zero_datum)
    res_hat = solve_sl(gh_th, env_hat, cfg, zero_datum)
    sl = tuple(slice(max(a0[0], a1[0]), min(a0[1], a1[1]))
               for a0, a1 in zip(res.final.active, res_hat.final.active))
    observed = float(np.max(np.abs(res.final.values[sl] - res_hat.final.values[sl])))

    d = gh.dim
    rng = np.random.default_rng(12345)
    n_probe = 2000
    pts = rng.uniform(np.asarray(box[0]), np.asarray(box[1]), size=(n_probe, d))
    span = pts @ consts.e
    pts = pts[(span >= lo) & (span <= hi)]
    if len(pts):
        dl = np.max(np.abs(env.values(pts) - env_hat.values(pts)))
    else:
        dl = 0.0
    bound = (hi - lo) / consts.delta * float(dl)
    return {
        "observed": observed,
        "bound": bound,
        "delta": consts.delta,
        "strip_width": hi - lo,
        "cost_gap_sup": float(dl),
    }


# ---------------------------------------------------------------------------
# effective Hamiltonian extraction


def subadditivity_defects(table: UTable) -> list[dict]:
    """Defects D(m,n) = U(m) + U(n) - U(m+n), normalized by sqrt(n ln n).

    Per-sample defects are used for the Monte-Carlo error so that the
    correlation between times of the same realization is accounted for.
    """
    times = table.times
    idx = {t: k for k, t in enumerate(times)}
    rows = []
    for i, m in enumerate(times):
        for n in times[i:]:
            tot = m + n
            if tot not in idx:
                continue
            d_i = (table.samples[idx[m]] + table.samples[idx[n]]
                   - table.samples[idx[tot]])
            n_err = min(m, n)
            norm = math.sqrt(n_err * max(math.log(n_err), math.log(2.0)))
            rows.append({
                "m": m,
                "n": n,
                "defect": float(np.mean(d_i)),
                "defect_se": float(np.std(d_i, ddof=1) / math.sqrt(len(d_i)))
                if len(d_i) > 1 else 0.0,
                "normalized": float(np.mean(d_i) / norm),
                "normalized_se": float(np.std(d_i, ddof=1) / math.sqrt(len(d_i)) / norm)
                if len(d_i) > 1 else 0.0,
            })
    return rows


def check_subadditivity(table: UTable) -> dict:
    """Implied K-hat per defect pair and a stability (no-growth) verdict."""
    rows = subadditivity_defects(table)
    if not rows:
        raise ValueError("schedule has no pairwise-summable times")
    doubling = sorted((r for r in rows if r["m"] == r["n"]), key=lambda r: r["n"])
    stable = True
    for r0, r1 in zip(doubling, doubling[1:]):
        slack = 2.0 * (r0["normalized_se"] + r1["normalized_se"])
        if r1["normalized"] > r0["normalized"] + slack + 1e-12:
            stable = False
    implied = max((r["normalized"] for r in rows), default=0.0)
    return {
        "defects": rows,
        "K_hat_implied": float(max(implied, 0.0)),
        "stable": stable,
    }


def extract_effective_H(table: UTable, K_hat: float | None = None) -> EffectiveEstimate:
    """Effective Hamiltonian at theta with an honest confidence band.

    H_hat = -U(t_max)/t_max; the bias band A (ln t / t)^(1/2) uses A fitted
    from the doubling defects (A = K_hat * sum 2^{-k/2} sqrt(k+1)), and the
    Monte-Carlo standard error is added on top.
    """
    if len(table.times) < 3:
        raise ValueError("need at least 3 schedule points to fit a rate")
    mu = table.means()
    se = table.stderr()
    t_max = table.times[-1]
    H_hat = -float(mu[-1]) / t_max
    sub = check_subadditivity(table)
    if K_hat is None:
        # defect noise floor: do not let pure MC noise zero the band
        noise = max((r["normalized_se"] for r in sub["defects"]), default=0.0)
        K_hat = max(sub["K_hat_implied"], noise)
    bias = K_hat * A_OVER_KHAT * math.sqrt(max(math.log(t_max), math.log(2.0)) / t_max)
    mc = float(se[-1]) / t_max
    ratios = [-float(m) / t for m, t in zip(mu, table.times)]

    errs = [abs(r - H_hat) for r in ratios[:-1]]
    ts = table.times[:-1]
    pos = [(t, e) for t, e in zip(ts, errs) if e > 0]
    slope = None
    if len(pos) >= 2:
        slope = float(stats.linregress(np.log([t for t, _ in pos]),
                                       np.log([e for _, e in pos])).slope)
    return EffectiveEstimate(
        theta=table.theta,
        H_hat=H_hat,
        ci_halfwidth=bias + 3.0 * mc,
        bias_band=bias,
        mc_stderr=mc,
        times=list(table.times),
        ratio_sequence=ratios,
        rate_slope=slope,
        log_correction=True,
        K_hat_implied=float(sub["K_hat_implied"]),
        defects=sub["defects"],
    )


def synthetic_table(times, h: float, noise: float = 0.0, M: int = 1,
                    seed: int = 0, beta: float = 10.0) -> UTable:
    """Planted almost-subadditive sequence U(n) = -n h + sqrt(n ln n)."""
    rng = np.random.default_rng(seed)
    times = sorted(float(t) for t in times)
    rows = []
    for t in times:
        base = -t * h + math.sqrt(t * max(math.log(t), math.log(2.0)))
        rows.append(base + noise * rng.normal(size=M))
    return UTable(theta=np.zeros(1), times=times, samples=np.stack(rows),
                  base_seed=seed, beta=beta)


def effective_H_properties(estimates: list[EffectiveEstimate], beta: float) -> dict:
    """Growth and momentum-Lipschitz checks for the extracted table."""
    growth_ok = True
    lip_ok = True
    worst_growth = -np.inf
    worst_lip = -np.inf
    for est in estimates:
        th = np.linalg.norm(np.atleast_1d(est.theta))
        excess = abs(est.H_hat) - beta * (1.0 + th) - est.ci_halfwidth
        worst_growth = max(worst_growth, excess)
        if excess > 0:
            growth_ok = False
    for i, e1 in enumerate(estimates):
        for e2 in estimates[i + 1:]:
            dth = np.linalg.norm(np.atleast_1d(e1.theta) - np.atleast_1d(e2.theta))
            excess = (abs(e1.H_hat - e2.H_hat) - beta * dth
                      - e1.ci_halfwidth - e2.ci_halfwidth)
            worst_lip = max(worst_lip, excess)
            if excess > 0:
                lip_ok = False
    return {
        "growth_ok": growth_ok,
        "lipschitz_ok": lip_ok,
        "worst_growth_excess": float(worst_growth),
        "worst_lipschitz_excess": float(worst_lip),
    }


# ---------------------------------------------------------------------------
# epsilon-rate


def _sup_error_one_sample(gh_th: GameHamiltonian, env, eps: float, R: float,
                          T: float, H_bar: float, dx: float, dt: float,
                          n_t: int = 8, n_x: int = 9) -> float:
    """sup over a [0,T] x B_R grid of |eps u(t/eps, x/eps) + t H_bar|."""
    d = gh_th.dim
    t_top = T / eps
    times = [t_top * j / n_t for j in range(1, n_t + 1)]
    box = solve_box_for(gh_th, t_top, dx, report_radius=R / eps)
    cfg = SolveConfig(scheme="semi-lagrangian", dt=dt, dx=dx, T=t_top,
                      box_lo=box[0], box_hi=box[1], record_times=tuple(times))
    res = solve_sl(gh_th, env, cfg, zero_datum)
    if d == 1:
        xg = np.linspace(-R, R, n_x).reshape(-1, 1)
    else:
        ax = np.linspace(-R, R, n_x)
        mesh = np.meshgrid(*([ax] * d), indexing="ij")
        xg = np.stack([m.ravel() for m in mesh], axis=1)
        xg = xg[np.linalg.norm(xg, axis=1) <= R + 1e-12]
    worst = 0.0
    for tj, t_un in zip([T * j / n_t for j in range(1, n_t + 1)], times):
        fld = res.at_time(t_un)
        for x in xg:
            val = eps * fld.value_at(x / eps) + tj * H_bar
            worst = max(worst, abs(val))
    return worst


def rate_experiment(gh: GameHamiltonian, env_spec, theta, eps_list, R: float,
                    T: float, M: int, H_bar: float, dx: float, dt: float,
                    base_seed: int, K_hat: float | None = None,
                    calibration_fraction: float = 1.0,
                    slope_band=(0.35, 0.65)) -> dict:
    """Convergence-rate study for linear data.

    Per epsilon, per sample: sup over [0,T] x B_R of the distance between
    the scaled solution and its homogenized limit; reports quantiles, the
    log-log slope of the median against epsilon, and the exceedance of the
    split-sample calibrated threshold K_hat sqrt(-eps ln eps).
    """
    eps_list = sorted(float(e) for e in eps_list)
    if any(e > 0.5 for e in eps_list):
        raise ValueError("epsilon must be <= 1/2 (outside the valid range)")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))

    def bank(tag: int, count: int) -> dict[float, np.ndarray]:
        per_eps = {}
        for ei, eps in enumerate(eps_list):
            errs = []
            for i in range(count):
                seed = derive_seed(base_seed, tag, ei, i)
                env = sample_environment(with_seed(env_spec, seed))
                gh_b = families.bind_env_constants(gh, env) if np.isnan(gh.lip_l) else gh
                gh_th = shift_momentum(gh_b, theta)
                errs.append(_sup_error_one_sample(
                    gh_th, env, eps, R, T, H_bar, dx, dt))
            per_eps[eps] = np.array(errs)
        return per_eps

    m_cal = max(4, int(M * calibration_fraction))
    cal = bank(1, m_cal) if K_hat is None else None
    test = bank(2, M)

    if K_hat is None:
        ratios = np.concatenate([
            cal[eps] / math.sqrt(-eps * math.log(eps)) for eps in eps_list
        ])
        K_hat = 1.25 * float(ratios.max())

    medians = {eps: float(np.median(test[eps])) for eps in eps_list}
    spread = all(np.std(test[eps]) > 1e-12 or medians[eps] > 1e-12
                 for eps in eps_list)
    degenerate = not spread

    slope = None
    slope_se = None
    conclusive = False
    in_band = False
    if not degenerate and all(medians[eps] > 0 for eps in eps_list):
        xs = np.log(eps_list)
        ys = np.log([medians[e] for e in eps_list])
        reg = stats.linregress(xs, ys)
        slope = float(reg.slope)
        slope_se = float(reg.stderr) if not math.isnan(reg.stderr) else None
        # bootstrap the medians for an honest slope uncertainty
        rng = np.random.default_rng(base_seed)
        boots = []
        for _ in range(200):
            ys_b = []
            for eps in eps_list:
                samp = rng.choice(test[eps], size=len(test[eps]), replace=True)
                med = np.median(samp)
                ys_b.append(math.log(max(med, 1e-300)))
            boots.append(stats.linregress(xs, ys_b).slope)
        slope_se = float(np.std(boots))
        in_band = slope_band[0] <= slope <= slope_band[1]
        conclusive = in_band or slope_se < 0.1

    exceedance = {
        eps: float(np.mean(test[eps] > K_hat * math.sqrt(-eps * math.log(eps))))
        for eps in eps_list
    }
    exceedance_ok = all(exceedance[eps] <= 5.0 * eps**2 + 1e-12 for eps in eps_list)
    return {
        "eps_list": eps_list,
        "medians": medians,
        "quantiles": {eps: [float(np.quantile(test[eps], q))
                            for q in (0.1, 0.5, 0.9)] for eps in eps_list},
        "slope": slope,
        "slope_se": slope_se,
        "in_band": in_band,
        "conclusive": conclusive,
        "degenerate": degenerate,
        "K_hat": float(K_hat),
        "exceedance": exceedance,
        "exceedance_ok": exceedance_ok,
    }


# ---------------------------------------------------------------------------
# general initial data


def general_datum_homogenization(gh: GameHamiltonian, env, H_bar_grid,
                                 H_bar_vals, g, speed_bound: float,
                                 eps_list, R: float, T: float,
                                 dx0: float, dt0: float) -> dict:
    """Scaled solves with a general UC datum against the effective equation.

    The effective problem du/dt + Hbar(Du) = 0 is solved by Lax-Friedrichs
    with Hbar interpolated from the supplied momentum table; the sup
    distance on [0, T] x B_R must decrease along the epsilon list.
    """
    H_bar_grid = np.asarray(H_bar_grid, dtype=np.float64)
    H_bar_vals = np.asarray(H_bar_vals, dtype=np.float64)

    def H_of_p(P):
        p = np.atleast_2d(P)[:, 0]
        if np.any(p < H_bar_grid[0] - 1e-9) or np.any(p > H_bar_grid[-1] + 1e-9):
            raise ValueError(
                f"momentum excursion [{p.min()}, {p.max()}] beyond the Hbar "
                f"table range [{H_bar_grid[0]}, {H_bar_grid[-1]}]"
            )
        return np.interp(p, H_bar_grid, H_bar_vals)

    gh_b = families.bind_env_constants(gh, env) if np.isnan(gh.lip_l) else gh
    d = gh_b.dim
    f_reach = gh_b.f_inf * T + 1.0
    box_lo = tuple([-R - f_reach] * d)
    box_hi = tuple([R + f_reach] * d)

    # the effective solve is refined relative to the scaled runs so that its
    # own scheme error does not mask the epsilon-trend being measured; the
    # LF stencil sheds one ring per substep, so its box is sized from the
    # substep count rather than the physical speed of propagation
    dx_eff = dx0 / 4.0
    n_sub = max(1, math.ceil(dt0 * 2.0 * speed_bound * d / (0.9 * dx_eff)))
    lf_margin = (T / dt0) * n_sub * dx_eff + dx_eff
    eff_cfg = SolveConfig(scheme="lax-friedrichs", dt=dt0, dx=dx_eff, T=T,
                          box_lo=tuple([-R - lf_margin] * d),
                          box_hi=tuple([R + lf_margin] * d),
                          record_times=(T,))
    eff = solve_effective(H_of_p, speed_bound, eff_cfg, g)

    dists = {}
    for eps in sorted(eps_list, reverse=True):
        cfg = SolveConfig(scheme="semi-lagrangian", dt=dt0 * eps, dx=dx0 * eps,
                          T=T, box_lo=box_lo, box_hi=box_hi, epsilon=eps,
                          record_times=(T,))
        res = solve_sl(gh_b, env, cfg, g)
        xg = np.linspace(-R, R, 17)
        worst = 0.0
        for x in xg:
            xx = np.full(d, 0.0)
            xx[0] = x
            worst = max(worst, abs(res.final.value_at(xx) - eff.final.value_at(xx)))
        dists[eps] = worst
    eps_sorted = sorted(dists, reverse=True)
    # a single realization fluctuates, so strict per-step monotonicity is not
    # expected; the trend check compares the endpoints and flags the rest
    decreasing = dists[eps_sorted[-1]] < dists[eps_sorted[0]]
    monotone = all(dists[e2] <= dists[e1] * 1.1 + 1e-9
                   for e1, e2 in zip(eps_sorted, eps_sorted[1:]))
    return {"distances": dists, "decreasing": decreasing, "monotone": monotone}
