"""Path simulation cross-checks for the analytic layer.

Euler scheme at step ``dt`` with exact exponential-clock jump insertion.
The block sweeps behind the estimators do not walk every step: between
jumps the Gaussian part advances one endpoint draw per chunk, and a
Brownian-bridge screen decides which chunks need the fine grid at all.
Chunks that might contain the first crossing (or contain a jump) are
filled in at full resolution, conditioned on the already-drawn endpoint,
so the sampled law is the stepwise scheme with the bridge-probability
crossing correction applied at every fine step.  Chunks screened out
carry a crossing probability below ``_P_FLOOR`` each; the total bias is
bounded by the chunk count times that floor.

Randomness is counter-based (Philox).  ``simulate_path`` keys a stream
by (seed, streamIndex); the sweeps key one stream per block of paths
and fold block statistics in index order, so estimates are pure
functions of (model, config) regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import (
    BadConfigError,
    BadParameterError,
    InsufficientCrossings,
    WrongRegimeError,
)
from .model import LevyModel, NoJumps, Regime
from .scale import make_engine
from . import fluctuation

__all__ = [
    "MCConfig",
    "PathSample",
    "StoppingInfo",
    "Estimate",
    "simulate_path",
    "sample_terminal",
    "martingale_check",
    "estimate_upcross_laplace",
    "estimate_passage_below_laplace",
    "estimate_creeping",
    "estimate_survival",
]

_U64 = (1 << 64) - 1
# chunk crossing probabilities below this are dropped instead of refined;
# the induced bias is at most (horizon/chunk span) * floor per path
_P_FLOOR = 1e-8
_MIN_CROSSINGS = 10


# ---------------------------------------------------------------------------
# configuration and result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCConfig:
    """Simulation parameters.

    horizon None means "pick a default": 50/|psi'(0+)| for drifting
    models; oscillating models have no natural time scale and must be
    given one explicitly.  small_jump_cutoff None triggers the automatic
    rule (normal-approximation skewness below 1e-2 where the Gaussian
    part allows it, jump intensity capped at 0.1 per step).
    """

    dt: float
    paths: int
    horizon: float | None = None
    seed: int = 0
    small_jump_cutoff: float | None = None
    small_jump_mode: str = "gaussian-compensation"
    block_paths: int = 16384
    chunk_steps: int = 256

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise BadConfigError(f"dt must be finite and > 0, got {self.dt}")
        if self.paths < 1:
            raise BadConfigError(f"paths must be >= 1, got {self.paths}")
        if self.horizon is not None:
            if not (math.isfinite(self.horizon) and self.horizon >= self.dt):
                raise BadConfigError(
                    f"horizon must be finite and >= dt, got {self.horizon}"
                )
        if self.small_jump_cutoff is not None and not (
            math.isfinite(self.small_jump_cutoff) and self.small_jump_cutoff > 0.0
        ):
            raise BadConfigError(
                f"small_jump_cutoff must be > 0, got {self.small_jump_cutoff}"
            )
        if self.small_jump_mode not in ("gaussian-compensation", "drift-only"):
            raise BadConfigError(
                "small_jump_mode must be 'gaussian-compensation' or "
                f"'drift-only', got {self.small_jump_mode!r}"
            )
        if self.block_paths < 1 or self.chunk_steps < 1:
            raise BadConfigError("block_paths and chunk_steps must be >= 1")


@dataclass(frozen=True)
class StoppingInfo:
    level: float
    time: float
    overshoot: float
    crossed_by_jump: bool


@dataclass(frozen=True)
class PathSample:
    """One simulated path on the regular grid.

    values[i+1] - values[i] is the Gaussian increment of step i plus the
    sizes of any jumps whose clock fired inside that step; jump_indices
    holds the i+1 of each jump's step, jump_sizes the (negative) sizes.
    stopping is the first-passage record when a level was watched, else
    None.
    """

    times: np.ndarray
    values: np.ndarray
    jump_indices: np.ndarray
    jump_sizes: np.ndarray
    stopping: StoppingInfo | None


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error and the analytic target.

    truncation_allowance bounds the mass the finite horizon may have cut
    off (exact tower-property mass where a closed form exists, an upper
    bound otherwise); comparisons against the target should allow
    3*stderr + truncation_allowance.
    """

    mean: float
    stderr: float
    n: int
    analytic_target: float | None = None
    z_score: float | None = None
    crossings: int | None = None
    truncation_allowance: float | None = None


# ---------------------------------------------------------------------------
# simulation plan: how one model is reduced to drift + noise + jump clocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Plan:
    sigma: float
    drift: float
    rate: float
    kind: str  # "none" | "exp" | "power" | "tempered"
    cutoff: float
    jump_rate: float
    alpha: float
    tempering: float
    jump_sign: float = -1.0  # +1.0 in the mirrored (gap) process

    def sample_jumps(self, rng, k):
        # magnitudes of the (negative) jumps, all >= cutoff except the
        # finite-activity family which has no cutoff at all
        if self.kind == "exp":
            return rng.exponential(1.0 / self.jump_rate, size=k)
        if self.kind == "power":
            u = 1.0 - rng.random(k)
            return self.cutoff * u ** (-1.0 / self.alpha)
        # tempered power tail by rejection against the bare power tail
        out = np.empty(k)
        todo = np.arange(k)
        while todo.size:
            u = 1.0 - rng.random(todo.size)
            cand = self.cutoff * u ** (-1.0 / self.alpha)
            keep = rng.random(todo.size) < np.exp(
                -self.tempering * (cand - self.cutoff)
            )
            out[todo[keep]] = cand[keep]
            todo = todo[~keep]
        return out


def _auto_cutoff(jumps, sigma2, dt):
    # two one-sided constraints: the normal approximation of discarded
    # jumps needs skewness below 1e-2 (cutoff small enough), while the
    # clock must not fire much more than 0.1 times per step (cutoff
    # large enough).  when they conflict, simulability wins.
    lo, hi = 1e-12, 1e3
    eps_rate = optimize.brentq(
        lambda e: float(jumps.tail(e)) * dt - 0.1, lo, hi, xtol=1e-14
    )
    if sigma2 > 0.0:
        budget = 0.0464 / (1.0 - 0.0464) * sigma2
        if float(jumps.truncated_variance(hi)) > budget:
            eps_skew = optimize.brentq(
                lambda e: float(jumps.truncated_variance(e)) - budget,
                lo,
                hi,
                xtol=1e-14,
            )
        else:
            eps_skew = hi
        return max(eps_rate, min(eps_skew, 1.0))
    return eps_rate


def _plan(model, config):
    jumps = model.jumps
    if isinstance(jumps, NoJumps):
        return _Plan(math.sqrt(model.sigma2), model.gamma, 0.0, "none",
                     0.0, 0.0, 0.0, 0.0)
    if jumps.finite_activity:
        # uncompensated family: gamma is already the true drift and all
        # jumps are simulated exactly, so there is nothing to fold back
        return _Plan(math.sqrt(model.sigma2), model.gamma, jumps.rate, "exp",
                     0.0, jumps.jump_rate, 0.0, 0.0)
    eps = config.small_jump_cutoff
    if eps is None:
        eps = _auto_cutoff(jumps, model.sigma2, config.dt)
    rate = float(jumps.tail(eps))
    # jumps >= eps carry mean truncated_mean(eps); the rest of psi'(0+)
    # goes into the drift so the simulated mean matches the model's
    drift = model.mean - float(jumps.truncated_mean(eps))
    var = model.sigma2
    if config.small_jump_mode == "gaussian-compensation":
        var = var + float(jumps.truncated_variance(eps))
    kind = "tempered" if jumps.family == "tempered_stable" else "power"
    tempering = getattr(jumps, "tempering", 0.0)
    return _Plan(math.sqrt(var), drift, rate, kind,
                 eps, 0.0, jumps.alpha, tempering)


def _resolve_horizon(model, config):
    if config.horizon is not None:
        return float(config.horizon)
    mean = model.mean
    if mean == 0.0:
        raise BadConfigError(
            "oscillating models have no default horizon; set one explicitly"
        )
    return 50.0 / abs(mean)


def _philox(seed, stream):
    key = ((int(seed) & _U64) << 64) | (int(stream) & _U64)
    return np.random.Generator(np.random.Philox(key=key))


def _blocks(config):
    left = config.paths
    index = 0
    while left > 0:
        size = min(config.block_paths, left)
        yield index, size
        left -= size
        index += 1


# ---------------------------------------------------------------------------
# single-path simulation (full grid, bitwise deterministic per stream)
# ---------------------------------------------------------------------------


def simulate_path(model, config, stream_index, level=None):
    """Simulate one path from 0 on the full grid.

    Deterministic given (config.seed, stream_index).  When ``level`` is
    given (a value below 0), the first passage below it is recorded with
    the bridge-probability correction between grid points and the
    crossing attributed to a jump or to the continuous part.
    """

    if not isinstance(model, LevyModel):
        raise BadParameterError("simulate_path needs a LevyModel")
    horizon = _resolve_horizon(model, config)
    plan = _plan(model, config)
    rng = _philox(config.seed, stream_index)
    dt = config.dt
    n = int(round(horizon / dt))
    times = np.arange(n + 1) * dt

    incr = plan.drift * dt + plan.sigma * math.sqrt(dt) * rng.standard_normal(n)
    if plan.rate > 0.0:
        gaps = rng.exponential(1.0 / plan.rate, size=int(plan.rate * horizon * 1.5) + 32)
        jump_times = np.cumsum(gaps)
        while jump_times.size and jump_times[-1] < horizon:
            more = rng.exponential(1.0 / plan.rate, size=32)
            jump_times = np.concatenate([jump_times, jump_times[-1] + np.cumsum(more)])
        jump_times = jump_times[jump_times < horizon]
        sizes = -plan.sample_jumps(rng, jump_times.size)
        bins = np.minimum((jump_times / dt).astype(int), n - 1)
        np.add.at(incr, bins, sizes)
        jump_indices = bins + 1
    else:
        sizes = np.empty(0)
        jump_indices = np.empty(0, dtype=int)

    values = np.concatenate([[0.0], np.cumsum(incr)])

    stopping = None
    if level is not None:
        level = float(level)
        if level >= 0.0:
            raise BadParameterError("watched level must be below the start 0")
        d0 = values[:-1] - level
        d1 = values[1:] - level
        landed = d1 < 0.0
        if plan.sigma > 0.0:
            both = (d0 > 0.0) & (d1 > 0.0)
            with np.errstate(over="ignore"):
                p = np.where(both, np.exp(-2.0 * d0 * d1 / (plan.sigma**2 * dt)), 0.0)
            touched = rng.random(n) < p
        else:
            touched = np.zeros(n, dtype=bool)
        event = landed | touched
        if event.any():
            i = int(np.argmax(event))
            has_jump = np.isin(i + 1, jump_indices)
            if landed[i]:
                overshoot = float(-d1[i])
                # attribute to the jump when one fired in the step and the
                # Gaussian part alone would have stayed above
                jump_sum = float(sizes[jump_indices == i + 1].sum()) if has_jump else 0.0
                by_jump = bool(has_jump and d1[i] - jump_sum >= 0.0)
            else:
                overshoot = 0.0
                by_jump = False
            stopping = StoppingInfo(
                level=level,
                time=float(times[i + 1]),
                overshoot=overshoot,
                crossed_by_jump=by_jump,
            )

    return PathSample(
        times=times,
        values=values,
        jump_indices=jump_indices,
        jump_sizes=sizes,
        stopping=stopping,
    )


# ---------------------------------------------------------------------------
# block sweep: first passage below 0 from a positive start
# ---------------------------------------------------------------------------


def _sweep_block(plan, config, rng, m, start, horizon, need_detail):
    """Run one block of paths until they cross below 0 or reach horizon.

    Returns (crossed, tau, overshoot, by_jump, x_final).  With
    need_detail=False the chunk-level bridge decision is used directly
    (the marginal crossing law is identical); tau and overshoot are then
    only meaningful to chunk precision and crossings are not attributed.
    """

    dt = config.dt
    sig = plan.sigma
    sig2dt = sig * sig * dt
    x = np.full(m, float(start))
    crossed = np.zeros(m, dtype=bool)
    tau = np.zeros(m)
    over = np.zeros(m)
    byjump = np.zeros(m, dtype=bool)
    if plan.rate > 0.0:
        next_jump = rng.exponential(1.0 / plan.rate, size=m)
    else:
        next_jump = np.full(m, np.inf)

    steps_total = int(round(horizon / dt))
    pos = 0
    while pos < steps_total:
        alive = np.nonzero(~crossed)[0]
        if alive.size == 0:
            break
        steps = min(config.chunk_steps, steps_total - pos)
        span = steps * dt
        t0 = pos * dt
        x0 = x[alive]
        if sig > 0.0:
            z = rng.standard_normal(alive.size)
        else:
            z = np.zeros(alive.size)
        g_end = plan.drift * span + sig * math.sqrt(span) * z
        x1 = x0 + g_end

        # draw every jump event of the chunk up front; refinement then
        # reuses the events instead of replaying the clocks
        sum_j = np.zeros(alive.size)
        evt_local = np.empty(0, dtype=int)
        evt_bin = np.empty(0, dtype=int)
        evt_size = np.empty(0)
        if plan.rate > 0.0:
            cur = next_jump[alive].copy()
            active = cur < t0 + span
            parts = []
            while active.any():
                sub = np.nonzero(active)[0]
                b = np.minimum(((cur[sub] - t0) / dt).astype(int), steps - 1)
                sizes = plan.jump_sign * plan.sample_jumps(rng, sub.size)
                np.add.at(sum_j, sub, sizes)
                parts.append((sub, b, sizes))
                cur[sub] += rng.exponential(1.0 / plan.rate, size=sub.size)
                active = cur < t0 + span
            next_jump[alive] = cur
            if parts:
                evt_local = np.concatenate([p[0] for p in parts])
                evt_bin = np.concatenate([p[1] for p in parts])
                evt_size = np.concatenate([p[2] for p in parts])
        has_jump = sum_j != 0.0

        # lower envelope: the whole Gaussian bridge shifted down by the
        # chunk's total negative jump mass; its crossing probability
        # bounds the path's, so anything under the floor can advance in
        # one go with the jumps applied at the chunk end
        pess = np.minimum(sum_j, 0.0)
        a_env = x0 + pess
        b_env = x1 + pess
        if sig > 0.0:
            both = (a_env > 0.0) & (b_env > 0.0)
            with np.errstate(over="ignore"):
                p = np.where(
                    both, np.exp(-2.0 * a_env * b_env / (sig * sig * span)), 1.0
                )
        else:
            p = np.where((a_env <= 0.0) | (b_env <= 0.0), 1.0, 0.0)

        if need_detail:
            refine = p > _P_FLOOR
        else:
            refine = has_jump & (p > _P_FLOOR)

        plain = ~refine
        if plain.any():
            rows = alive[plain]
            x_end = x1[plain] + sum_j[plain]
            if need_detail:
                # crossing probability under the floor by construction
                x[rows] = x_end
            else:
                # no-jump rows: exact chunk-level bridge decision; jump
                # rows only reach here under the floor, where p ~ 0
                u = rng.random(rows.size)
                hit = u < p[plain]
                hit_rows = rows[hit]
                crossed[hit_rows] = True
                tau[hit_rows] = t0 + span
                over[hit_rows] = np.maximum(-x_end[hit], 0.0)
                keep = rows[~hit]
                x[keep] = x_end[~hit]

        if refine.any():
            rows = alive[refine]
            r = rows.size
            e_tot = g_end[refine]
            if sig > 0.0:
                g = rng.standard_normal((r, steps))
                fine = (g - g.mean(axis=1, keepdims=True)) * (sig * math.sqrt(dt))
                fine += (e_tot / steps)[:, None]
            else:
                fine = np.full((r, steps), plan.drift * dt)

            jumps_here = np.zeros((r, steps))
            jump_bin = np.zeros((r, steps), dtype=bool)
            if evt_local.size:
                local = np.full(alive.size, -1)
                local[refine] = np.arange(r)
                keep_evt = local[evt_local] >= 0
                ev_r = local[evt_local[keep_evt]]
                ev_b = evt_bin[keep_evt]
                np.add.at(jumps_here, (ev_r, ev_b), evt_size[keep_evt])
                jump_bin[ev_r, ev_b] = True

            posn = x[rows][:, None] + np.cumsum(fine + jumps_here, axis=1)
            pre = posn - jumps_here  # value just before the step's jump lands
            prev = np.concatenate([x[rows][:, None], posn[:, :-1]], axis=1)
            step_cross = pre < 0.0
            jump_cross = (~step_cross) & (posn < 0.0) & jump_bin
            if sig > 0.0:
                both = (prev > 0.0) & (pre > 0.0)
                with np.errstate(over="ignore"):
                    pb = np.where(both, np.exp(-2.0 * prev * pre / sig2dt), 0.0)
                bridge_cross = rng.random((r, steps)) < pb
            else:
                bridge_cross = np.zeros((r, steps), dtype=bool)

            event = step_cross | jump_cross | bridge_cross
            hit = event.any(axis=1)
            if hit.any():
                sub = np.nonzero(hit)[0]
                first = np.argmax(event[sub], axis=1)
                g_rows = rows[sub]
                crossed[g_rows] = True
                tau[g_rows] = t0 + (first + 1) * dt
                is_bridge = bridge_cross[sub, first]
                is_step = step_cross[sub, first] & ~is_bridge
                is_jump = ~is_bridge & ~is_step
                over[g_rows] = np.where(
                    is_bridge,
                    0.0,
                    np.where(is_step, -pre[sub, first], -posn[sub, first]),
                )
                byjump[g_rows] = is_jump
            cont = rows[~hit]
            x[cont] = posn[~hit, -1]

        pos += steps

    return crossed, tau, over, byjump, x


def _fold(values_iter):
    # streaming (n, mean, M2) in fixed block order
    n, mean, m2 = 0, 0.0, 0.0
    for arr in values_iter:
        k = arr.size
        if k == 0:
            continue
        bm = float(arr.mean())
        bv = float(((arr - bm) ** 2).sum())
        if n == 0:
            n, mean, m2 = k, bm, bv
        else:
            d = bm - mean
            tot = n + k
            mean += d * k / tot
            m2 += bv + d * d * n * k / tot
            n = tot
    return n, mean, m2


def _finish(n, mean, m2, target, crossings=None, allowance=None):
    if n > 1:
        stderr = math.sqrt(m2 / (n - 1) / n)
    else:
        stderr = 0.0
    z = None
    if target is not None:
        z = (mean - target) / stderr if stderr > 0.0 else 0.0
    return Estimate(
        mean=float(mean),
        stderr=float(stderr),
        n=int(n),
        analytic_target=None if target is None else float(target),
        z_score=None if z is None else float(z),
        crossings=crossings,
        truncation_allowance=allowance,
    )


def _grid_mean(values, fn):
    # mean of fn over the sampled points via a 256-point interpolation
    # table; the consumers are truncation allowances, not estimates
    if values.size == 0:
        return 0.0
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        return float(fn(lo))
    xs = np.linspace(lo, hi, 256)
    ys = np.array([fn(float(v)) for v in xs])
    return float(np.interp(values, xs, ys).mean())


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def _check_positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise BadParameterError(f"{name} must be finite and > 0, got {value}")
    return value


def estimate_upcross_laplace(model, config, a, q):
    """Mean of exp(-q * first passage time above a), against exp(-a*phi(q)).

    Upward crossings are continuous (no positive jumps), so the sweep
    runs on the reflected gap a - X, whose jumps point away from the
    barrier.
    """

    a = _check_positive("a", a)
    q = _check_positive("q", q)
    horizon = _resolve_horizon(model, config)
    plan = _plan(model, config)
    # gap process a - X: drift flips and the (negative) jumps point up,
    # away from the barrier, so crossing by a jump cannot happen
    mirror = _Plan(plan.sigma, -plan.drift, plan.rate, plan.kind,
                   plan.cutoff, plan.jump_rate, plan.alpha, plan.tempering,
                   jump_sign=1.0)

    crossings = 0
    alive = 0

    def blocks():
        nonlocal crossings, alive
        for index, size in _blocks(config):
            rng = _philox(config.seed, index)
            crossed, tau, _, _, _ = _sweep_block(
                mirror, config, rng, size, a, horizon, need_detail=True
            )
            # mirrored sweep: "jumps" were flipped positive inside the
            # gap process by negating sizes in the plan drift; crossing
            # of 0 by the gap is the upcross of a
            crossings += int(crossed.sum())
            alive += int(size - crossed.sum())
            yield np.where(crossed, np.exp(-q * tau), 0.0)

    n, mean, m2 = _fold(blocks())
    if crossings < _MIN_CROSSINGS:
        raise InsufficientCrossings(
            f"only {crossings} of {n} paths reached {a} before t={horizon}"
        )
    target = math.exp(-a * model.phi(q))
    allowance = (alive / n) * math.exp(-q * horizon)
    return _finish(n, mean, m2, target, crossings, allowance)


def estimate_passage_below_laplace(model, config, x, beta):
    """Mean of exp(-beta * first passage time below 0) started from x."""

    x = _check_positive("x", x)
    beta = _check_positive("beta", beta)
    horizon = _resolve_horizon(model, config)
    plan = _plan(model, config)
    crossings = 0
    alive = 0

    def blocks():
        nonlocal crossings, alive
        for index, size in _blocks(config):
            rng = _philox(config.seed, index)
            crossed, tau, _, _, _ = _sweep_block(
                plan, config, rng, size, x, horizon, need_detail=True
            )
            crossings += int(crossed.sum())
            alive += int(size - crossed.sum())
            yield np.where(crossed, np.exp(-beta * tau), 0.0)

    n, mean, m2 = _fold(blocks())
    if crossings < _MIN_CROSSINGS:
        raise InsufficientCrossings(
            f"only {crossings} of {n} paths crossed 0 before t={horizon}"
        )
    engine = make_engine(model)
    target = fluctuation.passage_below_laplace(engine, beta, x)
    allowance = (alive / n) * math.exp(-beta * horizon)
    return _finish(n, mean, m2, target, crossings, allowance)


def estimate_creeping(model, config, x):
    """Fraction of paths that cross 0 continuously, against Kesten's form.

    A crossing creeps when it is not attributed to a jump and the first
    sub-zero position is within 3*sigma*sqrt(dt) of the barrier.  With
    no Gaussian part the threshold is empty and the estimate is exactly
    zero, matching the identity.
    """

    x = _check_positive("x", x)
    horizon = _resolve_horizon(model, config)
    plan = _plan(model, config)
    threshold = 3.0 * plan.sigma * math.sqrt(config.dt) if plan.sigma > 0.0 else -1.0
    crossings = 0
    finals = []

    def blocks():
        nonlocal crossings
        for index, size in _blocks(config):
            rng = _philox(config.seed, index)
            crossed, _, over, byjump, xf = _sweep_block(
                plan, config, rng, size, x, horizon, need_detail=True
            )
            crossings += int(crossed.sum())
            finals.append(xf[~crossed])
            creep = crossed & ~byjump & (over <= threshold)
            yield creep.astype(float)

    n, mean, m2 = _fold(blocks())
    engine = make_engine(model)
    target = fluctuation.creeping_probability(engine, x)
    survivors = np.concatenate(finals) if finals else np.empty(0)
    allowance = (survivors.size / n) * _grid_mean(
        survivors, lambda v: fluctuation.creeping_probability(engine, max(v, 1e-12))
    )
    return _finish(n, mean, m2, target, crossings, float(allowance))


def estimate_survival(model, config, x):
    """Fraction of paths that never go below 0, against psi'(0+) W(x)."""

    x = _check_positive("x", x)
    if model.drift_regime().kind is not Regime.TO_PLUS_INFINITY:
        raise WrongRegimeError(
            "survival is degenerate unless the process drifts to +infinity"
        )
    horizon = _resolve_horizon(model, config)
    plan = _plan(model, config)
    finals = []

    def blocks():
        for index, size in _blocks(config):
            rng = _philox(config.seed, index)
            crossed, _, _, _, xf = _sweep_block(
                plan, config, rng, size, x, horizon, need_detail=False
            )
            finals.append(xf[~crossed])
            yield (~crossed).astype(float)

    n, mean, m2 = _fold(blocks())
    engine = make_engine(model)
    target = fluctuation.survival_probability(engine, x)
    survivors = np.concatenate(finals) if finals else np.empty(0)
    allowance = (survivors.size / n) * _grid_mean(
        survivors,
        lambda v: min(
            max(1.0 - fluctuation.survival_probability(engine, max(v, 1e-12)), 0.0),
            1.0,
        ),
    )
    return _finish(n, mean, m2, target, None, float(allowance))


# ---------------------------------------------------------------------------
# unconstrained terminal values: moment and martingale checks
# ---------------------------------------------------------------------------


def sample_terminal(model, config):
    """Terminal values X_horizon for all paths, no barrier logic.

    Exact in the Gaussian part (chunk endpoint sums) with jumps added at
    their clock times, so the only approximation is the small-jump
    treatment itself.
    """

    horizon = _resolve_horizon(model, config)
    plan = _plan(model, config)
    out = []
    for index, size in _blocks(config):
        rng = _philox(config.seed, index)
        x = np.full(size, plan.drift * horizon)
        if plan.sigma > 0.0:
            x += plan.sigma * math.sqrt(horizon) * rng.standard_normal(size)
        if plan.rate > 0.0:
            counts = rng.poisson(plan.rate * horizon, size=size)
            total = int(counts.sum())
            sizes = plan.sample_jumps(rng, total)
            owner = np.repeat(np.arange(size), counts)
            np.subtract.at(x, owner, sizes)
        out.append(x)
    return np.concatenate(out)


def martingale_check(model, config, lam):
    """Sample mean of exp(lam*X_t - psi(lam)*t) at t=horizon, target 1.

    Use a short horizon; the statistic's variance grows like
    exp((psi(2 lam) - 2 psi(lam)) t).
    """

    lam = _check_positive("lam", lam)
    horizon = _resolve_horizon(model, config)
    values = sample_terminal(model, config)
    w = np.exp(lam * values - float(model.psi(lam)) * horizon)
    n, mean, m2 = _fold(iter([w]))
    return _finish(n, mean, m2, 1.0)
