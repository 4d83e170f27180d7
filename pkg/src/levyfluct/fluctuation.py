"""Resolvent, hitting, and conditioning identities on scale functions.

For the process killed at an independent exponential time e_beta, the
basic objects are the resolvent density

    u_q(y) = phi'(q) exp(-phi(q) y) - W^(q)(-y),

the conditioning weight h_beta(y) = u_beta(0) - u_beta(-y) (the price of
avoiding 0 up to e_beta), the first-passage transforms below a level,
the probability of creeping across 0, and the jump kernel that moves
mass from the positive half line across 0.

Numerically the danger in all of these is cancellation: u_q and h_beta
subtract two terms that each grow like exp(phi(q)|y|).  Every formula
here is therefore routed through the scale engine's leading-term splits
(``w_minus_leading``/``z_minus_leading``), which remove the dominant
exponential algebraically and keep relative accuracy at large |y|.

The g-family collects the harmonic-minorant weights used to condition
the process on sign behaviour; their beta -> 0 limits are taken in
closed form, never numerically.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

from ._quadrature import integrate_finite, integrate_semiinfinite
from .errors import BadParameterError, QuadratureFailure
from .excursion import constant_A
from .model import NoJumps, _tail_decay_hint

__all__ = [
    "GFamily",
    "resolvent_density",
    "h_beta",
    "hitting_laplace",
    "passage_below_laplace",
    "creeping_probability",
    "survival_probability",
    "kernel_K",
    "conditioned_resolvent_density",
    "g_family",
]


def _check_positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise BadParameterError(f"{name} must be finite and > 0, got {value}")
    return value


def resolvent_density(engine, q, y):
    """Density u_q(y) of the resolvent of the process killed at rate q.

    u_q(y) = phi'(q) exp(-phi(q) y) for y >= 0; for y < 0 the scale term
    W^(q)(-y) enters and the difference is taken through the engine's
    leading-term split, so no accuracy is lost when phi(q)|y| is large.
    """
    q = _check_positive("q", q)
    y = float(y)
    m = engine.model
    if y >= 0.0:
        return float(m.phi_prime(q)) * math.exp(-m.phi(q) * y)
    return -engine.w_minus_leading(q, -y)


def h_beta(engine, beta, y):
    """Weight h_beta(y) = u_beta(0) - u_beta(-y) of avoiding 0 up to e_beta.

    Equals phi'(beta)(1 - exp(y*phi(beta))) + W^(beta)(y); the y > 0
    branch is evaluated as phi'(beta) + w_minus_leading(beta, y), which
    is the same identity with the exploding exponentials cancelled
    exactly.
    """
    beta = _check_positive("beta", beta)
    y = float(y)
    m = engine.model
    phip = float(m.phi_prime(beta))
    if y <= 0.0:
        return phip * (1.0 - math.exp(y * m.phi(beta)))
    return phip + engine.w_minus_leading(beta, y)


def hitting_laplace(engine, beta, y):
    """E_y[exp(-beta T_0)] = u_beta(-y)/u_beta(0) for the first hit of 0."""
    beta = _check_positive("beta", beta)
    y = float(y)
    m = engine.model
    if y <= 0.0:
        return math.exp(m.phi(beta) * y)
    return -engine.w_minus_leading(beta, y) / float(m.phi_prime(beta))


def passage_below_laplace(engine, beta, y):
    """E_y[exp(-beta tau0minus); tau0minus < inf] for first passage below 0.

    Z^(beta)(y) - (beta/phi(beta)) W^(beta)(y); the dominant exponential
    of Z and W is identical and is removed from both factors before
    subtracting.
    """
    beta = _check_positive("beta", beta)
    y = _check_positive("y", y)
    m = engine.model
    phib = float(m.phi(beta))
    return engine.z_minus_leading(beta, y) - (beta / phib) * engine.w_minus_leading(
        beta, y
    )


def creeping_probability(engine, x):
    """P_x(tau0minus < inf, X at tau0minus = 0): crossing 0 continuously.

    (sigma2/2)(W'(x) - phi(0) W(x)); zero without a Gaussian part.  The
    raw value is returned unclamped so a violation of [0, 1] beyond the
    engine's error estimate shows up in tests instead of being hidden.
    """
    x = _check_positive("x", x)
    m = engine.model
    if m.sigma2 == 0.0:
        return 0.0
    phi0 = float(m.phi(0.0))
    return 0.5 * m.sigma2 * (engine.w_prime(0.0, x) - phi0 * engine.w(0.0, x))


def survival_probability(engine, x):
    """P_x(tau0minus = inf) = psi'(0+) W(x); zero unless drifting to +inf."""
    x = _check_positive("x", x)
    mean = engine.model.mean
    if mean <= 0.0:
        return 0.0
    return mean * engine.w(0.0, x)


def kernel_K(engine, beta, x, f, deadline=None):
    """Jump kernel K_beta f(x) moving mass from (0, inf) across 0.

    K_beta f(x) = int_0^inf dy (exp(-phi(beta) y) W^(beta)(x) -
    W^(beta)(x - y)) int_(-inf,-y) Pi(dz) f(y, y + z) for bounded f of
    (level before the jump, level after the jump).  The inner integral
    is one-dimensional after the substitution z = -y - s, so the whole
    kernel costs one nested quadrature.  The scale factor in front is
    nonnegative by the two-sided exit identity; it is checked pointwise
    and a genuine violation raises.

    ``deadline`` (seconds) cooperatively cancels a long evaluation.
    """
    beta = float(beta)
    if not (math.isfinite(beta) and beta >= 0.0):
        raise BadParameterError(f"beta must be finite and >= 0, got {beta}")
    x = _check_positive("x", x)
    m = engine.model
    if isinstance(m.jumps, NoJumps):
        return 0.0
    phib = float(m.phi(beta))
    wx = engine.w(beta, x)
    hint = _tail_decay_hint(m.jumps)
    stop = None if deadline is None else time.monotonic() + float(deadline)

    def tail_f(y):
        return integrate_semiinfinite(
            lambda s: float(m.jumps.density(y + s)) * f(y, -s),
            a=0.0,
            decay=hint,
            rtol=1e-9,
            atol=1e-11,
        )

    def scale_factor(y):
        val = math.exp(-phib * y) * wx - engine.w(beta, x - y)
        if val < -1e-9 * (1.0 + wx):
            raise QuadratureFailure(
                f"exit-identity factor came out negative ({val:.3e}) at y={y}"
            )
        return max(val, 0.0)

    def outer(y):
        if stop is not None and time.monotonic() > stop:
            raise QuadratureFailure("kernel quadrature hit its cooperative deadline")
        return scale_factor(y) * tail_f(y)

    # head on [0, x] with y = t*t flattening the integrable jump-tail
    # singularity at 0; beyond x only the exponential term survives
    head = integrate_finite(
        lambda t: 2.0 * t * outer(t * t), 0.0, math.sqrt(x), rtol=1e-8, atol=1e-10
    )
    tail = integrate_semiinfinite(
        outer, a=x, decay=phib + hint, rtol=1e-8, atol=1e-10
    )
    return head + tail


def conditioned_resolvent_density(engine, beta, lam, x, y):
    """Resolvent density of the process conditioned to avoid 0 up to e_beta.

    (u_{beta+lam}(y-x) - u_{beta+lam}(-x) u_{beta+lam}(y)/u_{beta+lam}(0))
    * h_beta(y)/h_beta(x).
    """
    beta = _check_positive("beta", beta)
    lam = _check_positive("lam", lam)
    x = float(x)
    y = float(y)
    if x == 0.0 or y == 0.0:
        raise BadParameterError("conditioned resolvent needs x != 0 and y != 0")
    rate = beta + lam
    u0 = float(engine.model.phi_prime(rate))
    free = resolvent_density(engine, rate, y - x)
    killed = resolvent_density(engine, rate, -x) * resolvent_density(engine, rate, y) / u0
    return (free - killed) * h_beta(engine, beta, y) / h_beta(engine, beta, x)


# ---------------------------------------------------------------------------
# the g-family of conditioning weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GFamily:
    """Pointwise evaluators of the conditioning weights and the constant A.

    ``g_tilde_infinite`` flags the drift-to--inf case where the tilde
    weight degenerates; the evaluator then returns math.inf rather than
    a large float, so consumers must branch on the flag.
    """

    g: Callable[[float], float]
    g_minus: Callable[[float], float]
    g_plus: Callable[[float], float]
    g_tilde: Callable[[float], float]
    g_minus_beta: Callable[[float, float], float]
    constant_a: float
    g_tilde_infinite: bool


def g_family(engine):
    """Build the weight family of one model.

    g(x) = (1 - exp(phi(0) x))/phi(0), with the explicit branch g(x) = -x
    when phi(0) = 0 (no numeric 0/0 limit).  g_minus is its restriction
    to x < 0 and g_plus(x) = W(x) on x >= 0.  g_minus_beta(beta, x) is
    the killed analogue (1 - exp(x phi(beta)))/phi(beta), nondecreasing
    as beta decreases, with limit g_minus.  g_tilde follows the
    three-way split on the sign of the mean, with the infinite-variance
    oscillating case collapsing the linear term to zero.
    """
    m = engine.model
    phi0 = float(m.phi(0.0))
    a_const = constant_A(engine)
    infinite = m.mean < 0.0

    def g(x):
        x = float(x)
        if phi0 == 0.0:
            return -x
        return (1.0 - math.exp(phi0 * x)) / phi0

    def g_minus(x):
        x = float(x)
        if x >= 0.0:
            raise BadParameterError("g_minus is defined on x < 0")
        return g(x)

    def g_plus(x):
        x = float(x)
        if x < 0.0:
            raise BadParameterError("g_plus is defined on x >= 0")
        return engine.w(0.0, x)

    def g_minus_beta(beta, x):
        x = float(x)
        beta = float(beta)
        if x >= 0.0:
            raise BadParameterError("g_minus_beta is defined on x < 0")
        if not (math.isfinite(beta) and beta >= 0.0):
            raise BadParameterError(f"beta must be finite and >= 0, got {beta}")
        phib = float(m.phi(beta))
        if phib == 0.0:
            return -x
        return (1.0 - math.exp(x * phib)) / phib

    if infinite:
        def g_tilde(x):
            return math.inf
    else:
        def g_tilde(x):
            x = float(x)
            pos = engine.w(0.0, x) if x > 0.0 else 0.0
            return pos - a_const * x

    return GFamily(
        g=g,
        g_minus=g_minus,
        g_plus=g_plus,
        g_tilde=g_tilde,
        g_minus_beta=g_minus_beta,
        constant_a=a_const,
        g_tilde_infinite=infinite,
    )
