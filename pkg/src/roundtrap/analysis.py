"""Error decomposition, residual diagnostics, and convergence-economics
measures.

The decomposition compares three states at one time: the computed solution
(run precision), a reference carrying only discretization error (same scheme
and step, much wider precision), and the analytic solution.  Differences are
formed exactly -- states store exact rationals -- so total = truncation +
round-off holds componentwise by construction, not approximately.  Norms and
other irrational quantities are evaluated wide (240 bits) and returned as
exact rationals of the evaluated value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from . import _wide
from .fpcore import PrecisionConfig, unit_roundoff
from .oscillator import OscillatorParams, State, invariant_value, rhs, _as_fraction
from .schemes import Scheme, Trajectory, UpdateMatrix, update_matrix


@dataclass(frozen=True, slots=True)
class ErrorVec:
    """Per-component error and its Euclidean norm."""

    x: Fraction
    y: Fraction
    norm: Fraction


@dataclass(frozen=True, slots=True)
class ErrorTriple:
    """Total, truncation, and round-off error at time t, with
    total = truncation + roundoff exact componentwise."""

    total: ErrorVec
    truncation: ErrorVec
    roundoff: ErrorVec
    t: Fraction


def _error_vec(dx: Fraction, dy: Fraction) -> ErrorVec:
    return ErrorVec(dx, dy, _wide.wide_norm2(dx, dy))


def error_separation(actual: State, reference: State, analytic: State) -> ErrorTriple:
    """Split the error of ``actual`` against ``analytic`` into the
    truncation part (carried by ``reference``) and the round-off part
    (actual minus reference).  All three states must share the same t."""
    if not (actual.t == reference.t == analytic.t):
        raise ValueError(
            f"states are at different times: {actual.t}, {reference.t}, {analytic.t}"
        )
    ex, ey = actual.x - analytic.x, actual.y - analytic.y
    tx, ty = reference.x - analytic.x, reference.y - analytic.y
    rx, ry = actual.x - reference.x, actual.y - reference.y
    return ErrorTriple(_error_vec(ex, ey), _error_vec(tx, ty), _error_vec(rx, ry), actual.t)


# ---------------------------------------------------------------------------
# Consistency residual
# ---------------------------------------------------------------------------


def _stencil_defect(scheme: Scheme, params: OscillatorParams, u0: State, u1: State, delta: Fraction):
    """(u1 - u0)/delta minus the scheme's own increment function, in exact
    arithmetic; zero for an exact-arithmetic trajectory of that scheme."""
    dx = (u1.x - u0.x) / delta
    dy = (u1.y - u0.y) / delta
    if scheme is Scheme.FORWARD_EULER:
        fx, fy = rhs(params, u0)
    elif scheme is Scheme.MIDPOINT_IMPLICIT:
        mid = State((u0.x + u1.x) / 2, (u0.y + u1.y) / 2, u0.t)
        fx, fy = rhs(params, mid)
    elif scheme is Scheme.RK3:
        a, b = params.a, params.b
        k1x, k1y = -a * u0.y, b * u0.x
        x2, y2 = u0.x + delta / 2 * k1x, u0.y + delta / 2 * k1y
        k2x, k2y = -a * y2, b * x2
        x3, y3 = u0.x - delta * k1x + 2 * delta * k2x, u0.y - delta * k1y + 2 * delta * k2y
        k3x, k3y = -a * y3, b * x3
        fx = (k1x + 4 * k2x + k3x) / 6
        fy = (k1y + 4 * k2y + k3y) / 6
    else:
        raise ValueError(f"unsupported scheme {scheme}")
    return dx - fx, dy - fy


def consistency_residual(
    trajectory: Trajectory, params: OscillatorParams
) -> list[tuple[int, Fraction]]:
    """Residual of each consecutive sampled step pair against the scheme's
    defining stencil, at exact arithmetic with the machine step size.

    For an exact-arithmetic trajectory this is identically zero; under
    rounding it measures the injected per-step error divided by dt: the
    quantity whose failure to vanish breaks consistency.  Keyed by the index
    of the earlier step of each pair.
    """
    delta = trajectory.machine_dt
    samples = trajectory.samples
    out = []
    for (i, u0), (j, u1) in zip(samples, samples[1:]):
        if j != i + 1:
            continue
        rx, ry = _stencil_defect(trajectory.scheme, params, u0, u1, delta)
        out.append((i, _wide.wide_norm2(rx, ry)))
    if not out:
        raise ValueError("trajectory has no consecutive step pairs; sample with stride 1")
    return out


# ---------------------------------------------------------------------------
# A-priori error bound from the error recurrence
# ---------------------------------------------------------------------------


class BoundMode(Enum):
    WORST_CASE = "worst_case"
    RANDOM_WALK = "random_walk"


@dataclass(frozen=True, slots=True)
class ErrorBoundModel:
    """Magnitude model for the per-step injected error.

    WORST_CASE accumulates n*eps (aligned errors), RANDOM_WALK sqrt(n)*eps
    (independent signs).  Neither is asserted as ground truth; measured
    round-off decides which fits.
    """

    mode: BoundMode
    per_step_eps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "per_step_eps", _as_fraction(self.per_step_eps))
        if self.per_step_eps <= 0:
            raise ValueError("per_step_eps must be positive")

    @classmethod
    def for_precision(
        cls, cfg: PrecisionConfig, params: OscillatorParams, mode: BoundMode = BoundMode.WORST_CASE
    ) -> "ErrorBoundModel":
        """Default eps: unit roundoff scaled by the orbit's max state norm."""
        scale = max(Fraction(1), params.amplitude_y())
        return cls(mode, unit_roundoff(cfg) * scale)


def _spectral_norm(m00: float, m01: float, m10: float, m11: float) -> float:
    # largest singular value of a 2x2 real matrix, closed form
    a = m00 * m00 + m10 * m10
    b = m00 * m01 + m10 * m11
    c = m01 * m01 + m11 * m11
    half = 0.5 * (a + c)
    rad = math.sqrt(max(0.0, (0.5 * (a - c)) ** 2 + b * b))
    return math.sqrt(max(0.0, half + rad))


def _power_norm_cap(m: UpdateMatrix, n: int) -> float:
    """Upper bound for max_{k<=n} ||A^k||_2.

    For a complex eigenpair (every scheme here at dt>0) A is similar to a
    rotation-scaling; the similarity's condition number times max(1, rho)**n
    bounds all powers.  Falls back to scanning a nested index ladder when the
    eigenvalues are real.
    """
    (p, q), (r, s) = (tuple(map(float, row)) for row in m.entries)
    det = p * s - q * r
    tr = p + s
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        mu = 0.5 * math.sqrt(-disc)
        tau = 0.5 * tr
        # real form basis from the eigenvector (q, lambda - p); q != 0 when disc < 0
        v00, v01, v10, v11 = q, 0.0, tau - p, mu
        vdet = v00 * v11 - v01 * v10
        cond = _spectral_norm(v00, v01, v10, v11) * _spectral_norm(
            v11 / vdet, -v01 / vdet, -v10 / vdet, v00 / vdet
        )
        rho = math.sqrt(det)
        return cond * max(1.0, rho) ** n
    # real eigenvalues: scan 1..64 plus powers of two (nested in n, so the
    # result stays monotone nondecreasing in n)
    best = 1.0
    a00, a01, a10, a11 = 1.0, 0.0, 0.0, 1.0
    for k in range(1, min(n, 64) + 1):
        a00, a01, a10, a11 = (
            a00 * p + a01 * r,
            a00 * q + a01 * s,
            a10 * p + a11 * r,
            a10 * q + a11 * s,
        )
        best = max(best, _spectral_norm(a00, a01, a10, a11))
    b00, b01, b10, b11 = p, q, r, s
    k = 1
    while 2 * k <= n:
        b00, b01, b10, b11 = (
            b00 * b00 + b01 * b10,
            b00 * b01 + b01 * b11,
            b10 * b00 + b11 * b10,
            b10 * b01 + b11 * b11,
        )
        k *= 2
        best = max(best, _spectral_norm(b00, b01, b10, b11))
    return best


def predict_error_bound(
    params: OscillatorParams,
    scheme: Scheme,
    dt,
    n: int,
    model: ErrorBoundModel,
) -> float:
    """A-priori bound for the global error after n steps.

    K * (accumulated per-step eps + n*dt*c) where K bounds the powers of the
    one-step matrix and c is the scheme's local truncation scale
    (~ state_scale * w**(order+1) * dt**order / (order+1)!).  With eps = 0
    this is the classical discretization bound and vanishes as dt -> 0 at
    fixed T = n*dt; with eps > 0 the accumulated term diverges instead.
    Order-of-magnitude tool, monotone in n and in per_step_eps.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    dt = _as_fraction(dt)
    k_const = _power_norm_cap(update_matrix(scheme, params, dt), n)
    omega = float(params.angular_frequency())
    amp = max(1.0, float(params.amplitude_y()))
    order = scheme.order
    c_bound = amp * omega ** (order + 1) * float(dt) ** order / math.factorial(order + 1)
    eps = float(model.per_step_eps)
    if model.mode is BoundMode.RANDOM_WALK:
        eps_term = math.sqrt(n) * eps
    else:
        eps_term = n * eps
    return k_const * (eps_term + n * float(dt) * c_bound)


# ---------------------------------------------------------------------------
# Spectral diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SpectralInfo:
    det: Fraction
    eigenvalue_moduli: tuple[Fraction, Fraction]


def spectral_analysis(m: UpdateMatrix) -> SpectralInfo:
    """Exact determinant and wide-precision eigenvalue moduli of a one-step
    matrix.  A complex pair has both moduli equal to sqrt(det)."""
    det = m.det()
    tr = m.trace()
    disc = tr * tr - 4 * det
    if disc < 0:
        mod = _wide.wide_sqrt(det)
        return SpectralInfo(det, (mod, mod))
    root = _wide.wide_sqrt(disc)
    lam1 = (tr + root) / 2
    lam2 = (tr - root) / 2
    return SpectralInfo(det, (abs(lam1), abs(lam2)))


# ---------------------------------------------------------------------------
# Relative-convergence measures over experiment output
# ---------------------------------------------------------------------------


def effective_computation_time(series: Sequence[tuple], threshold) -> Optional[Fraction]:
    """Earliest t at which the error reaches the admissible bound; None if
    it never does.  ``series`` is (t, error_norm) pairs with strictly
    increasing t."""
    threshold = _as_fraction(threshold)
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if len(series) == 0:
        raise ValueError("empty series")
    pairs = [(_as_fraction(t), _as_fraction(err)) for t, err in series]
    if any(t1 >= t2 for (t1, _), (t2, _) in zip(pairs, pairs[1:])):
        raise ValueError("series times must be strictly increasing")
    for t, err in pairs:
        if err >= threshold:
            return t
    return None


def optimal_step_size(sweep: Sequence):
    """The sweep record with minimal total error norm; ties go to the larger
    (cheaper) dt.  Records whose error is missing (guard-tripped legs) are
    ignored."""
    candidates = [r for r in sweep if getattr(r, "e_total", None) is not None]
    if not candidates:
        raise ValueError("sweep contains no completed records")
    return min(candidates, key=lambda r: (r.e_total, -r.dt))


def conservation_drift(
    trajectory: Trajectory, params: OscillatorParams
) -> list[tuple[Fraction, Fraction]]:
    """|invariant - invariant at (1, 0)| at each sample, computed exactly.
    The baseline is b: every integration starts at (1, 0)."""
    baseline = params.b
    return [
        (state.t, abs(invariant_value(params, state) - baseline))
        for _, state in trajectory.samples
    ]
