"""Time integrators with per-operation rounding control.

Three one-step schemes for the oscillator, each available in exact rational
arithmetic (``cfg=None``) or with every elementary operation rounded at an
emulated precision:

* forward Euler, first order:
      x' = x + dt*(-a*y),  y' = y + dt*(b*x)
* the implicit midpoint rule in its solved closed form, second order and
  exactly conservative in exact arithmetic: with k = (a*dt/2)*(b*dt/2),
      x' = (x*(1-k) - a*dt*y) / (1+k),
      y' = (y*(1-k) + b*dt*x) / (1+k)
* Kutta's explicit third-order rule (stages at 0, 1/2, 1 with weights
  1/6, 2/3, 1/6); not conservative, included for the order sweep.

Rounded-mode operation order is fixed (see the step functions) so runs are
bit-reproducible: constants such as a*dt and 1+-k are rounded once per run,
which is bit-identical to recomputing them each step because rounding is
deterministic.  The requested step size is itself rounded to the run
precision before integrating -- decimal step sizes are not binary
representable -- while bookkeeping times stay at the exact requested
step_index * dt, so trajectories at different precisions share a time grid
and the step-size representation error is accounted to the round-off
channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

from .fpcore import (
    PrecisionConfig,
    _add_raw,
    _div_raw,
    _fraction_to_raw,
    _mul_raw,
    _raw_to_fraction,
    _sub_raw,
)
from .oscillator import OscillatorParams, State, _as_fraction

DEFAULT_MAX_STEPS = 50_000_000


class StepLimitError(RuntimeError):
    """Requested step count exceeds the configured guard."""

    def __init__(self, requested: int, limit: int):
        super().__init__(f"integration would take {requested} steps, limit is {limit}")
        self.requested = requested
        self.limit = limit


class Scheme(Enum):
    """Integrator selector; ``order`` is the theoretical truncation order."""

    FORWARD_EULER = "euler"
    MIDPOINT_IMPLICIT = "midpoint"
    RK3 = "rk3"

    @property
    def order(self) -> int:
        return _ORDERS[self]

    @classmethod
    def from_name(cls, name: str) -> "Scheme":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {name!r} (expected one of: {valid})") from None


_ORDERS = {Scheme.FORWARD_EULER: 1, Scheme.MIDPOINT_IMPLICIT: 2, Scheme.RK3: 3}


@dataclass(frozen=True, slots=True)
class SamplingPlan:
    """Which step indices of a trajectory to record.

    Either a stride (every ``stride``-th step, starting at 0) or an explicit
    index set.  The final step is always recorded.
    """

    stride: Optional[int] = None
    at_steps: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if (self.stride is None) == (self.at_steps is None):
            raise ValueError("specify exactly one of stride or at_steps")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.at_steps is not None:
            object.__setattr__(self, "at_steps", tuple(sorted(set(self.at_steps))))

    @classmethod
    def every(cls, k: int = 1) -> "SamplingPlan":
        return cls(stride=k)

    @classmethod
    def final_only(cls) -> "SamplingPlan":
        return cls(at_steps=())

    @classmethod
    def at(cls, steps) -> "SamplingPlan":
        return cls(at_steps=tuple(int(s) for s in steps))

    def resolve(self, n_steps: int) -> tuple[int, ...]:
        if self.stride is not None:
            idx = set(range(0, n_steps + 1, self.stride))
        else:
            idx = {s for s in self.at_steps if 0 <= s <= n_steps}
        idx.add(n_steps)
        return tuple(sorted(idx))


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Recorded integration output.  ``dt`` is the exact requested step size;
    sample times are step_index * dt.  ``precision`` is None for exact
    arithmetic runs."""

    params: OscillatorParams
    scheme: Scheme
    dt: Fraction
    precision: Optional[PrecisionConfig]
    n_steps: int
    samples: tuple[tuple[int, State], ...]

    @property
    def machine_dt(self) -> Fraction:
        """The step size actually iterated with: dt rounded at the run
        precision (dt itself for exact runs)."""
        if self.precision is None:
            return self.dt
        m, e = _fraction_to_raw(self.dt, self.precision.significand_bits)
        return _raw_to_fraction(m, e)

    @property
    def final_state(self) -> State:
        return self.samples[-1][1]


# ---------------------------------------------------------------------------
# Rounded-mode step kernels.  States are (mx, ex, my, ey) integer quadruples;
# constants are precomputed per run by _consts().
# ---------------------------------------------------------------------------


def _euler_step(st, c, p):
    mx, ex, my, ey = st
    nam, nae, bm, be, dm, de = c
    t1m, t1e = _mul_raw(nam, nae, my, ey, p)  # (-a) (x) y
    t2m, t2e = _mul_raw(dm, de, t1m, t1e, p)  # dt (x) .
    nxm, nxe = _add_raw(mx, ex, t2m, t2e, p)  # x (+) .
    u1m, u1e = _mul_raw(bm, be, mx, ex, p)
    u2m, u2e = _mul_raw(dm, de, u1m, u1e, p)
    nym, nye = _add_raw(my, ey, u2m, u2e, p)
    return nxm, nxe, nym, nye


def _midpoint_step(st, c, p):
    mx, ex, my, ey = st
    omm, ome, opm, ope, am, ae, bm, be = c
    u1m, u1e = _mul_raw(mx, ex, omm, ome, p)  # x (x) (1-k)
    u2m, u2e = _mul_raw(am, ae, my, ey, p)  # a*dt (x) y
    nxm, nxe = _sub_raw(u1m, u1e, u2m, u2e, p)
    v1m, v1e = _mul_raw(my, ey, omm, ome, p)  # y (x) (1-k)
    v2m, v2e = _mul_raw(bm, be, mx, ex, p)  # b*dt (x) x
    nym, nye = _add_raw(v1m, v1e, v2m, v2e, p)
    qxm, qxe = _div_raw(nxm, nxe, opm, ope, p)  # (/) (1+k)
    qym, qye = _div_raw(nym, nye, opm, ope, p)
    return qxm, qxe, qym, qye


def _rk3_step(st, c, p):
    mx, ex, my, ey = st
    nam, nae, bm, be, dm, de, hm, he, d2m, d2e, d6m, d6e = c
    k1x = _mul_raw(nam, nae, my, ey, p)
    k1y = _mul_raw(bm, be, mx, ex, p)
    t = _mul_raw(hm, he, *k1x, p)
    x2 = _add_raw(mx, ex, *t, p)
    t = _mul_raw(hm, he, *k1y, p)
    y2 = _add_raw(my, ey, *t, p)
    k2x = _mul_raw(nam, nae, *y2, p)
    k2y = _mul_raw(bm, be, *x2, p)
    t = _mul_raw(dm, de, *k1x, p)
    x3 = _sub_raw(mx, ex, *t, p)
    t = _mul_raw(d2m, d2e, *k2x, p)
    x3 = _add_raw(*x3, *t, p)
    t = _mul_raw(dm, de, *k1y, p)
    y3 = _sub_raw(my, ey, *t, p)
    t = _mul_raw(d2m, d2e, *k2y, p)
    y3 = _add_raw(*y3, *t, p)
    k3x = _mul_raw(nam, nae, *y3, p)
    k3y = _mul_raw(bm, be, *x3, p)
    # x + dt/6 * ((k1 + 4 k2) + k3); 4*k2 is an exact scaling
    s = _add_raw(*k1x, k2x[0] << 2, k2x[1], p)
    s = _add_raw(*s, *k3x, p)
    t = _mul_raw(d6m, d6e, *s, p)
    nx = _add_raw(mx, ex, *t, p)
    s = _add_raw(*k1y, k2y[0] << 2, k2y[1], p)
    s = _add_raw(*s, *k3y, p)
    t = _mul_raw(d6m, d6e, *s, p)
    ny = _add_raw(my, ey, *t, p)
    return (*nx, *ny)


_STEP_FN = {
    Scheme.FORWARD_EULER: _euler_step,
    Scheme.MIDPOINT_IMPLICIT: _midpoint_step,
    Scheme.RK3: _rk3_step,
}


def _consts(scheme: Scheme, params: OscillatorParams, dt: Fraction, p: int):
    """Per-run rounded constants, flattened to raw pairs."""
    am, ae = _fraction_to_raw(params.a, p)
    bm, be = _fraction_to_raw(params.b, p)
    dm, de = _fraction_to_raw(dt, p)
    if scheme is Scheme.FORWARD_EULER:
        return (-am, ae, bm, be, dm, de)
    if scheme is Scheme.MIDPOINT_IMPLICIT:
        adm, ade = _mul_raw(am, ae, dm, de, p)  # a (x) dt
        bdm, bde = _mul_raw(bm, be, dm, de, p)  # b (x) dt
        km, ke = _mul_raw(adm, ade - 1, bdm, bde - 1, p)  # halvings are exact
        omm, ome = _sub_raw(1, 0, km, ke, p)  # 1 (-) k
        opm, ope = _add_raw(1, 0, km, ke, p)  # 1 (+) k
        return (omm, ome, opm, ope, adm, ade, bdm, bde)
    if scheme is Scheme.RK3:
        d6m, d6e = _div_raw(dm, de, 6, 0, p)  # dt (/) 6, rounded
        return (-am, ae, bm, be, dm, de, dm, de - 1, dm, de + 1, d6m, d6e)
    raise ValueError(f"unsupported scheme {scheme}")


# ---------------------------------------------------------------------------
# Exact-arithmetic steps (same operation order; order is immaterial without
# rounding, but keeping it aligned makes the rounded kernels testable
# against these).
# ---------------------------------------------------------------------------


def _euler_exact(x: Fraction, y: Fraction, params, dt: Fraction):
    return x + dt * (-params.a * y), y + dt * (params.b * x)


def _midpoint_exact(x: Fraction, y: Fraction, params, dt: Fraction):
    k = (params.a * dt / 2) * (params.b * dt / 2)
    return (x * (1 - k) - params.a * dt * y) / (1 + k), (y * (1 - k) + params.b * dt * x) / (1 + k)


def _rk3_exact(x: Fraction, y: Fraction, params, dt: Fraction):
    a, b = params.a, params.b
    k1x, k1y = -a * y, b * x
    x2, y2 = x + dt / 2 * k1x, y + dt / 2 * k1y
    k2x, k2y = -a * y2, b * x2
    x3, y3 = x - dt * k1x + 2 * dt * k2x, y - dt * k1y + 2 * dt * k2y
    k3x, k3y = -a * y3, b * x3
    return x + dt / 6 * (k1x + 4 * k2x + k3x), y + dt / 6 * (k1y + 4 * k2y + k3y)


_EXACT_FN = {
    Scheme.FORWARD_EULER: _euler_exact,
    Scheme.MIDPOINT_IMPLICIT: _midpoint_exact,
    Scheme.RK3: _rk3_exact,
}


# ---------------------------------------------------------------------------
# Public single-step operations
# ---------------------------------------------------------------------------


def _single_step(scheme: Scheme, s: State, dt, params: OscillatorParams, cfg):
    dt = _as_fraction(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if cfg is None:
        x, y = _EXACT_FN[scheme](s.x, s.y, params, dt)
        return State(x, y, s.t + dt)
    p = cfg.significand_bits
    st = (*_fraction_to_raw(s.x, p), *_fraction_to_raw(s.y, p))
    mx, ex, my, ey = _STEP_FN[scheme](st, _consts(scheme, params, dt, p), p)
    return State(_raw_to_fraction(mx, ex), _raw_to_fraction(my, ey), s.t + dt)


def step_forward_euler(s: State, dt, params: OscillatorParams, cfg: Optional[PrecisionConfig] = None) -> State:
    """One forward Euler step; cfg=None for exact arithmetic."""
    return _single_step(Scheme.FORWARD_EULER, s, dt, params, cfg)


def step_midpoint(s: State, dt, params: OscillatorParams, cfg: Optional[PrecisionConfig] = None) -> State:
    """One implicit-midpoint step via the solved closed form."""
    return _single_step(Scheme.MIDPOINT_IMPLICIT, s, dt, params, cfg)


def step_rk3(s: State, dt, params: OscillatorParams, cfg: Optional[PrecisionConfig] = None) -> State:
    """One step of Kutta's third-order rule."""
    return _single_step(Scheme.RK3, s, dt, params, cfg)


# ---------------------------------------------------------------------------
# One-step update matrix and integration drivers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class UpdateMatrix:
    """Exact 2x2 one-step matrix A with (x', y') = A (x, y)."""

    entries: tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]

    def det(self) -> Fraction:
        (p, q), (r, s) = self.entries
        return p * s - q * r

    def trace(self) -> Fraction:
        return self.entries[0][0] + self.entries[1][1]

    def apply(self, x, y) -> tuple[Fraction, Fraction]:
        (p, q), (r, s) = self.entries
        x, y = _as_fraction(x), _as_fraction(y)
        return p * x + q * y, r * x + s * y


def update_matrix(scheme: Scheme, params: OscillatorParams, dt) -> UpdateMatrix:
    """The exact one-step matrix of the scheme at step size dt (dt=0 gives
    the identity for every scheme)."""
    dt = _as_fraction(dt)
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    a, b = params.a, params.b
    if scheme is Scheme.FORWARD_EULER:
        return UpdateMatrix(((Fraction(1), -a * dt), (b * dt, Fraction(1))))
    if scheme is Scheme.MIDPOINT_IMPLICIT:
        k = (a * dt / 2) * (b * dt / 2)
        d = 1 + k
        return UpdateMatrix((((1 - k) / d, -a * dt / d), (b * dt / d, (1 - k) / d)))
    if scheme is Scheme.RK3:
        # explicit 3-stage third order on a linear system is the cubic
        # Taylor polynomial of exp(dt*J); J**2 = -a*b*dt**2 * I collapses it
        w = a * b * dt * dt
        diag = 1 - w / 2
        off = 1 - w / 6
        return UpdateMatrix(((diag, -a * dt * off), (b * dt * off, diag)))
    raise ValueError(f"unsupported scheme {scheme}")


def num_steps(t_end, dt) -> int:
    """Nearest integer to t_end/dt (the experiments use commensurate pairs)."""
    return round(_as_fraction(t_end) / _as_fraction(dt))


def _check_steps(t_end: Fraction, dt: Fraction, max_steps: int) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    n = num_steps(t_end, dt)
    if n < 1:
        raise ValueError(f"t_end/dt = {float(t_end / dt):g} rounds to zero steps")
    if n > max_steps:
        raise StepLimitError(n, max_steps)
    return n


def integrate(
    scheme: Scheme,
    params: OscillatorParams,
    dt,
    t_end,
    cfg: Optional[PrecisionConfig] = None,
    sampling: SamplingPlan = SamplingPlan.final_only(),
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Trajectory:
    """Integrate from (1, 0) for round(t_end/dt) steps.

    Runs are deterministic: identical arguments give bit-identical
    trajectories.  Raises StepLimitError beyond max_steps.
    """
    dt = _as_fraction(dt)
    t_end = _as_fraction(t_end)
    n = _check_steps(t_end, dt, max_steps)
    wanted = sampling.resolve(n)
    samples = []
    if cfg is None:
        x, y = Fraction(1), Fraction(0)
        exact_fn = _EXACT_FN[scheme]
        pos = 0
        if wanted[0] == 0:
            samples.append((0, State(x, y, Fraction(0))))
            pos = 1
        for i in range(1, n + 1):
            x, y = exact_fn(x, y, params, dt)
            if pos < len(wanted) and wanted[pos] == i:
                samples.append((i, State(x, y, i * dt)))
                pos += 1
    else:
        p = cfg.significand_bits
        consts = _consts(scheme, params, dt, p)
        step_fn = _STEP_FN[scheme]
        st = (1, 0, 0, 0)
        pos = 0
        if wanted[0] == 0:
            samples.append((0, State(Fraction(1), Fraction(0), Fraction(0))))
            pos = 1
        for i in range(1, n + 1):
            st = step_fn(st, consts, p)
            if pos < len(wanted) and wanted[pos] == i:
                samples.append(
                    (i, State(_raw_to_fraction(st[0], st[1]), _raw_to_fraction(st[2], st[3]), i * dt))
                )
                pos += 1
    return Trajectory(params, scheme, dt, cfg, n, tuple(samples))


def integrate_pair(
    scheme: Scheme,
    params: OscillatorParams,
    dt,
    t_end,
    cfg_run: PrecisionConfig,
    cfg_ref: PrecisionConfig,
    sampling: SamplingPlan = SamplingPlan.final_only(),
    max_steps: int = DEFAULT_MAX_STEPS,
) -> tuple[Trajectory, Trajectory]:
    """Integrate the same scheme at two precisions in one step loop.

    The two channels never share rounded values; each rounds dt and the
    scheme constants at its own precision.  Results are bit-identical to two
    separate integrate() calls.
    """
    dt = _as_fraction(dt)
    t_end = _as_fraction(t_end)
    n = _check_steps(t_end, dt, max_steps)
    p1, p2 = cfg_run.significand_bits, cfg_ref.significand_bits
    c1 = _consts(scheme, params, dt, p1)
    c2 = _consts(scheme, params, dt, p2)
    step_fn = _STEP_FN[scheme]
    s1 = (1, 0, 0, 0)
    s2 = (1, 0, 0, 0)
    wanted = sampling.resolve(n)
    out1, out2 = [], []

    def record(i, st, out):
        out.append((i, State(_raw_to_fraction(st[0], st[1]), _raw_to_fraction(st[2], st[3]), i * dt)))

    pos = 0
    if wanted[0] == 0:
        record(0, s1, out1)
        record(0, s2, out2)
        pos = 1
    for i in range(1, n + 1):
        s1 = step_fn(s1, c1, p1)
        s2 = step_fn(s2, c2, p2)
        if pos < len(wanted) and wanted[pos] == i:
            record(i, s1, out1)
            record(i, s2, out2)
            pos += 1
    return (
        Trajectory(params, scheme, dt, cfg_run, n, tuple(out1)),
        Trajectory(params, scheme, dt, cfg_ref, n, tuple(out2)),
    )
