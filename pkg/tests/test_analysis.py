import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roundtrap.analysis import (
    BoundMode,
    ErrorBoundModel,
    consistency_residual,
    conservation_drift,
    effective_computation_time,
    error_separation,
    optimal_step_size,
    predict_error_bound,
    spectral_analysis,
)
from roundtrap.experiments import SweepRecord, longtime_run
from roundtrap.fpcore import QUAD, SINGLE, PrecisionConfig, unit_roundoff
from roundtrap.oscillator import OscillatorParams, State, analytic_solution
from roundtrap.schemes import SamplingPlan, Scheme, UpdateMatrix, integrate, update_matrix
from conftest import decimal_sqrt, rel_diff

PARAMS = OscillatorParams()

frac = st.fractions(max_denominator=10**6)


def mkstate(x, y, t=0):
    return State(x, y, t)


class TestErrorSeparation:
    def test_all_equal(self):
        s = mkstate(Fraction(1, 3), Fraction(2, 7), 1)
        triple = error_separation(s, s, s)
        for vec in (triple.total, triple.truncation, triple.roundoff):
            assert (vec.x, vec.y, vec.norm) == (0, 0, 0)

    def test_actual_equals_reference(self):
        actual = mkstate(Fraction(11, 10), 0, 1)
        analytic = mkstate(1, 0, 1)
        triple = error_separation(actual, actual, analytic)
        assert triple.roundoff.norm == 0
        assert triple.total == triple.truncation

    def test_worked_example(self):
        # X_r=1.2, X_t=1.1, X=1.0 with zero y components
        triple = error_separation(mkstate("1.2", 0, 2), mkstate("1.1", 0, 2), mkstate(1, 0, 2))
        assert triple.total.x == Fraction(1, 5)
        assert triple.truncation.x == Fraction(1, 10)
        assert triple.roundoff.x == Fraction(1, 10)
        assert triple.total.norm == Fraction(1, 5)
        assert triple.truncation.norm == Fraction(1, 10)
        assert triple.roundoff.norm == Fraction(1, 10)

    def test_time_mismatch_rejected(self):
        with pytest.raises(ValueError):
            error_separation(mkstate(1, 0, 1), mkstate(1, 0, 2), mkstate(1, 0, 1))

    @given(xr=frac, yr=frac, xt=frac, yt=frac, xa=frac, ya=frac)
    @settings(max_examples=200)
    def test_componentwise_additivity_exact(self, xr, yr, xt, yt, xa, ya):
        triple = error_separation(mkstate(xr, yr), mkstate(xt, yt), mkstate(xa, ya))
        assert triple.total.x == triple.roundoff.x + triple.truncation.x
        assert triple.total.y == triple.roundoff.y + triple.truncation.y

    @given(x=frac, y=frac)
    def test_norm_zero_iff_components_zero(self, x, y):
        triple = error_separation(mkstate(x, y), mkstate(0, 0), mkstate(0, 0))
        assert (triple.total.norm == 0) == (x == 0 and y == 0)

    def test_norm_against_decimal_oracle(self, rng):
        for _ in range(50):
            x = Fraction(rng.getrandbits(40), rng.getrandbits(40) + 1)
            y = Fraction(rng.getrandbits(40), rng.getrandbits(40) + 1)
            triple = error_separation(mkstate(x, y), mkstate(0, 0), mkstate(0, 0))
            want = decimal_sqrt(x * x + y * y)
            assert rel_diff(triple.total.norm, want) < Fraction(1, 10**40)


class TestConsistencyResidual:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_exact_trajectory_residual_is_zero(self, scheme):
        traj = integrate(scheme, PARAMS, Fraction(1, 10), 2, None, SamplingPlan.every(1))
        for _, r in consistency_residual(traj, PARAMS):
            assert r == 0

    def test_rounded_euler_residual_bounded(self):
        # one rounded step injects at most a few ulps: residual <= C*u/dt
        dt = Fraction(1, 100)
        traj = integrate(Scheme.FORWARD_EULER, PARAMS, dt, 1, SINGLE, SamplingPlan.every(1))
        res = consistency_residual(traj, PARAMS)
        bound = 8 * unit_roundoff(SINGLE) / traj.machine_dt
        assert all(r <= bound for _, r in res)
        assert any(r > 0 for _, r in res)

    def test_residual_grows_as_dt_shrinks(self):
        def median_residual(dt, t_end):
            traj = integrate(Scheme.FORWARD_EULER, PARAMS, dt, t_end, SINGLE, SamplingPlan.every(1))
            norms = sorted(r for _, r in consistency_residual(traj, PARAMS))
            return norms[len(norms) // 2]

        coarse = median_residual(Fraction(1, 100), 1)
        fine = median_residual(Fraction(1, 10000), Fraction(1, 100))
        assert fine > 10 * coarse

    def test_residual_shrinks_with_precision(self):
        def median_residual(cfg):
            traj = integrate(Scheme.FORWARD_EULER, PARAMS, Fraction(1, 100), 1, cfg, SamplingPlan.every(1))
            norms = sorted(r for _, r in consistency_residual(traj, PARAMS))
            return norms[len(norms) // 2]

        assert median_residual(PrecisionConfig(53)) < median_residual(SINGLE) / 1000

    def test_requires_consecutive_samples(self):
        traj = integrate(Scheme.FORWARD_EULER, PARAMS, Fraction(1, 10), 1, SINGLE, SamplingPlan.every(2))
        with pytest.raises(ValueError):
            consistency_residual(traj, PARAMS)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_rounded_trajectory_nonzero_residual(self, scheme):
        traj = integrate(scheme, PARAMS, Fraction(1, 10), 1, SINGLE, SamplingPlan.every(1))
        assert max(r for _, r in consistency_residual(traj, PARAMS)) > 0


class TestErrorBound:
    def test_eps_validation(self):
        with pytest.raises(ValueError):
            ErrorBoundModel(BoundMode.WORST_CASE, 0)

    def test_default_eps_scale(self):
        model = ErrorBoundModel.for_precision(SINGLE, PARAMS)
        # orbit max norm is sqrt(b/a) = sqrt 2 for the default params
        scale = model.per_step_eps / unit_roundoff(SINGLE)
        assert abs(float(scale) - math.sqrt(2)) < 1e-9

    def test_classical_limit_vanishes_with_dt(self):
        # negligible eps leaves the discretization term, -> 0 as dt -> 0
        model = ErrorBoundModel(BoundMode.WORST_CASE, Fraction(1, 10**60))
        t_end = 10
        bounds = [
            predict_error_bound(PARAMS, Scheme.MIDPOINT_IMPLICIT, Fraction(1, d), 10 * d, model)
            for d in (10, 100, 1000, 10000)
        ]
        assert all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
        assert bounds[-1] < 1e-7

    def test_roundoff_term_diverges_as_dt_shrinks(self):
        # with dominating eps the bound grows like n = T/dt
        model = ErrorBoundModel(BoundMode.WORST_CASE, unit_roundoff(SINGLE))
        bounds = [
            predict_error_bound(PARAMS, Scheme.MIDPOINT_IMPLICIT, Fraction(1, d), 10 * d, model)
            for d in (10**3, 10**4, 10**5)
        ]
        assert bounds[1] > 5 * bounds[0]
        assert bounds[2] > 5 * bounds[1]

    def test_random_walk_scales_sqrt_n(self):
        eps = Fraction(1, 2**24)
        w = predict_error_bound(PARAMS, Scheme.FORWARD_EULER, Fraction(1, 10**6), 10**6,
                                ErrorBoundModel(BoundMode.WORST_CASE, eps))
        r = predict_error_bound(PARAMS, Scheme.FORWARD_EULER, Fraction(1, 10**6), 10**6,
                                ErrorBoundModel(BoundMode.RANDOM_WALK, eps))
        # the shared truncation term shifts the ratio slightly off sqrt(n)
        assert w / r == pytest.approx(math.sqrt(10**6), rel=1e-2)

    @given(
        n1=st.integers(1, 10**6), n2=st.integers(1, 10**6),
        e1=st.integers(1, 10**9), e2=st.integers(1, 10**9),
        mode=st.sampled_from(list(BoundMode)),
    )
    @settings(max_examples=100)
    def test_monotone_in_n_and_eps(self, n1, n2, e1, e2, mode):
        if n1 > n2:
            n1, n2 = n2, n1
        if e1 > e2:
            e1, e2 = e2, e1
        dt = Fraction(1, 1000)
        m1 = ErrorBoundModel(mode, Fraction(e1, 10**40))
        m2 = ErrorBoundModel(mode, Fraction(e2, 10**40))
        assert predict_error_bound(PARAMS, Scheme.RK3, dt, n1, m1) <= predict_error_bound(
            PARAMS, Scheme.RK3, dt, n2, m1
        )
        assert predict_error_bound(PARAMS, Scheme.RK3, dt, n1, m1) <= predict_error_bound(
            PARAMS, Scheme.RK3, dt, n1, m2
        )

    def test_n_validation(self):
        with pytest.raises(ValueError):
            predict_error_bound(PARAMS, Scheme.RK3, Fraction(1, 10), 0,
                                ErrorBoundModel(BoundMode.WORST_CASE, Fraction(1, 2**24)))

    def test_random_walk_within_100x_of_measured(self):
        # order-of-magnitude sanity against a short matching run
        dt = Fraction(1, 100)
        t_end = 100
        recs = longtime_run(Scheme.MIDPOINT_IMPLICIT, PARAMS, dt, t_end, SINGLE, QUAD, 4)
        measured = recs[-1].e_round
        model = ErrorBoundModel.for_precision(SINGLE, PARAMS, BoundMode.RANDOM_WALK)
        bound = predict_error_bound(PARAMS, Scheme.MIDPOINT_IMPLICIT, dt, 10**4, model)
        assert Fraction(1, 100) <= Fraction(bound) / measured <= 100


class TestSpectralAnalysis:
    def test_identity(self):
        info = spectral_analysis(UpdateMatrix(((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))))
        assert info.det == 1
        assert info.eigenvalue_moduli == (1, 1)

    @pytest.mark.parametrize("exp", range(1, 8))
    def test_midpoint_unit_modulus(self, exp):
        dt = Fraction(1, 10**exp)
        info = spectral_analysis(update_matrix(Scheme.MIDPOINT_IMPLICIT, PARAMS, dt))
        assert info.det == 1
        tol = Fraction(1, 10**12)
        assert abs(info.eigenvalue_moduli[0] - 1) <= tol
        assert abs(info.eigenvalue_moduli[1] - 1) <= tol

    def test_euler_spectrum(self):
        dt = Fraction(1, 10)
        info = spectral_analysis(update_matrix(Scheme.FORWARD_EULER, PARAMS, dt))
        assert info.det == 1 + PARAMS.a * PARAMS.b * dt * dt
        # complex pair: both moduli are sqrt(det) > 1
        assert info.eigenvalue_moduli[0] == info.eigenvalue_moduli[1]
        assert info.eigenvalue_moduli[0] > 1

    def test_real_eigenvalues(self):
        info = spectral_analysis(UpdateMatrix(((Fraction(3), Fraction(0)), (Fraction(0), Fraction(-2)))))
        assert info.det == -6
        assert info.eigenvalue_moduli == (3, 2)


class TestEffectiveComputationTime:
    def test_worked_example(self):
        assert effective_computation_time([(1, "0.1"), (2, "0.5"), (3, "2.0")], 1) == 3

    def test_threshold_below_first(self):
        assert effective_computation_time([(1, "0.1"), (2, "0.5")], "0.01") == 1

    def test_never_reached(self):
        assert effective_computation_time([(1, "0.1"), (2, "0.5")], 10) is None

    def test_empty_series(self):
        with pytest.raises(ValueError):
            effective_computation_time([], 1)

    def test_nonincreasing_times_rejected(self):
        with pytest.raises(ValueError):
            effective_computation_time([(1, 1), (1, 2)], 1)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            effective_computation_time([(1, 1)], 0)

    def test_monotone_in_threshold(self, rng):
        series = []
        t, v = Fraction(0), Fraction(0)
        for _ in range(50):
            t += Fraction(rng.randint(1, 9), 7)
            v += Fraction(rng.randint(0, 99), 101)
            series.append((t, v))
        results = [effective_computation_time(series, th) for th in (Fraction(1), Fraction(5), Fraction(12))]
        cleaned = [r if r is not None else Fraction(10**9) for r in results]
        assert cleaned == sorted(cleaned)


def _rec(dt, e):
    return SweepRecord(Fraction(dt), 0, None if e is None else Fraction(e), None, None, 0.0,
                       status="skipped_guard" if e is None else "ok")


class TestOptimalStepSize:
    def test_single_record(self):
        r = _rec("1e-2", "3")
        assert optimal_step_size([r]) is r

    def test_argmin(self):
        recs = [_rec("1e-2", 3), _rec("1e-3", 1), _rec("1e-4", 2)]
        assert optimal_step_size(recs).dt == Fraction("1e-3")

    def test_tie_breaks_to_larger_dt(self):
        recs = [_rec("1e-3", 1), _rec("1e-4", 1)]
        assert optimal_step_size(recs).dt == Fraction("1e-3")

    def test_permutation_invariant(self, rng):
        recs = [_rec(Fraction(1, 10**k), Fraction(rng.randint(1, 50), 7)) for k in range(1, 8)]
        want = optimal_step_size(recs)
        for _ in range(10):
            rng.shuffle(recs)
            assert optimal_step_size(recs) == want

    def test_skipped_records_ignored(self):
        recs = [_rec("1e-2", None), _rec("1e-3", 5)]
        assert optimal_step_size(recs).dt == Fraction("1e-3")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            optimal_step_size([])
        with pytest.raises(ValueError):
            optimal_step_size([_rec("1e-2", None)])


class TestConservationDrift:
    def test_exact_midpoint_zero_drift(self):
        traj = integrate(Scheme.MIDPOINT_IMPLICIT, PARAMS, Fraction(1, 10), 3, None, SamplingPlan.every(5))
        assert all(d == 0 for _, d in conservation_drift(traj, PARAMS))

    def test_euler_exact_drift_formula(self):
        dt = Fraction(1, 10)
        n = 30
        traj = integrate(Scheme.FORWARD_EULER, PARAMS, dt, n * dt, None, SamplingPlan.every(1))
        drift = conservation_drift(traj, PARAMS)
        growth = 1 + PARAMS.a * PARAMS.b * dt * dt
        for (t, d), k in zip(drift, range(n + 1)):
            assert d == PARAMS.b * (growth**k - 1)

    def test_rounded_midpoint_drift_small(self):
        n = 1000
        dt = Fraction(1, 100)
        traj = integrate(Scheme.MIDPOINT_IMPLICIT, PARAMS, dt, n * dt, QUAD, SamplingPlan.every(100))
        bound = 10 * n * Fraction(1, 2**113) * PARAMS.b
        assert all(d <= bound for _, d in conservation_drift(traj, PARAMS))

    def test_single_precision_drift_linear_in_steps(self):
        # drift <= C * n * u * b with a small constant (measured C ~ 1.6)
        n = 1000
        dt = Fraction(1, 100)
        traj = integrate(Scheme.MIDPOINT_IMPLICIT, PARAMS, dt, n * dt, SINGLE, SamplingPlan.every(100))
        bound = 10 * n * Fraction(1, 2**24) * PARAMS.b
        assert all(d <= bound for _, d in conservation_drift(traj, PARAMS))
        assert conservation_drift(traj, PARAMS)[-1][1] > 0
