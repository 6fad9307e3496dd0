import dataclasses
import math

import numpy as np
import pytest

from hessnse.fields import VectorField, hessian_entry, generate_test_field, make_grid, relabel_axes
from hessnse.monitor import (
    CriterionConfig,
    MissingDiagnostics,
    evaluate_criterion,
    gronwall_diagnostics,
    hessian_series,
    serrin_baseline,
    smallness_window,
    summary_text,
)
from hessnse.norms import INF, hessian_key, hessian_pair_norms, lebesgue_norm
from hessnse.solver import Trajectory, TrajectorySample, integrate, l2_diagnostics

import oracles

PERMUTATIONS = [(1, 2, 3), (2, 3, 1), (3, 1, 2), (2, 1, 3), (1, 3, 2), (3, 2, 1)]


def strip_cache(traj):
    """Copy of ``traj`` whose samples keep only L^2 diagnostics and snapshots."""
    samples = []
    for s in traj.samples:
        diag = {k: v for k, v in s.diagnostics.items() if not k.startswith(("hess", "u_l"))
                or k == "u_l2"}
        samples.append(dataclasses.replace(s, diagnostics=diag, has_snapshot_diagnostics=False))
    return dataclasses.replace(traj, samples=samples)


def relabeled_trajectory(traj, perm):
    samples = []
    for s in traj.snapshot_samples():
        v = relabel_axes(s.snapshot, perm)
        diag = l2_diagnostics(v.spectral, v.grid)
        samples.append(TrajectorySample(s.t, s.step, diag, snapshot=v))
    return dataclasses.replace(traj, samples=samples)


def scaled_gradient_reference(u):
    """L^2 norm of a generic Hessian entry, for rounding-level comparisons."""
    return lebesgue_norm(hessian_entry(u, 1, 1, 2), 2)


class TestConfig:
    def test_defaults(self):
        cfg = CriterionConfig()
        assert cfg.triple == (1, 2, 3) and cfg.betas == (2.0,)

    @pytest.mark.parametrize("kwargs", [{"betas": (1.0,)}, {"triple": (1, 1, 2)},
                                        {"epsilon": 0.0}, {"serrin_betas": (2.0,)}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            CriterionConfig(**kwargs)


class TestSelectivity:
    def test_taylor_green_zero(self, tg_trajectory):
        report = evaluate_criterion(tg_trajectory, CriterionConfig(betas=(2.0, 4 / 3, INF)))
        for res in report.per_beta.values():
            assert res.integral == 0.0 and res.mixed_norm == 0.0
            assert res.component_integrals == (0.0, 0.0)
            assert all(v == 0.0 for v in res.series)
        assert np.all(tg_trajectory.series("grad_l2") > 1.0)

    def test_abc_initial_snapshot_zero(self, grid32):
        u = generate_test_field("abc_flow", 0, grid32)
        assert hessian_pair_norms(u, [2.0, INF])[2.0] == (0.0, 0.0, 0.0)

    def test_abc_run_zero_to_rounding(self, abc_trajectory):
        report = evaluate_criterion(abc_trajectory, CriterionConfig(betas=(2.0, INF)))
        reference = scaled_gradient_reference(abc_trajectory.samples[-1].snapshot)
        assert report.per_beta[2.0].series[0] == 0.0
        for res in report.per_beta.values():
            assert max(res.series) <= 1e-13 * reference
        assert np.all(abc_trajectory.series("grad_l2") > 1.0)

    def test_other_triples_see_the_flow(self, tg_trajectory):
        report = evaluate_criterion(tg_trajectory, CriterionConfig(triple=(3, 2, 1)),
                                    recompute=True)
        assert report.per_beta[2.0].integral > 1.0


class TestRandomRun:
    def test_finite_and_recomputation_consistent(self, random_trajectory):
        cfg = CriterionConfig(betas=(2.0, INF))
        cached = evaluate_criterion(random_trajectory, cfg)
        fresh = evaluate_criterion(strip_cache(random_trajectory), cfg)
        forced = evaluate_criterion(random_trajectory, cfg, recompute=True)
        for beta in cfg.betas:
            a = cached.per_beta[beta]
            assert math.isfinite(a.integral) and a.integral > 0
            for other in (fresh, forced):
                b = other.per_beta[beta]
                assert b.integral == pytest.approx(a.integral, rel=1e-8)
                assert b.smallness == pytest.approx(a.smallness, rel=1e-8)
        assert fresh.serrin[INF] == pytest.approx(cached.serrin[INF], rel=1e-8)

    def test_mixed_norm_definition(self, random_trajectory):
        res = evaluate_criterion(random_trajectory, CriterionConfig()).per_beta[2.0]
        times, series = hessian_series(random_trajectory, 2.0)
        assert res.integral == pytest.approx(oracles.trapezoid_by_hand(times, series**2), rel=1e-13)
        assert res.mixed_norm == pytest.approx(math.sqrt(res.integral), rel=1e-15)

    def test_components_bounded_by_joint(self, random_trajectory):
        res = evaluate_criterion(random_trajectory, CriterionConfig()).per_beta[2.0]
        assert max(res.component_integrals) <= res.integral
        assert res.integral <= sum(res.component_integrals) * (1 + 1e-12)

    def test_missing_diagnostics(self, random_trajectory):
        bare = strip_cache(random_trajectory)
        # snapshot-less samples are not snapshot samples at all
        gone = dataclasses.replace(bare, samples=[dataclasses.replace(s, snapshot=None)
                                                  for s in bare.samples])
        with pytest.raises(MissingDiagnostics):
            evaluate_criterion(gone, CriterionConfig())
        flagged = dataclasses.replace(gone, samples=[
            dataclasses.replace(s, has_snapshot_diagnostics=True) for s in gone.samples])
        with pytest.raises(MissingDiagnostics):
            evaluate_criterion(flagged, CriterionConfig())


class TestPermutation:
    @pytest.mark.parametrize("perm", PERMUTATIONS)
    def test_snapshot_level(self, random32, perm):
        betas = [2.0, 3.0, INF]
        a = hessian_pair_norms(random32, betas, perm)
        b = hessian_pair_norms(relabel_axes(random32, perm), betas)
        for beta in betas:
            for x, y in zip(a[beta], b[beta]):
                assert y == pytest.approx(x, rel=1e-12)

    @pytest.mark.parametrize("perm", [(2, 3, 1), (3, 1, 2)])
    def test_trajectory_level(self, random_trajectory, perm):
        cfg = CriterionConfig(betas=(2.0, INF), triple=perm)
        direct = evaluate_criterion(random_trajectory, cfg)
        relabeled = evaluate_criterion(relabeled_trajectory(random_trajectory, perm),
                                       CriterionConfig(betas=(2.0, INF)), recompute=True)
        for beta in cfg.betas:
            assert relabeled.per_beta[beta].integral == pytest.approx(
                direct.per_beta[beta].integral, rel=1e-12)
            assert relabeled.per_beta[beta].smallness == pytest.approx(
                direct.per_beta[beta].smallness, rel=1e-12)


class TestSmallness:
    def test_empty_window(self, random_trajectory):
        out = smallness_window(random_trajectory, random_trajectory.end_time, 2.0, 1e-300)
        assert out["quantity"] == 0.0 and out["verdict"] is True

    def test_monotone_in_tau(self, random_trajectory):
        times = [s.t for s in random_trajectory.snapshot_samples()]
        taus = sorted(set(times) | set(np.linspace(0, 1, 37)))
        q = [smallness_window(random_trajectory, t, 2.0, 0.1)["quantity"] for t in taus]
        assert all(b <= a for a, b in zip(q, q[1:]))

    def test_taylor_green_closed_form(self, tg_trajectory):
        g0 = tg_trajectory.samples[0].diagnostics["grad_l2"] ** 2
        for tau in (0.0, 0.3, 0.75):
            out = smallness_window(tg_trajectory, tau, 2.0, 0.1)
            closed = g0 * (math.exp(-0.4 * tau) - math.exp(-0.4)) / 0.4
            # trapezoid error at snapshot spacing 0.01
            assert out["quantity"] == pytest.approx(closed, rel=2e-6)
            assert out["verdict"] is False

    @pytest.mark.parametrize("tau", [-0.1, 1.5])
    def test_tau_out_of_range(self, random_trajectory, tau):
        with pytest.raises(ValueError):
            smallness_window(random_trajectory, tau, 2.0, 0.1)


class TestSerrin:
    def test_taylor_green(self, tg_trajectory):
        closed = (1 - math.exp(-0.4)) / 0.4
        assert serrin_baseline(tg_trajectory, INF) == pytest.approx(closed, rel=2e-6)

    def test_zero_flow(self, grid16):
        traj = integrate(VectorField.zeros(grid16), 0.01, 0.3, keep_snapshots=True)
        assert serrin_baseline(traj, INF) == 0.0
        assert serrin_baseline(traj, 3.0) == 0.0

    def test_rejects_small_beta(self, tg_trajectory):
        with pytest.raises(ValueError):
            serrin_baseline(tg_trajectory, 2.0)

    def test_recompute(self, tg_trajectory):
        assert serrin_baseline(tg_trajectory, 4.0, recompute=True) == pytest.approx(
            serrin_baseline(tg_trajectory, 4.0), rel=1e-12)


class TestGronwall:
    def test_taylor_green(self, tg_trajectory):
        out = gronwall_diagnostics(tg_trajectory, 2.0)
        assert np.all(out["driver"] == 0.0)
        assert np.all(out["growth"] < 0) and np.all(out["lhs"] <= 0)
        assert np.all(out["ratio"] == 0.0)
        gh = [s.diagnostics["gradh_l2"] for s in tg_trajectory.snapshot_samples()]
        assert all(b < a for a, b in zip(gh, gh[1:]))

    def test_zero_flow(self, grid16):
        traj = integrate(VectorField.zeros(grid16), 0.01, 0.3, keep_snapshots=True)
        out = gronwall_diagnostics(traj, 2.0)
        for key in ("growth", "dissipation", "lhs", "driver", "ratio"):
            assert np.all(out[key] == 0.0)

    def test_random_bookkeeping(self, random_trajectory):
        out = gronwall_diagnostics(random_trajectory, 2.0)
        count = len(random_trajectory.snapshot_samples())
        for key, series in out.items():
            assert len(series) == count - 1
            assert np.all(np.isfinite(series))

    def test_needs_three_snapshots(self, grid16):
        u0 = generate_test_field("random_solenoidal", 0, grid16)
        traj = integrate(u0, 0.01, 0.1, snapshot_stride=10)
        with pytest.raises(ValueError):
            gronwall_diagnostics(traj)


@pytest.fixture(scope="module")
def dense():
    grid = make_grid(16, 0.05)
    u0 = generate_test_field("random_solenoidal", 1, grid)
    return integrate(u0, 2e-3, 0.8, snapshot_stride=1)


class TestQuadrature:
    def subsample(self, traj, stride):
        return dataclasses.replace(traj, samples=[s for s in traj.samples if s.step % stride == 0])

    def test_stride_refinement(self, dense):
        ref = evaluate_criterion(dense, CriterionConfig(), gronwall=False).per_beta[2.0].integral
        err = {s: abs(evaluate_criterion(self.subsample(dense, s), CriterionConfig(),
                                         gronwall=False).per_beta[2.0].integral - ref)
               for s in (40, 20, 10)}
        # trapezoid error O(stride^2): halving the stride divides the error by about 4
        assert 3.0 < err[40] / err[20] < 5.0
        assert 3.0 < err[20] / err[10] < 5.0

    def test_zero_tail(self, dense):
        # After the flow has stopped, zero samples add nothing beyond the closing interval.
        base = evaluate_criterion(dense, CriterionConfig(), gronwall=False).per_beta[2.0]
        last = dense.samples[-1]
        key = hessian_key((1, 2, 3), 2.0)
        zero = {k: 0.0 for k in last.diagnostics}
        tail = [TrajectorySample(last.t + 0.1 * m, last.step + m, dict(zero),
                                 has_snapshot_diagnostics=True) for m in range(1, 6)]
        extended = dataclasses.replace(dense, samples=dense.samples + tail)
        ext = evaluate_criterion(extended, CriterionConfig(), gronwall=False).per_beta[2.0]
        bridge = 0.5 * 0.1 * last.diagnostics[key] ** 2
        assert ext.integral == pytest.approx(base.integral + bridge, rel=1e-14)

        stopped = dataclasses.replace(dense, samples=dense.samples[:1] + [
            TrajectorySample(dense.samples[0].t + 0.1 * m, m, dict(zero),
                             has_snapshot_diagnostics=True) for m in range(1, 4)])
        shorter = dataclasses.replace(stopped, samples=stopped.samples[:2])
        assert evaluate_criterion(stopped, CriterionConfig(), gronwall=False).per_beta[2.0].integral \
            == evaluate_criterion(shorter, CriterionConfig(), gronwall=False).per_beta[2.0].integral


def test_summary_mentions_window(random_trajectory):
    text = summary_text(evaluate_criterion(random_trajectory, CriterionConfig(betas=(2.0, INF))))
    assert "window: tau=0.0 to end=1.0" in text
    assert "beta=inf alpha=1.0" in text


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_terminates_window(grid16):
    u = generate_test_field("random_solenoidal", 0, grid16, amplitude=1e100)
    traj = integrate(u, 1e-3, 0.01, cfl=math.inf, snapshot_stride=1, check_divergence=False)
    assert traj.blowup and len(traj.samples) < 11
    report = evaluate_criterion(traj, CriterionConfig())
    assert report.blowup and report.window_end == traj.samples[-1].t
    assert "terminated by discrete blow-up" in summary_text(report)
