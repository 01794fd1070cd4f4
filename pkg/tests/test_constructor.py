from __future__ import annotations

import cmath
import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lerchlab.constructor import (
    ConstructionRun,
    annulus,
    assignment,
    build_parameters,
    build_W,
    build_Y,
    check_big_enough,
    context,
    fixed_point_solve,
    identity_check,
    invert_G,
    linear_class_sums,
    load_run,
    mu_split,
    phases_from_z,
    power_class_sums,
    prime_class_sums,
    run_construction,
    save_run,
    scaling_diagnostics,
    select_sigma,
    sigma_window,
    spread,
    verify_construction,
)
from lerchlab.constructor import _euler_value
from lerchlab.errors import DomainError, ImageError, InfeasibleConstructionError, InvariantError
from lerchlab.series import TwistSpec, phased_eval


@pytest.fixture(scope="module")
def p5():
    return build_parameters("unit", 1, 1, q=5, a=2)


@pytest.fixture(scope="module")
def p11():
    return build_parameters("unit", 1, 1, q=11, a=2)


class TestParameters:
    def test_ell(self):
        assert build_parameters("unit", 1, 1, q=11, a=2).ell == 2
        assert build_parameters("unit", 2, 1, q=11, a=2).ell == 3
        assert build_parameters("tau", 1, 1, q=11, a=2).ell == 2

    def test_Q(self, p11):
        assert abs(p11.Q - 11**0.1625) < 1e-15
        assert abs(p11.Q - 1.4766) < 1e-3
        assert p11.J == 2

    @pytest.mark.parametrize("kw", [
        dict(q=9, a=2), dict(q=11, a=11), dict(q=11, a=2, delta=0.4), dict(q=11, a=2, A=5.0),
        dict(q=3, a=1), dict(q=11, a=2, p_max=3),
    ])
    def test_rejections(self, kw):
        with pytest.raises(DomainError):
            build_parameters("unit", 1, 1, **kw)

    def test_residue_class_after_ell(self):
        with pytest.raises(DomainError):
            build_parameters("unit", 3, 3, q=11, a=2)
        with pytest.raises(DomainError):
            build_parameters("unit", 8, 1, q=7, a=2)  # q must exceed k + ell

    def test_lambda_route(self):
        p = build_parameters("unit", lam="0.30102999566398119521373889472449302677", q_range=(50, 500))
        assert (p.a, p.q) == (16, 53) and not p.rational

    def test_rational_label(self, p11):
        assert p11.lam == "2/11" and p11.rational


class TestIdentity:
    @pytest.mark.parametrize("f,k,m,q,a,p_max", [
        ("unit", 1, 1, 5, 1, 10**6), ("unit", 3, 2, 7, 3, 10**6), ("tau", 1, 1, 11, 2, 10**5),
        ("unit", 1, 1, 23, 2, 10**6), ("unit", 1, 1, 41, 2, 10**6),
    ])
    def test_x_combination_vanishes(self, f, k, m, q, a, p_max):
        p = build_parameters(f, k, m, q=q, a=a, p_max=p_max)
        for sigma in (1.01, 1.1, 1.5):
            assert identity_check(p, sigma) < 1e-10

    def test_detects_corruption(self, p5, monkeypatch):
        ctx = context(p5)
        monkeypatch.setattr(ctx, "chi_a", ctx.chi_a * 1.001)
        with pytest.raises(InvariantError):
            identity_check(p5, 1.1)


class TestClassSums:
    def test_positive_and_monotone(self, p11):
        prev = None
        for sigma in (1.3, 1.1, 1.03, 1.01):
            cs = prime_class_sums(p11, sigma)
            assert np.all(cs.totals > 0) and np.all(cs.counts > 0)
            if prev is not None:
                assert np.all(cs.totals > prev)
            prev = cs.totals

    def test_counts_match_sieve(self, p5):
        cs = prime_class_sums(p5, 1.1)
        from lerchlab.arith import cached_sieve

        pr = cached_sieve(10**6).primes_in(3, 10**6)
        for b, c in zip(cs.classes, cs.counts):
            assert c == np.sum((pr % 5 == b) & (pr != 5))

    def test_annulus_contains_random_phases(self, p5):
        ctx = context(p5)
        rng = np.random.default_rng(0)
        lo, hi = annulus(p5, 2, 1.1)
        for _ in range(200):
            t = rng.uniform(0, 2 * np.pi, len(ctx.big)) / ctx.big_logp
            v = abs(linear_class_sums(p5, 1.1, t)[list(ctx.classes).index(2)])
            assert lo - 1e-12 <= v <= hi + 1e-12

    def test_power_sums_match_direct(self, p5):
        ctx = context(p5)
        rng = np.random.default_rng(3)
        t = rng.uniform(-5, 5, len(ctx.big))
        H = power_class_sums(ctx, 1.2, t, h_from=2)
        p = ctx.big.astype(float)
        direct = np.zeros(5, dtype=complex)
        res = ctx.big.astype(np.int64) % 5
        for h in range(2, 60):
            res = res * ctx.big % 5
            np.add.at(direct, res, p ** (-h * (1.2 + 1j * t)) / h)
        assert np.abs(H[:5] - direct).max() < 1e-14


class TestInversion:
    @given(st.floats(0.3, 1 / 3), st.floats(0.3, 1 / 3), st.floats(0.02, math.pi / 2 - 0.02),
           st.floats(0.02, math.pi / 2 - 0.02))
    def test_roundtrip(self, mu1, mu2, th1, th2):
        w = mu1 * cmath.exp(1j * th1) + mu2 * cmath.exp(-1j * th2)
        a, b = invert_G(mu1, mu2, w)
        assert abs(mu1 * cmath.exp(1j * a) + mu2 * cmath.exp(-1j * b) - w) < 1e-12

    def test_known_angles(self):
        w = 0.32 * cmath.exp(1j * math.pi / 4) + 0.33 * cmath.exp(-1j * math.pi / 6)
        a, b = invert_G(0.32, 0.33, w)
        assert abs(a - math.pi / 4) < 1e-12 and abs(b - math.pi / 6) < 1e-12

    def test_image_disc(self):
        # the disc |w - mu0| <= 1/18 lies in the image for mu's near 1/3
        rng = np.random.default_rng(5)
        mu1, mu2 = 0.331, 0.333
        mu0 = 1 - mu1 - mu2
        for _ in range(1000):
            w = mu0 + (1 / 18) * math.sqrt(rng.uniform()) * cmath.exp(2j * math.pi * rng.uniform())
            invert_G(mu1, mu2, w)

    def test_outside_image(self):
        with pytest.raises(ImageError):
            invert_G(0.3, 0.3, 0.7)
        with pytest.raises(ImageError):
            invert_G(0.3, 0.3, -0.5)


class TestSplit:
    def test_thirds(self, p5):
        ctx = context(p5)
        for b in ctx.classes:
            sp = mu_split(p5, int(b), 1.001)
            assert abs(sp.mu0 + sp.mu1 + sp.mu2 - 1) < 1e-14
            assert sp.mu1 <= 1 / 3 + 1e-12 and sp.mu2 <= 1 / 3 + 1e-12
            assert sp.mu1 + sp.mu2 - sp.mu0 > 1 / 9
            assert sp.p1 % 5 == b and sp.p2 % 5 == b and sp.p1 < sp.p2

    def test_split_failure_reported(self, p5):
        with pytest.raises(InfeasibleConstructionError):
            mu_split(p5, 2, 1.1)

    def test_phases_reproduce_targets(self, p5):
        ctx = context(p5)
        sigma = 1.001
        splits = {int(b): mu_split(p5, int(b), sigma) for b in ctx.classes}
        rng = np.random.default_rng(2)
        z = np.array([0.02 * sp.total * cmath.exp(2j * math.pi * rng.uniform()) for sp in splits.values()])
        t = phases_from_z(p5, sigma, splits, z)
        assert np.abs(linear_class_sums(p5, sigma, t) - z).max() < 1e-10

    def test_phases_reject_large_targets(self, p5):
        ctx = context(p5)
        splits = {int(b): mu_split(p5, int(b), 1.001) for b in ctx.classes}
        z = np.array([0.2 * sp.total for sp in splits.values()], dtype=complex)
        with pytest.raises(ImageError):
            phases_from_z(p5, 1.001, splits, z)


class TestFixedPoint:
    def test_zero_targets_converge(self, p5):
        yt = build_Y(p5, 1.01, strict=False)
        yt0 = dataclasses.replace(yt, Y=np.zeros_like(yt.Y))
        st = fixed_point_solve(p5, 1.01, yt=yt0)
        assert st.converged
        assert st.linear_residual < 1e-12
        assert st.system_residual < 1e-8
        assert np.abs(st.z).max() <= st.R
        steps = [row["sup_step"] for row in st.transcript]
        assert steps[-1] < 1e-8

    def test_infeasible_at_desk_scale(self, p11):
        with pytest.raises(InfeasibleConstructionError) as exc:
            select_sigma(p11)
        assert exc.value.margins and all(not r["passed"] for r in exc.value.margins)

    def test_window(self, p11):
        lo, hi = sigma_window(p11)
        assert abs(lo - p11.Q**-1.5) < 1e-15 and hi == min(p11.eta, 5 / p11.Q)
        rep = check_big_enough(p11, 1 + lo)
        assert rep.need > 0 and rep.max_W > 0

    def test_denominator_guard_is_available(self, p11):
        wt = build_W(p11, 1.05, guard=False)
        assert wt.W.shape == (1, p11.J)
        assert np.all(np.isfinite(wt.W))


class TestVerification:
    def test_euler_route_matches_direct_sum(self, p5):
        ctx = context(p5)
        rng = np.random.default_rng(1)
        t = rng.uniform(0, 2 * np.pi, len(ctx.big)) / ctx.big_logp
        for sigma in (2.0, 1.5):
            v, tail = _euler_value(ctx, sigma, t, ctx.t_q())
            r = phased_eval(ctx.f, TwistSpec(p5.twist_lambda), assignment(p5, t), sigma, N=10**6)
            assert abs(v - r.value) < tail + r.tail_bound

    def test_report_and_roundtrip(self, p5, tmp_path):
        yt = build_Y(p5, 1.01, strict=False)
        st = fixed_point_solve(p5, 1.01, yt=dataclasses.replace(yt, Y=np.zeros_like(yt.Y)))
        ver = verify_construction(p5, st.sigma, st.t, controls=5)
        assert ver.tail_bound > 0 and ver.control_median > 0
        run = ConstructionRun(p5.with_sigma(st.sigma), [check_big_enough(p5, 1.01)], st, ver, None, False)
        path = tmp_path / "run.jsonl"
        save_run(path, run, {"command": "construct"})
        params, sigma, t = load_run(path)
        assert params == run.params and sigma == st.sigma
        assert np.array_equal(t, st.t)

    def test_forced_run_still_reports(self, p5):
        with pytest.raises(InfeasibleConstructionError):
            run_construction(p5, force=True, controls=2)


class TestScaling:
    def test_rows(self):
        rows = scaling_diagnostics(qs=(11, 23, 41))
        assert [r.q for r in rows] == [11, 23, 41]
        assert all(r.max_W > 0 and math.isfinite(r.W_scaled) for r in rows)
        assert spread([1.0, 2.0, 4.0]) == 4.0
