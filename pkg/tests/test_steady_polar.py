import math

import numpy as np
import pytest

from pmflow.errors import DomainError
from pmflow.steady_polar import IncomingSteady, ShockPolarCurve, mach_jump


def oracle_mach_jump(gamma, m_in, lo, hi):
    """Independent bisection oracle for the normal-Mach jump."""

    def g(m):
        if gamma == 1.0:
            return m * m - 2.0 * math.log(m)
        e = 2.0 * (gamma - 1.0) / (gamma + 1.0)
        return (m * m + 2.0 / (gamma - 1.0)) * m ** (-e)

    target = g(m_in)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (g(mid) - target) * (g(lo) - target) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestMachJump:
    def test_unit_fixed_point(self):
        assert mach_jump(1.4, 1.0) == 1.0

    def test_against_oracle(self):
        expected = oracle_mach_jump(1.4, 2.0, 1e-6, 1.0)
        assert mach_jump(1.4, 2.0) == pytest.approx(expected, abs=1e-12)

    def test_supersonic_to_subsonic(self):
        for gamma in (1.0, 1.4, 2.0):
            m = mach_jump(gamma, 2.0)
            assert 0.0 < m < 1.0
            # Involution: jumping back recovers the input.
            assert mach_jump(gamma, m) == pytest.approx(2.0, rel=1e-12)

    def test_monotone_decreasing(self):
        assert mach_jump(1.4, 2.1) < mach_jump(1.4, 2.0)

    def test_isothermal_matches_near_one_gamma(self):
        a = mach_jump(1.0, 1.7)
        b = mach_jump(1.0 + 1e-9, 1.7)
        assert a == pytest.approx(b, abs=1e-6)


class TestPolarPoints:
    def test_incoming_validation(self):
        with pytest.raises(DomainError):
            IncomingSteady(1.4, 0.9)

    def test_normal_shock_endpoint(self):
        curve = ShockPolarCurve(1.4, 2.0)
        u, v, rho = curve.polar_point(0.0)
        assert v == 0.0
        assert rho > 1.0
        assert u == pytest.approx(curve.u_hat0)

    def test_degenerate_endpoint(self):
        curve = ShockPolarCurve(1.4, 2.0)
        bmax = curve.incoming.beta_max
        u, v, rho = curve.polar_point(bmax * (1.0 - 1e-9))
        assert u == pytest.approx(2.0, abs=1e-5)
        assert abs(v) < 1e-5
        assert rho == pytest.approx(1.0, abs=1e-5)

    def test_jump_conditions_satisfied(self):
        # Every polar point zeroes the jump functional and respects entropy.
        for gamma in (1.0, 1.4, 2.0):
            curve = ShockPolarCurve(gamma, 2.0)
            bmax = curve.incoming.beta_max
            for frac in (0.0, 0.15, 0.4, 0.7, 0.95):
                u, v, rho = curve.polar_point(frac * bmax)
                assert abs(curve.g_residual(np.array([u, v]))) < 1e-10
                assert rho > 1.0
                # Normal-Mach entropy ordering across the shock.
                beta = frac * bmax
                n = np.array([math.cos(beta), -math.sin(beta)])
                c = rho ** ((gamma - 1.0) / 2.0)
                m_n = abs(np.array([u, v]) @ n) / c
                m_inf_n = 2.0 * math.cos(beta)
                assert m_n < 1.0 < m_inf_n or frac == 0.95 and m_n < 1.0

    def test_conservation_residuals(self):
        # Mass flux and tangential continuity directly, to 1e-10.
        curve = ShockPolarCurve(1.4, 3.0)
        beta = 0.3
        u, v, rho = curve.polar_point(beta)
        n = np.array([math.cos(beta), -math.sin(beta)])
        t = np.array([math.sin(beta), math.cos(beta)])
        dn = np.array([u, v])
        uinf = np.array([3.0, 0.0])
        assert abs(rho * dn @ n - uinf @ n) < 1e-10
        assert abs((uinf - dn) @ t) < 1e-10
        # Bernoulli in the normal component.
        h = (rho ** 0.4 - 1.0) / 0.4
        assert 0.5 * (dn @ n) ** 2 + h == pytest.approx(
            0.5 * (uinf @ n) ** 2, rel=1e-12
        )

    def test_density_decreases_along_polar(self):
        curve = ShockPolarCurve(1.4, 2.0)
        bmax = curve.incoming.beta_max
        betas = np.linspace(1e-3, bmax - 1e-3, 40)
        rhos = [curve.polar_point(b)[2] for b in betas]
        assert all(a > b for a, b in zip(rhos, rhos[1:]))

    def test_polar_point_agrees_with_f_polar(self):
        curve = ShockPolarCurve(1.4, 2.0)
        bmax = curve.incoming.beta_max
        for frac in (0.2, 0.5, 0.8):
            u, v, _ = curve.polar_point(frac * bmax)
            assert curve.f_polar_eval(u) == pytest.approx(v, abs=1e-9)


class TestCurveShape:
    @pytest.mark.parametrize("gamma", [1.0, 1.4, 2.0])
    @pytest.mark.parametrize("u_inf", [1.5, 2.0, 4.0])
    def test_concavity(self, gamma, u_inf):
        curve = ShockPolarCurve(gamma, u_inf)
        scale = u_inf - curve.u_hat0
        us = np.linspace(curve.u_hat0, u_inf, 202)[1:-1]
        vs = np.array([curve.f_polar_eval(u) for u in us])
        second = vs[:-2] - 2.0 * vs[1:-1] + vs[2:]
        assert np.max(second) <= 1e-8 * scale

    def test_endpoints_vanish(self):
        curve = ShockPolarCurve(1.4, 2.0)
        assert curve.f_polar_eval(curve.u_hat0) == pytest.approx(0.0, abs=1e-12)
        assert curve.f_polar_eval(curve.u_inf) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range_rejected(self):
        curve = ShockPolarCurve(1.4, 2.0)
        with pytest.raises(DomainError):
            curve.f_polar_eval(curve.u_hat0 - 0.01)
        with pytest.raises(DomainError):
            curve.f_polar_eval(curve.u_inf + 0.01)


class TestCriticalPoints:
    @pytest.mark.parametrize("gamma", [1.0, 1.4, 2.0])
    @pytest.mark.parametrize("u_inf", [1.5, 2.0, 4.0])
    def test_ordering(self, gamma, u_inf):
        curve = ShockPolarCurve(gamma, u_inf)
        u0, u_d, u_s, theta_d, theta_s = curve.critical_points()
        assert u0 < u_d < u_s < u_inf
        assert theta_s < theta_d

    def test_sonic_speed_identity(self):
        # The sonic point satisfies the critical-speed identity.
        gamma, u_inf = 1.4, 2.0
        curve = ShockPolarCurve(gamma, u_inf)
        q2 = curve.u_s**2 + curve.f_polar_eval(curve.u_s) ** 2
        target = (2 * (gamma - 1) / (gamma + 1)) * (0.5 * u_inf**2 + 1 / (gamma - 1))
        assert q2 == pytest.approx(target, rel=1e-10)

    def test_detachment_tangency(self):
        # f(u_d) - u_d f'(u_d) = 0: the ray through the origin is tangent.
        curve = ShockPolarCurve(1.4, 2.0)
        fd = curve.f_polar_eval(curve.u_d)
        slope = curve.f_polar_slope(curve.u_d)
        assert fd - curve.u_d * slope == pytest.approx(0.0, abs=1e-6)

    def test_continuity_in_u_inf(self):
        a = np.array(ShockPolarCurve(1.4, 2.0).critical_points())
        b = np.array(ShockPolarCurve(1.4, 2.0 + 1e-6).critical_points())
        assert np.max(np.abs(a - b)) <= 1e-4


class TestClassification:
    def test_partition(self):
        curve = ShockPolarCurve(1.4, 2.0)
        assert curve.classify_params(0.5 * (curve.u_d + curve.u_inf)) == "weak"
        assert curve.classify_params(0.5 * (curve.u_hat0 + curve.u_d)) == "strong"
        assert curve.classify_params(curve.u_s) == "sonic-boundary"
        assert curve.classify_params(curve.u_d) == "detached"
        # Sonic point lies in the weak family.
        assert curve.u_s > curve.u_d

    def test_domain_check(self):
        curve = ShockPolarCurve(1.4, 2.0)
        with pytest.raises(DomainError):
            curve.classify_params(curve.u_hat0)


def test_csv_export(tmp_path):
    curve = ShockPolarCurve(1.4, 2.0, n_samples=64)
    path = tmp_path / "polar.csv"
    curve.to_csv(path)
    text = path.read_text()
    assert text.startswith("# u_hat0=")
    rows = text.strip().split("\n")
    assert rows[1] == "u,v,rho,beta"
    assert len(rows) == 2 + len(curve.samples)
    # Round-trip the first data row.
    vals = [float(x) for x in rows[2].split(",")]
    assert vals[0] == curve.samples[0, 0]
