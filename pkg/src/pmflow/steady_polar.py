"""Steady potential-flow shock polar for a supersonic incoming stream.

For an incoming state (density 1, horizontal speed u_inf > 1) the locus of
admissible downstream velocities behind a straight oblique shock is a concave
curve v = f_polar(u) on [u_hat0, u_inf] (the shock polar). This module builds
the curve, evaluates it, and extracts the critical speeds and angles:

- u_hat0 : downstream speed of the steady normal shock (left endpoint),
- u_d    : detachment point, where a ray from the origin is tangent,
- u_s    : sonic point, where the downstream state is exactly sonic,
- theta_d, theta_s : the corresponding wedge angles (theta_s < theta_d).
"""

import math

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, SingularDirectionError
from .gas_model import GasModel

_XTOL = 1e-15
_RTOL = 8.9e-16


def jump_function(gamma, m):
    """Monotone invariant g(M) conserved across a shock in the normal Mach.

    g(M) = (M^2 + 2/(gamma-1)) M^(-2(gamma-1)/(gamma+1)) for gamma > 1, and
    its gamma -> 1 limit M^2 - 2 ln M for gamma = 1. Strictly decreasing on
    (0, 1), strictly increasing on (1, inf).
    """
    m = np.asarray(m, dtype=float)
    if gamma == 1.0:
        return m * m - 2.0 * np.log(m)
    e = 2.0 * (gamma - 1.0) / (gamma + 1.0)
    return (m * m + 2.0 / (gamma - 1.0)) * m ** (-e)


def mach_jump(gamma, m_in):
    """Normal Mach number on the other side of a shock.

    Solves g(M_out) = g(M_in) for the unique root on the opposite side of 1;
    M_in > 1 gives M_out in (0, 1) and vice versa. M_in = 1 maps to 1.
    dM_out/dM_in < 0 away from 1.

    Parameters
    ----------
    gamma : float
    m_in : float
        Normal Mach number, > 0.
    """
    if m_in <= 0.0:
        raise DomainError("normal Mach number must be positive")
    if m_in == 1.0:
        return 1.0
    target = float(jump_function(gamma, m_in))

    def f(m):
        return float(jump_function(gamma, m)) - target

    if m_in > 1.0:
        if gamma == 1.0 and target >= 80.0:
            # M^2 - 2 ln M = target with M << 1: M = exp(-target/2) to full
            # precision (the M^2 term is below 1e-34 here).
            return math.exp(-0.5 * target)
        lo = 1e-12
        while f(lo) < 0.0:
            lo *= 0.5
            if lo < 1e-300:
                raise NumericalError("mach_jump bracket failed", m_in=m_in)
        return brentq(f, lo, 1.0, xtol=_XTOL, rtol=_RTOL)
    hi = 2.0
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("mach_jump bracket failed", m_in=m_in)
    return brentq(f, 1.0, hi, xtol=_XTOL, rtol=_RTOL)


class IncomingSteady:
    """Incoming supersonic steady state (density 1, speed u_inf > 1).

    With the sound-speed normalization the incoming Mach number m_inf equals
    u_inf, and attached oblique shocks exist for shock-normal inclinations
    beta in [0, arccos(1/m_inf)).
    """

    __slots__ = ("gamma", "u_inf", "m_inf", "gas")

    def __init__(self, gamma, u_inf):
        if u_inf <= 1.0:
            raise DomainError(f"incoming flow must be supersonic, u_inf={u_inf}")
        self.gamma = float(gamma)
        self.u_inf = float(u_inf)
        self.m_inf = self.u_inf
        # Steady Bernoulli constant with h(1) = 0 upstream.
        self.gas = GasModel(gamma, bernoulli=0.5 * self.u_inf**2)

    @property
    def beta_max(self):
        return math.acos(1.0 / self.m_inf)

    def density(self, speed2):
        """Downstream density from the steady Bernoulli relation."""
        return self.gas.density_from_bernoulli(speed2, 0.0)


class ShockPolarCurve:
    """The shock polar of an incoming steady state, with critical points.

    Parameters
    ----------
    gamma : float
    u_inf : float
        Incoming speed, > 1.
    n_samples : int
        Target sample count for the stored polyline (adaptively refined
        where the curvature of v(u) is largest).

    Attributes
    ----------
    u_hat0, u_d, u_s : float
        Normal-shock, detachment, and sonic downstream speeds,
        u_hat0 < u_d < u_s < u_inf.
    theta_d, theta_s : float
        Flow deflection angles at u_d and u_s (radians), theta_s < theta_d.
    samples : ndarray, shape (n, 4)
        Columns u, v, rho, beta, ordered by u.
    """

    def __init__(self, gamma, u_inf, n_samples=256):
        self.incoming = IncomingSteady(gamma, u_inf)
        self.gamma = float(gamma)
        self.u_inf = float(u_inf)
        u0, v0, rho0 = self.polar_point(0.0)
        self.u_hat0 = u0
        self.rho_hat0 = rho0
        self._solve_critical()
        self.samples = self._sample(n_samples)

    # -- pointwise operations ------------------------------------------------

    def g_residual(self, u):
        """Jump-condition functional; zero exactly on the polar.

        g(u) = (rho(|u|^2) u - u_inf_vec) . (u_inf_vec - u)/|u_inf_vec - u|
        combining conservation of normal mass flux with tangential velocity
        continuity.
        """
        u = np.asarray(u, dtype=float)
        uinf = np.array([self.u_inf, 0.0])
        d = uinf - u
        nd = math.hypot(d[0], d[1])
        if nd == 0.0:
            raise SingularDirectionError("jump direction undefined at u = u_inf")
        rho = self.incoming.density(float(u @ u))
        return float((rho * u - uinf) @ d) / nd

    def polar_point(self, beta):
        """Downstream state behind the oblique shock of inclination beta.

        The shock normal is n = (cos beta, -sin beta); beta = 0 is the
        steady normal shock, beta -> arccos(1/m_inf) degenerates to the
        incoming state.

        Returns
        -------
        (u, v, rho) : tuple of float
        """
        bmax = self.incoming.beta_max
        if beta < 0.0 or beta > bmax:
            raise DomainError(f"beta must lie in [0, {bmax}], got {beta}")
        if beta == bmax:
            return self.u_inf, 0.0, 1.0
        g = self.gamma
        m_inf_n = self.m_inf * math.cos(beta)
        m_n = mach_jump(g, m_inf_n)
        if g == 1.0:
            rho = m_inf_n / m_n
        else:
            a = 2.0 / (g - 1.0)
            rho = ((m_inf_n**2 + a) / (m_n**2 + a)) ** (1.0 / (g - 1.0))
        w = (1.0 - 1.0 / rho) * math.cos(beta)
        u = self.u_inf * (1.0 - w * math.cos(beta))
        v = self.u_inf * w * math.sin(beta)
        return u, v, rho

    @property
    def m_inf(self):
        return self.incoming.m_inf

    def _u_of_beta(self, beta):
        return self.polar_point(beta)[0]

    def beta_of_u(self, u):
        """Shock inclination at horizontal downstream speed u (monotone)."""
        if u < self.u_hat0 - 1e-12 or u > self.u_inf + 1e-12:
            raise DomainError(f"u must lie in [{self.u_hat0}, {self.u_inf}]")
        u = min(max(u, self.u_hat0), self.u_inf)
        if u == self.u_hat0:
            return 0.0
        if u == self.u_inf:
            return self.incoming.beta_max
        return brentq(
            lambda b: self._u_of_beta(b) - u,
            0.0,
            self.incoming.beta_max,
            xtol=_XTOL,
            rtol=_RTOL,
        )

    def f_polar_eval(self, u):
        """Vertical downstream speed v = f_polar(u) on [u_hat0, u_inf]."""
        beta = self.beta_of_u(u)
        return self.polar_point(beta)[1]

    def f_polar_slope(self, u, h=1e-6):
        """Centered-difference slope of f_polar (interior points only)."""
        h = min(h, 0.25 * (self.u_inf - u), 0.25 * (u - self.u_hat0))
        if h <= 0.0:
            raise DomainError("slope requested at a polar endpoint")
        return (self.f_polar_eval(u + h) - self.f_polar_eval(u - h)) / (2.0 * h)

    # -- critical points -----------------------------------------------------

    def _theta_of_beta(self, beta):
        u, v, _ = self.polar_point(beta)
        return math.atan2(v, u)

    def _solve_critical(self):
        g = self.gamma
        bmax = self.incoming.beta_max
        # Sonic point: downstream speed equals the critical speed.
        if g == 1.0:
            q2_target = 1.0
        else:
            q2_target = (2.0 * (g - 1.0) / (g + 1.0)) * (
                0.5 * self.u_inf**2 + 1.0 / (g - 1.0)
            )

        def sonic_gap(beta):
            u, v, _ = self.polar_point(beta)
            return u * u + v * v - q2_target

        beta_s = brentq(sonic_gap, 0.0, bmax, xtol=_XTOL, rtol=_RTOL)
        u_s, v_s, _ = self.polar_point(beta_s)

        # Detachment point: maximum deflection angle along the polar.
        def dtheta(beta, h=1e-4):
            h = min(h, 0.25 * beta, 0.25 * (bmax - beta))
            t = self._theta_of_beta
            return (
                t(beta - 2 * h)
                - 8.0 * t(beta - h)
                + 8.0 * t(beta + h)
                - t(beta + 2 * h)
            ) / (12.0 * h)

        lo, hi = 1e-5 * bmax, (1.0 - 1e-5) * bmax
        if dtheta(lo) <= 0.0 or dtheta(hi) >= 0.0:
            raise NumericalError(
                "detachment bracket failed", lo=dtheta(lo), hi=dtheta(hi)
            )
        beta_d = brentq(dtheta, lo, hi, xtol=1e-13)
        u_d, v_d, _ = self.polar_point(beta_d)

        self.u_s, self.v_s, self.beta_sonic = u_s, v_s, beta_s
        self.u_d, self.v_d, self.beta_detach = u_d, v_d, beta_d
        self.theta_s = math.atan2(v_s, u_s)
        self.theta_d = math.atan2(v_d, u_d)

    def critical_points(self):
        """(u_hat0, u_d, u_s, theta_d, theta_s) for this incoming state."""
        return self.u_hat0, self.u_d, self.u_s, self.theta_d, self.theta_s

    def classify_params(self, u0, tol=1e-10):
        """Classify a downstream speed on the wedge ray.

        Returns one of {"weak", "sonic-boundary", "strong", "detached"}:
        weak for u0 > u_d, strong for u0 < u_d, with boundary tags when u0
        is within `tol` of u_s or u_d.
        """
        if not (self.u_hat0 < u0 < self.u_inf):
            raise DomainError(
                f"u0 must lie in ({self.u_hat0}, {self.u_inf}), got {u0}"
            )
        if abs(u0 - self.u_s) <= tol:
            return "sonic-boundary"
        if abs(u0 - self.u_d) <= tol:
            return "detached"
        return "weak" if u0 > self.u_d else "strong"

    # -- sampling ------------------------------------------------------------

    def _sample(self, n):
        if n < 8:
            raise DomainError("need at least 8 polar samples")
        bmax = self.incoming.beta_max
        betas = list(np.linspace(0.0, bmax, 65))
        pts = {b: self.polar_point(b) for b in betas}
        # Refine where the turning of the chord polyline is largest.
        while len(betas) < n:
            worst, worst_i = -1.0, 1
            for i in range(1, len(betas) - 1):
                p0, p1, p2 = (np.array(pts[betas[j]][:2]) for j in (i - 1, i, i + 1))
                a, b = p1 - p0, p2 - p1
                bend = abs(a[0] * b[1] - a[1] * b[0])
                if bend > worst:
                    worst, worst_i = bend, i
            for j in (worst_i, worst_i + 1):
                bm = 0.5 * (betas[j - 1] + betas[j])
                pts[bm] = self.polar_point(bm)
                betas.insert(j, bm)
                if len(betas) >= n:
                    break
            betas.sort()
        out = np.array([[pts[b][0], pts[b][1], pts[b][2], b] for b in betas])
        return out[np.argsort(out[:, 0])]

    def to_csv(self, path):
        """Write the sampled curve as CSV with a critical-point header."""
        from ._util import fmt_float, write_csv

        header = ["u", "v", "rho", "beta"]
        meta = (
            "# u_hat0=%s,u_d=%s,u_s=%s,theta_d=%s,theta_s=%s\n"
            % tuple(
                fmt_float(x)
                for x in (self.u_hat0, self.u_d, self.u_s, self.theta_d, self.theta_s)
            )
        )
        write_csv(path, header, [self.samples[:, i] for i in range(4)])
        with open(path, "r", newline="\n") as fh:
            body = fh.read()
        with open(path, "w", newline="\n") as fh:
            fh.write(meta + body)
