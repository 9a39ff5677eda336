"""Background uniform states and landmark geometry in the self-similar plane.

A configuration is fixed by the adiabatic exponent gamma, the vertical
incoming pseudo-speed v_inf, and the shock angle beta. This module computes
the three uniform pseudo-states (incoming, normal-shocked N, oblique-shocked
O), the sonic circles and landmark points they induce, the two critical
angles beta_s (sonic) and beta_d (detachment), the homeomorphism between the
self-similar parameters (v_inf, beta) and the steady wedge parameters
(u_inf, u0), and the tangent-line position test used to place the incoming
sonic circle relative to the oblique shock tangent.

Conventions: the incoming state has density 1 and sound speed 1 and moves
straight down with speed v_inf; the N-state sonic circle is centered at the
origin; the shock line S0 has inclination beta and ascends to the right.
"""

import math
import threading

import numpy as np
from dataclasses import dataclass
from scipy.optimize import brentq

from .errors import DomainError
from .gas_model import GasModel
from .steady_polar import ShockPolarCurve, mach_jump

_CRITICAL_CACHE = {}
_CACHE_LOCK = threading.Lock()


def _check_params(v_inf, beta):
    if not v_inf > 0.0:
        raise DomainError(f"v_inf must be positive, got {v_inf}")
    if not 0.0 <= beta < math.pi / 2.0:
        raise DomainError(f"beta must lie in [0, pi/2), got {beta}")


def normal_state(gamma, v_inf):
    """State behind the horizontal (normal) shock facing the incoming flow.

    Solves h(rho_N)(rho_N - 1) - v_inf**2 (rho_N - 1)/2 - v_inf**2 = 0 for
    the unique root rho_N > 1, which combines mass conservation across the
    shock with the Bernoulli relation.

    Parameters
    ----------
    gamma : float
        Adiabatic exponent, >= 1.
    v_inf : float
        Incoming vertical pseudo-speed, > 0.

    Returns
    -------
    rho_N : float
        Downstream density, > 1.
    eta_N : float
        Height of the shocked layer, v_inf / (rho_N - 1); the N-shock sits
        on the line xi_2 = eta_N. Always below the sonic radius c_N.
    c_N : float
        Sound speed of the N-state, rho_N**((gamma-1)/2).
    """
    _check_params(v_inf, 0.0)
    gas = GasModel(gamma)

    def f1(rho):
        h, _ = gas.enthalpy_and_sound(rho)
        return h * (rho - 1.0) - 0.5 * v_inf**2 * (rho - 1.0) - v_inf**2

    hi = 2.0
    while f1(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise DomainError("no downstream density root found")
    rho_n = brentq(f1, 1.0 + 1e-15, hi, xtol=1e-15, rtol=8.9e-16)
    eta_n = v_inf / (rho_n - 1.0)
    c_n = rho_n ** ((gamma - 1.0) / 2.0)
    return rho_n, eta_n, c_n


def oblique_state(gamma, v_inf, beta):
    """State behind the oblique shock of inclination beta.

    The incoming normal Mach number M_inf > 1 is the unique root of the
    scalar shock-compatibility equation

        M_inf**a (M_inf**b - M_O**b) = v_inf / cos(beta),
        a = (gamma-1)/(gamma+1),  b = 2/(gamma+1),

    (M_inf - M_O = v_inf / cos(beta) for gamma = 1), whose left side is
    strictly increasing in M_inf; M_O = mach_jump(M_inf) is the downstream
    normal Mach number.

    Returns
    -------
    u_O : float
        Horizontal velocity of the O-state, -v_inf * tan(beta); its sonic
        circle is centered at (u_O, 0).
    xi2_beta : float
        xi_2-intercept of the shock line S0, M_inf / cos(beta) - v_inf > 0.
    rho_O : float
        Downstream density, (M_inf / M_O)**(2/(gamma+1)).
    c_O : float
        Downstream sound speed, rho_O**((gamma-1)/2).
    M_inf, M_O : float
        Normal Mach numbers on either side, M_O < 1 < M_inf.

    Notes
    -----
    At beta = 0 this reduces exactly to ``normal_state``: rho_O = rho_N,
    u_O = 0 and xi2_beta = eta_N.
    """
    _check_params(v_inf, beta)
    target = v_inf / math.cos(beta)

    if gamma == 1.0:

        def lhs(m):
            return m - mach_jump(gamma, m)

    else:
        a = (gamma - 1.0) / (gamma + 1.0)
        b = 2.0 / (gamma + 1.0)

        def lhs(m):
            return m**a * (m**b - mach_jump(gamma, m) ** b)

    hi = 2.0
    while lhs(hi) < target:
        hi *= 2.0
        if hi > 1e12:
            raise DomainError("oblique Mach equation has no bracketed root")
    m_inf = brentq(
        lambda m: lhs(m) - target, 1.0 + 1e-14, hi, xtol=1e-15, rtol=8.9e-16
    )
    m_o = mach_jump(gamma, m_inf)
    # M_O can underflow to 0 at gamma = 1 for extreme beta; the density is
    # then effectively infinite but c_O stays finite (1 at gamma = 1).
    rho_o = (m_inf / m_o) ** (2.0 / (gamma + 1.0)) if m_o > 0.0 else math.inf
    c_o = rho_o ** ((gamma - 1.0) / 2.0) if gamma > 1.0 else 1.0
    u_o = -v_inf * math.tan(beta)
    xi2_beta = m_inf / math.cos(beta) - v_inf
    return u_o, xi2_beta, rho_o, c_o, m_inf, m_o


def _eta_oblique(gamma, v_inf, beta):
    """Height eta_O of the lower endpoint of the O-side sonic arc on S0."""
    _, _, _, c_o, m_inf, m_o = oblique_state(gamma, v_inf, beta)
    xi2_m = -v_inf + m_inf * math.cos(beta)
    return xi2_m - c_o * math.sqrt(max(1.0 - m_o * m_o, 0.0)) * math.sin(beta)


def _detach_indicator(gamma, v_inf, beta):
    """Sign function whose unique root in beta is the detachment angle.

    Negative throughout the admissible (attached) range, positive beyond;
    strictly increasing in beta. The raw indicator compares the sonic
    margin of the O-state at P_beta against a density-jump deflection term;
    eliminating the P_beta speed through the mass-flux relation
    (rho_O - 1) q_O = v_inf sec(beta) collapses it, up to the positive
    factor sin(beta), to rho_O (sin(beta)**2 - M_O**2) - cos(beta)**2.
    """
    _, _, rho_o, _, _, m_o = oblique_state(gamma, v_inf, beta)
    s2 = math.sin(beta) ** 2
    return rho_o * (s2 - m_o * m_o) - (1.0 - s2)


def beta_sonic(gamma, v_inf):
    """Angle beta_s at which the O-side sonic arc degenerates to a point.

    Unique root of eta_O(beta) = 0; eta_O is strictly decreasing so
    bracketed root finding is unconditionally safe. Cached per exact
    (gamma, v_inf) bit pattern.
    """
    return _critical_angles(gamma, v_inf)[0]


def beta_detach(gamma, v_inf):
    """Detachment angle beta_d: largest shock inclination with an attached
    admissible configuration. Root of a strictly increasing indicator that
    is negative on (0, beta_d). Cached alongside ``beta_sonic``.
    """
    return _critical_angles(gamma, v_inf)[1]


def _critical_angles(gamma, v_inf):
    key = (float(gamma).hex(), float(v_inf).hex())
    with _CACHE_LOCK:
        hit = _CRITICAL_CACHE.get(key)
    if hit is not None:
        return hit
    _check_params(v_inf, 0.0)
    lo, hi = 1e-8, math.pi / 2.0 - 1e-8
    b_s = brentq(
        lambda b: _eta_oblique(gamma, v_inf, b), lo, hi, xtol=1e-14
    )
    b_d = brentq(
        lambda b: _detach_indicator(gamma, v_inf, b), lo, hi, xtol=1e-14
    )
    with _CACHE_LOCK:
        _CRITICAL_CACHE[key] = (b_s, b_d)
    return b_s, b_d


@dataclass(frozen=True)
class ConfigGeometry:
    """Landmark points and circles of one (gamma, v_inf, beta) configuration.

    Attributes
    ----------
    O_inf, O_O, O_N : tuple of float
        Sonic circle centers of the incoming, oblique and normal states:
        (0, -v_inf), (u_O, 0) and (0, 0).
    c_O, c_N : float
        Sonic radii of the O- and N-states.
    xi2_beta : float
        xi_2-intercept of the shock line S0.
    eta_N, eta_O : float
        Heights of the shock endpoints above the wall: the N-shock line sits
        at eta_N; the attached end of the curved shock sits at eta_O.
    P1, P2, P3, P4 : tuple of float
        Domain corners: P1 is the lower end of S0 (on the O sonic circle
        while beta < beta_s, at P_beta after), P2 the upper end of the
        N-side sonic arc at height eta_N, P3 = (c_N, 0), P4 = (u_O - c_O, 0).
    P_beta : tuple of float or None
        Foot of S0 on the wall, (-xi2_beta / tan(beta), 0); None at beta = 0
        where S0 is horizontal.
    M_inf, M_O : float
        Normal Mach numbers across the oblique shock.
    rho_N, rho_O, u_O, q_O : float
        Downstream densities, O-state horizontal speed, O-state flow speed.
    x_P_beta : float
        Signed sonic margin c_O * (1 - M(P_beta)) of the O-state at P_beta;
        negative below beta_s, zero at beta_s, positive above.
    tag : str
        "supersonic-corner" while beta < beta_s (the O sonic arc borders a
        supersonic region and the domain is a curved rectangle);
        "sonic-point" for beta >= beta_s (the arc has degenerated to the
        wall point P_beta and P1 = P_beta).
    """

    gamma: float
    v_inf: float
    beta: float
    O_inf: tuple
    O_O: tuple
    O_N: tuple
    c_O: float
    c_N: float
    xi2_beta: float
    eta_N: float
    eta_O: float
    rho_N: float
    rho_O: float
    u_O: float
    q_O: float
    M_inf: float
    M_O: float
    P1: tuple
    P2: tuple
    P3: tuple
    P4: tuple
    P_beta: tuple
    x_P_beta: float
    tag: str


def landmarks(gamma, v_inf, beta):
    """Full landmark geometry for one configuration.

    See :class:`ConfigGeometry`. All point incidences (points on their
    defining circles and lines) hold to root-finder accuracy.
    """
    _check_params(v_inf, beta)
    rho_n, eta_n, c_n = normal_state(gamma, v_inf)
    u_o, xi2_beta, rho_o, c_o, m_inf, m_o = oblique_state(gamma, v_inf, beta)
    q_o = m_o * c_o
    xi2_m = -v_inf + m_inf * math.cos(beta)
    eta_o = xi2_m - c_o * math.sqrt(max(1.0 - m_o * m_o, 0.0)) * math.sin(beta)

    b_s = beta_sonic(gamma, v_inf)
    if beta > 0.0:
        p_beta = (-xi2_beta / math.tan(beta), 0.0)
        x_pb = c_o * (1.0 - m_o / math.sin(beta))
    else:
        p_beta = None
        x_pb = -math.inf

    if beta < b_s:
        # Lower intersection of S0 with the O sonic circle.
        xi1_p1 = u_o - (
            math.cos(beta) * math.sqrt(c_o * c_o - q_o * q_o)
            + q_o * math.sin(beta)
        )
        p1 = (xi1_p1, eta_o)
        tag = "supersonic-corner"
    else:
        p1 = p_beta
        tag = "sonic-point"

    p2 = (math.sqrt(c_n * c_n - eta_n * eta_n), eta_n)
    return ConfigGeometry(
        gamma=float(gamma),
        v_inf=float(v_inf),
        beta=float(beta),
        O_inf=(0.0, -float(v_inf)),
        O_O=(u_o, 0.0),
        O_N=(0.0, 0.0),
        c_O=c_o,
        c_N=c_n,
        xi2_beta=xi2_beta,
        eta_N=eta_n,
        eta_O=eta_o,
        rho_N=rho_n,
        rho_O=rho_o,
        u_O=u_o,
        q_O=q_o,
        M_inf=m_inf,
        M_O=m_o,
        P1=p1,
        P2=p2,
        P3=(c_n, 0.0),
        P4=(u_o - c_o, 0.0),
        P_beta=p_beta,
        x_P_beta=x_pb,
        tag=tag,
    )


def map_RW_to_PW(gamma, v_inf, beta):
    """Self-similar parameters (v_inf, beta) to steady wedge (u_inf, u0).

    u_inf is the incoming steady speed and u0 the horizontal downstream
    component on the shock polar of u_inf; beta must be positive (the
    normal-shock limit beta -> 0 corresponds to u0/u_inf -> 1 with a
    degenerate wedge angle).
    """
    _check_params(v_inf, beta)
    if beta == 0.0:
        raise DomainError("beta = 0 has no steady wedge counterpart")
    _, xi2_beta, _, _, _, _ = oblique_state(gamma, v_inf, beta)
    w = xi2_beta / math.tan(beta)
    u_inf = math.hypot(v_inf, w)
    u0 = (w - v_inf * math.tan(beta)) * w / u_inf
    return u_inf, u0


def map_PW_to_RW(gamma, u_inf, u0):
    """Steady wedge parameters (u_inf, u0) back to (v_inf, beta).

    Inverse of :func:`map_RW_to_PW`: the wedge half-angle is
    theta_w = atan(f(u0)/u0) with f the shock polar of u_inf, the shock
    sits at sigma = atan2(u_inf - u0, f(u0)) from the incoming direction,
    and the frame change gives v_inf = u_inf sin(theta_w), beta =
    sigma - theta_w. u0 must lie strictly inside the polar range.
    """
    curve = ShockPolarCurve(gamma, u_inf)
    if not curve.u_hat0 < u0 < u_inf:
        raise DomainError("u0 outside the open shock polar range")
    f0 = curve.f_polar_eval(u0)
    theta_w = math.atan2(f0, u0)
    sigma = math.atan2(u_inf - u0, f0)
    v_inf = u_inf * math.sin(theta_w)
    beta = sigma - theta_w
    return v_inf, beta


def tangent_line_classify(gamma, v_inf, beta):
    """Position of the shock tangent line relative to the incoming sonic
    circle: "above" (clears it), "tangent", or "below" (crosses it).

    The incoming sonic circle is the unit circle around (0, -v_inf). For
    v_inf >= 1 it misses the flow region entirely and the answer is
    "above" for every beta. Otherwise the test compares the slope of the
    chord P2-P1 with the slope of the tangent line from P2 to the circle;
    the difference is negative near beta = 0 and increases with beta.
    Requires beta below the sonic angle beta_s.
    """
    _check_params(v_inf, beta)
    if v_inf >= 1.0:
        return "above"
    if beta >= beta_sonic(gamma, v_inf):
        raise DomainError("classification requires beta < beta_s")
    geo = landmarks(gamma, v_inf, beta)
    xi_n = geo.P2[0]
    s = v_inf + geo.eta_N
    tan_inf = (math.sqrt(s * s - 1.0 + xi_n * xi_n) - s * xi_n) / (
        1.0 - xi_n * xi_n
    )
    tan_o = (geo.eta_N - geo.eta_O) / (xi_n - geo.P1[0])
    f = tan_o - tan_inf
    tol = 1e-12 * max(1.0, abs(tan_inf))
    if f < -tol:
        return "above"
    if f > tol:
        return "below"
    return "tangent"
