"""Coordinate pipeline between the physical plane and the fixed square.

The subsonic region of one configuration is a curvilinear quadrilateral
bounded by the wedge wall, two sonic circle arcs, and the curved shock. A
pair of maps flattens it onto the square Q_iter = (-1, 1) x (0, 1):

1. G1 = F2 o F1 sends the region to a strip: F1 straightens the horizontal
   coordinate so that it equals the signed radial offset u_O - r near the
   O-side arc and the radius r near the N-side arc (elsewhere xi_1); F2 then
   replaces the vertical coordinate by the polar angle near the arcs
   (elsewhere xi_2). Near either arc G1 coincides with the exact polar
   charts, so the degenerate coefficients of the flow equation keep their
   closed form there. All blending profiles are quintic smoothsteps whose
   supports are separated by the choice of the resolution parameter k, so
   every blend interpolates between quantities that agree identically on
   the overlap except in the angular blend of F2.
2. The affine map L_beta takes the strip abscissa to s in [-1, 1] and the
   shock graph t' = g(s) scales the ordinate to t = t'/g(s), putting the
   shock at t = 1 and the wall at t = 0.

The module also provides the local polar coordinates (x, y) about either
sonic circle, the background interpolant phi*_beta between the two uniform
downstream potentials, a regularized distance to the shock graph, and the
extension operator that continues a field defined below the graph to a
collar above it with second-order accuracy.
"""

import math
import threading

import numpy as np
from dataclasses import dataclass, field
from scipy.interpolate import CubicSpline

from ._util import bisect_vec, smoothstep, smoothstep_d, smoothstep_d2
from .errors import (
    ConfigurationError,
    DegenerateGraphError,
    DomainError,
    SingularDirectionError,
)
from .selfsim_states import beta_detach, beta_sonic, landmarks

_SETUP_CACHE = {}
_SETUP_LOCK = threading.Lock()

_K_MAX = 4096


def _chart_setup(gamma, v_inf):
    """Resolution parameter k and arc-extension depth delta0.

    Both depend only on (gamma, v_inf) and are shared by every beta so that
    continuation steps see a fixed chart layout. delta0 is 10% of the
    smallest clearance between a shock line and the far side of its sonic
    circle over the admissible beta range; k is the smallest power of two
    >= 8 for which the cutoff supports of the horizontal blend are
    separated by the shifted shock lines at every sampled beta.
    """
    key = (float(gamma).hex(), float(v_inf).hex())
    with _SETUP_LOCK:
        hit = _SETUP_CACHE.get(key)
    if hit is not None:
        return hit

    b_d = beta_detach(gamma, v_inf)
    betas = np.linspace(0.0, b_d - 1e-4, 49)
    geos = [landmarks(gamma, v_inf, b) for b in betas]
    b_s = beta_sonic(gamma, v_inf)

    def cbar(geo):
        if geo.beta < b_s:
            return geo.c_O
        return geo.q_O / math.sin(geo.beta)

    margin_n = v_inf * (geos[0].c_N - geos[0].eta_N)
    margin_o = min(v_inf / math.cos(g.beta) * g.q_O for g in geos)
    delta0 = 0.1 * min(margin_n, margin_o)

    k = 8
    while k <= _K_MAX:
        ok = True
        for geo in geos:
            l_o = cbar(geo)
            q_d = geo.q_O - delta0 * math.cos(geo.beta) / v_inf
            r_o = l_o * (1.0 - 3.0 / k)
            r_n = geo.c_N * (1.0 - 3.0 / k)
            top_n = geo.eta_N + delta0 / v_inf
            if r_o <= q_d or r_n <= top_n:
                ok = False
                break
            if math.cos(geo.beta) * math.sqrt(r_o**2 - q_d**2) < 3.0 * l_o / k:
                ok = False
                break
            if math.sqrt(r_n**2 - top_n**2) < 3.0 * geo.c_N / k:
                ok = False
                break
        if ok:
            break
        k *= 2
    if k > _K_MAX:
        raise ConfigurationError(
            "no admissible chart resolution k below the hard cap"
        )
    with _SETUP_LOCK:
        _SETUP_CACHE[key] = (k, delta0)
    return k, delta0


@dataclass
class ShockGraph:
    """Shock position t' = g(s) over the square abscissa s in [-1, 1].

    Values are stored on a uniform node set and interpolated with a
    not-a-knot cubic spline. g must be nonnegative, and positive in the
    open interval; g(-1) = 0 occurs exactly in the degenerate (sonic-point)
    topology.
    """

    s_nodes: np.ndarray
    g_values: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self.s_nodes = np.asarray(self.s_nodes, dtype=float)
        self.g_values = np.asarray(self.g_values, dtype=float)
        if self.s_nodes.shape != self.g_values.shape:
            raise DomainError("shock graph nodes and values differ in shape")
        if np.any(self.g_values < -1e-14):
            raise DegenerateGraphError("shock graph must be nonnegative")
        if np.any(self.g_values[1:-1] <= 0.0):
            raise DegenerateGraphError(
                "shock graph vanishes at an interior node"
            )
        self._spline = CubicSpline(self.s_nodes, self.g_values)

    def __call__(self, s):
        return self._spline(s)

    def deriv(self, s):
        return self._spline(s, 1)

    @property
    def g_left(self):
        return float(self.g_values[0])

    @property
    def g_right(self):
        return float(self.g_values[-1])


class MappedDomain:
    """Immutable chart collection for one (gamma, v_inf, beta) configuration.

    Provides the local sonic coordinates, the strip map G1 with its inverse,
    the square maps, and the background interpolant phi*_beta. All methods
    accept scalars or arrays and are reentrant.

    Attributes
    ----------
    geo : ConfigGeometry
        Landmark geometry of the configuration.
    cbar_O : float
        Distance from the O-circle center to the O-side boundary arc: the
        sonic radius c_O below the sonic angle, |O_O P_beta| above it.
    s_beta : float
        Left endpoint u_O - cbar_O of the strip abscissa; the right endpoint
        is c_N.
    k : int
        Chart resolution; cutoff supports scale like 1/k.
    delta0 : float
        Arc extension depth (level offset of the shifted shock lines).
    """

    def __init__(self, gamma, v_inf, beta):
        self.gamma = float(gamma)
        self.v_inf = float(v_inf)
        self.beta = float(beta)
        self.geo = landmarks(gamma, v_inf, beta)
        self.beta_s = beta_sonic(gamma, v_inf)
        geo = self.geo
        if beta < self.beta_s:
            self.cbar_O = geo.c_O
        else:
            self.cbar_O = geo.q_O / math.sin(beta)
        self.s_beta = geo.u_O - self.cbar_O
        self.k, self.delta0 = _chart_setup(gamma, v_inf)

        # Shifted-shock data for the horizontal cutoffs.
        self.q_O_delta = geo.q_O - self.delta0 * math.cos(beta) / v_inf
        self.u_O_delta = geo.u_O - self.q_O_delta * math.sin(beta)

        # Background interpolant thresholds. At beta = 0 the two downstream
        # potentials coincide and phi* = phi_N everywhere.
        if beta > 0.0:
            self.xi1_I = -(geo.xi2_beta - geo.eta_N) / math.tan(beta)
            xi1_p1 = geo.P1[0]
            self._chi_hi = self.xi1_I
            self._chi_lo = self.xi1_I - (self.xi1_I - xi1_p1) / 10.0
        else:
            self.xi1_I = 0.0
            self._chi_lo, self._chi_hi = -1.0, 0.0

    # -- local polar coordinates ---------------------------------------------

    def xy_local(self, point, arc):
        """Arc-adapted coordinates (x, y) about a sonic circle.

        x is the inward offset from the sonic radius, y the polar angle
        measured from the wall on the domain side: (c_N - r, theta) about
        the origin for the N side and (c_O - r, pi - theta) about
        (u_O, 0) for the O side.

        Parameters
        ----------
        point : array_like
            Physical coordinates (xi1, xi2); the last axis has length 2.
        arc : {"O-side", "N-side"}

        Raises
        ------
        SingularDirectionError
            If the point coincides with the circle center.
        """
        p = np.asarray(point, dtype=float)
        xi1, xi2 = p[..., 0], p[..., 1]
        if arc == "N-side":
            r = np.hypot(xi1, xi2)
            if np.any(r == 0.0):
                raise SingularDirectionError("angle undefined at the center")
            return self.geo.c_N - r, np.arctan2(xi2, xi1)
        if arc == "O-side":
            dx = xi1 - self.geo.u_O
            r = np.hypot(dx, xi2)
            if np.any(r == 0.0):
                raise SingularDirectionError("angle undefined at the center")
            return self.geo.c_O - r, np.pi - np.arctan2(xi2, dx)
        raise DomainError(f"unknown arc {arc!r}")

    def xy_local_inverse(self, x, y, arc):
        """Physical point from arc-adapted coordinates, inverse of
        :meth:`xy_local`."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if arc == "N-side":
            r = self.geo.c_N - x
            return np.stack(
                [r * np.cos(y), r * np.sin(y)], axis=-1
            )
        if arc == "O-side":
            r = self.geo.c_O - x
            th = np.pi - y
            return np.stack(
                [self.geo.u_O + r * np.cos(th), r * np.sin(th)], axis=-1
            )
        raise DomainError(f"unknown arc {arc!r}")

    # -- cutoff profiles ------------------------------------------------------

    def _chi_O(self, xi1):
        return 1.0 - smoothstep(
            xi1, self.u_O_delta - 2.0 * self.cbar_O / self.k, self.u_O_delta
        )

    def _chi_N(self, xi1):
        c = self.geo.c_N
        return smoothstep(xi1, c / self.k, 2.0 * c / self.k)

    def _zeta_O(self, r):
        c = self.cbar_O
        return smoothstep(r, c * (1.0 - 3.0 / self.k), c * (1.0 - 2.0 / self.k))

    def _zeta_N(self, r):
        c = self.geo.c_N
        return smoothstep(r, c * (1.0 - 3.0 / self.k), c * (1.0 - 2.0 / self.k))

    def _tchi_O(self, s):
        u, c, k = self.geo.u_O, self.cbar_O, self.k
        return 1.0 - smoothstep(s, u - c * (1.0 - 0.5 / k), u - c * (1.0 - 1.0 / k))

    def _tchi_N(self, s):
        c, k = self.geo.c_N, self.k
        return smoothstep(s, c * (1.0 - 1.0 / k), c * (1.0 - 0.5 / k))

    # -- strip map G1 ----------------------------------------------------------

    def h1(self, xi1, xi2):
        """Horizontal strip coordinate s' of F1.

        Equals u_O - r within 1/k of the O-side arc, r within 1/k of the
        N-side arc, and xi1 away from both; on the wall h1(xi1, 0) = xi1
        identically.
        """
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        r_o = np.hypot(xi1 - self.geo.u_O, xi2)
        r_n = np.hypot(xi1, xi2)
        co = self._chi_O(xi1)
        cn = self._chi_N(xi1)
        zo = self._zeta_O(r_o)
        zn = self._zeta_N(r_n)
        left = (self.geo.u_O - r_o) * zo + (1.0 - zo) * xi1
        right = r_n * zn + (1.0 - zn) * xi1
        return co * left + (1.0 - co) * ((1.0 - cn) * xi1 + cn * right)

    def dh1_dxi1(self, xi1, xi2):
        """Partial derivative of h1 in xi1; positive throughout the strip."""
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        u = self.geo.u_O
        r_o = np.hypot(xi1 - u, xi2)
        r_n = np.hypot(xi1, xi2)
        r_o = np.where(r_o == 0.0, 1e-300, r_o)
        r_n = np.where(r_n == 0.0, 1e-300, r_n)
        k = self.k
        co = self._chi_O(xi1)
        dco = -smoothstep_d(
            xi1, self.u_O_delta - 2.0 * self.cbar_O / k, self.u_O_delta
        )
        cn = self._chi_N(xi1)
        dcn = smoothstep_d(xi1, self.geo.c_N / k, 2.0 * self.geo.c_N / k)
        zo = self._zeta_O(r_o)
        dzo = smoothstep_d(
            r_o, self.cbar_O * (1.0 - 3.0 / k), self.cbar_O * (1.0 - 2.0 / k)
        )
        zn = self._zeta_N(r_n)
        dzn = smoothstep_d(
            r_n, self.geo.c_N * (1.0 - 3.0 / k), self.geo.c_N * (1.0 - 2.0 / k)
        )
        dro = (xi1 - u) / r_o
        drn = xi1 / r_n
        left = (u - r_o) * zo + (1.0 - zo) * xi1
        dleft = dzo * dro * (u - r_o - xi1) - zo * dro + (1.0 - zo)
        right = r_n * zn + (1.0 - zn) * xi1
        dright = dzn * drn * (r_n - xi1) + zn * drn + (1.0 - zn)
        mid = (1.0 - cn) * xi1 + cn * right
        dmid = (1.0 - cn) + dcn * (right - xi1) + cn * dright
        return dco * (left - mid) + co * dleft + (1.0 - co) * dmid

    def h2(self, s, xi2):
        """Vertical strip coordinate t' of F2.

        The polar angle asin(xi2 / r) within 1/(2k) of either strip end,
        xi2 in between; strictly increasing in xi2.
        """
        s = np.asarray(s, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        to = self._tchi_O(s)
        tn = self._tchi_N(s)
        r_o = np.where(to > 0.0, self.geo.u_O - s, 1.0)
        r_n = np.where(tn > 0.0, s, 1.0)
        a_o = np.arcsin(np.clip(xi2 / r_o, -1.0, 1.0))
        a_n = np.arcsin(np.clip(xi2 / r_n, -1.0, 1.0))
        return to * a_o + (1.0 - to) * ((1.0 - tn) * xi2 + tn * a_n)

    def dh2_dxi2(self, s, xi2):
        """Partial derivative of h2 in xi2; bounded below by a positive
        constant on the strip."""
        s = np.asarray(s, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        to = self._tchi_O(s)
        tn = self._tchi_N(s)
        r_o = np.where(to > 0.0, self.geo.u_O - s, 1.0)
        r_n = np.where(tn > 0.0, s, 1.0)
        d_o = 1.0 / np.sqrt(np.maximum(r_o * r_o - xi2 * xi2, 1e-300))
        d_n = 1.0 / np.sqrt(np.maximum(r_n * r_n - xi2 * xi2, 1e-300))
        return to * d_o + (1.0 - to) * ((1.0 - tn) + tn * d_n)

    def map_G1(self, point):
        """Strip coordinates (s', t') of a physical point."""
        p = np.asarray(point, dtype=float)
        xi1, xi2 = p[..., 0], p[..., 1]
        sp = self.h1(xi1, xi2)
        return sp, self.h2(sp, xi2)

    def map_G1_inverse(self, sp, tp):
        """Physical point from strip coordinates; inverse of :meth:`map_G1`.

        Solves the triangular system: first xi2 from the monotone vertical
        blend at fixed s', then xi1 from the monotone horizontal blend at
        fixed xi2, both by bisection to machine precision.
        """
        sp = np.asarray(sp, dtype=float)
        tp = np.asarray(tp, dtype=float)
        shape = np.broadcast_shapes(sp.shape, tp.shape)
        sp = np.broadcast_to(sp, shape).astype(float)
        tp = np.broadcast_to(tp, shape).astype(float)

        # Vertical solve: bracket below by 0 and above by the tightest
        # active chart radius (the angle saturates at pi/2 there).
        to = self._tchi_O(sp)
        tn = self._tchi_N(sp)
        cap = np.full(shape, np.inf)
        cap = np.where(to > 0.0, np.minimum(cap, self.geo.u_O - sp), cap)
        cap = np.where(tn > 0.0, np.minimum(cap, sp), cap)
        r_act = np.where(np.isfinite(cap), cap, 1.0)
        hi = np.minimum(cap * (1.0 - 1e-13), tp * np.maximum(1.0, r_act) + 1e-12)
        if np.any(self.h2(sp, hi) < tp):
            raise DomainError("strip ordinate outside the chart range")
        xi2 = bisect_vec(lambda z: self.h2(sp, z) - tp, np.zeros(shape), hi,
                         iters=54)

        lo = np.full(shape, self.s_beta - self.geo.c_N - 1.0)
        hi1 = np.full(shape, self.geo.c_N + 1.0)
        xi1 = bisect_vec(lambda z: self.h1(z, xi2) - sp, lo, hi1, iters=54)
        return np.stack([xi1, xi2], axis=-1)

    # -- square map ------------------------------------------------------------

    def to_square_s(self, sp):
        """Affine strip abscissa to s in [-1, 1]."""
        return 2.0 * (np.asarray(sp, dtype=float) - self.s_beta) / (
            self.geo.c_N - self.s_beta
        ) - 1.0

    def from_square_s(self, s):
        """Inverse of :meth:`to_square_s`."""
        return self.s_beta + 0.5 * (np.asarray(s, dtype=float) + 1.0) * (
            self.geo.c_N - self.s_beta
        )

    def map_to_square(self, point, shock):
        """Square coordinates (s, t) of a physical point under a given
        shock graph; the shock maps to t = 1 and the wall to t = 0.

        Raises
        ------
        DegenerateGraphError
            If the graph vanishes at the required interior abscissa.
        """
        sp, tp = self.map_G1(point)
        s = self.to_square_s(sp)
        g = shock(s)
        g_arr = np.asarray(g, dtype=float)
        interior = np.abs(np.asarray(s)) < 1.0
        if np.any((g_arr <= 0.0) & interior):
            raise DegenerateGraphError("shock graph vanishes inside (-1, 1)")
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(g_arr > 0.0, tp / np.where(g_arr > 0.0, g_arr, 1.0), 0.0)
        return s, t

    def map_from_square(self, s, t, shock):
        """Physical point from square coordinates; inverse of
        :meth:`map_to_square`."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        sp = self.from_square_s(s)
        tp = t * np.asarray(shock(s), dtype=float)
        return self.map_G1_inverse(sp, tp)

    # -- uniform potentials and the background interpolant ----------------------

    def phi_inf(self, xi1, xi2):
        """Incoming pseudo-potential."""
        return -0.5 * (xi1**2 + xi2**2) - self.v_inf * xi2

    def grad_phi_inf(self, xi1, xi2):
        return np.stack(
            [-np.asarray(xi1, dtype=float), -(xi2 + self.v_inf)], axis=-1
        )

    def phi_N(self, xi1, xi2):
        """Normal-shock downstream pseudo-potential."""
        return -0.5 * (xi1**2 + xi2**2) - self.v_inf * self.geo.eta_N

    def phi_O(self, xi1, xi2):
        """Oblique-shock downstream pseudo-potential."""
        return (
            -0.5 * (xi1**2 + xi2**2)
            + self.geo.u_O * xi1
            - self.v_inf * self.geo.xi2_beta
        )

    def _chi_star(self, xi1, order=0):
        if self.beta == 0.0:
            return np.zeros_like(np.asarray(xi1, dtype=float))
        if order == 0:
            return 1.0 - smoothstep(xi1, self._chi_lo, self._chi_hi)
        if order == 1:
            return -smoothstep_d(xi1, self._chi_lo, self._chi_hi)
        return -smoothstep_d2(xi1, self._chi_lo, self._chi_hi)

    def _d_ON(self, xi1):
        """phi_O - phi_N: linear in xi1 only."""
        return (
            self.geo.u_O * np.asarray(xi1, dtype=float)
            - self.v_inf * self.geo.xi2_beta
            + self.v_inf * self.geo.eta_N
        )

    def phi_star(self, xi1, xi2):
        """Background interpolant: phi_O left of the switching station,
        phi_N right of it, blended over a band of a tenth of the distance
        to the O-side shock endpoint. Never exceeds max(phi_O, phi_N)."""
        c = self._chi_star(xi1)
        return self.phi_N(xi1, xi2) + c * self._d_ON(xi1)

    def grad_phi_star(self, xi1, xi2):
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        c = self._chi_star(xi1)
        dc = self._chi_star(xi1, 1)
        g1 = -xi1 + dc * self._d_ON(xi1) + c * self.geo.u_O
        g2 = -xi2 + np.zeros_like(c)
        return np.stack([np.broadcast_to(g1, g2.shape), g2], axis=-1)

    def hess_phi_star_11(self, xi1):
        """Second xi1-derivative of phi*; the only Hessian entry that
        differs from the uniform-state value -delta_ij."""
        c = self._chi_star(xi1)
        dc = self._chi_star(xi1, 1)
        d2c = self._chi_star(xi1, 2)
        return -1.0 + d2c * self._d_ON(xi1) + 2.0 * dc * self.geo.u_O

    def w_inf(self, sp, tp):
        """Shock indicator (phi_inf - phi*) pulled back to the strip.

        Independent of any shock graph; its per-column root in t' is the
        background shock position.
        """
        xi = self.map_G1_inverse(sp, tp)
        return self.phi_inf(xi[..., 0], xi[..., 1]) - self.phi_star(
            xi[..., 0], xi[..., 1]
        )


# -- extension above the shock graph ------------------------------------------


def _psi_coefficients():
    """Coefficients of the quartic extension kernel on [1, 2].

    Unique polynomial with zero boundary values, unit mass, and vanishing
    first and second moments; the moment conditions make the extension
    reproduce quadratic polynomials exactly. The 5x5 linear system
    (p(1) = p(2) = 0, int p = 1, int x p = int x^2 p = 0) has an exact
    integer solution, verified below in rational arithmetic because the
    monomial system is too ill-conditioned for a trustworthy float check.
    """
    from fractions import Fraction

    coef = [-20880, 59400, -61800, 27900, -4620]
    if sum(coef) != 0 or sum(c * 2**i for i, c in enumerate(coef)) != 0:
        raise ConfigurationError("extension kernel endpoints are nonzero")
    for m in range(3):
        mom = sum(
            c * Fraction(2 ** (i + m + 1) - 1, i + m + 1)
            for i, c in enumerate(coef)
        )
        if mom != (1 if m == 0 else 0):
            raise ConfigurationError(
                "extension kernel moments failed to verify"
            )
    return np.array(coef, dtype=float)


_PSI_COEF = _psi_coefficients()

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(12)
_LAM = 1.5 + 0.5 * _GAUSS_X
_WTS = 0.5 * _GAUSS_W * np.polyval(_PSI_COEF[::-1], _LAM)


def psi_kernel(lam):
    """Extension kernel: quartic on [1, 2], zero elsewhere."""
    lam = np.asarray(lam, dtype=float)
    inside = (lam >= 1.0) & (lam <= 2.0)
    return np.where(inside, np.polyval(_PSI_COEF[::-1], lam), 0.0)


def regularized_distance(tp, g):
    """Smooth proxy for the distance above the region {t' < g}.

    (2/3) max(t' - g, 0): sandwiched between half and one-and-a-half times
    the true distance whenever the graph slope stays below 2.
    """
    return (2.0 / 3.0) * np.maximum(np.asarray(tp, dtype=float) - g, 0.0)


class ExtensionOperator:
    """Continues a one-column field from {t' <= g} to {t' <= (1+kappa) g}.

    The extension at t' > g averages the field at mirrored depths
    t' - lam * delta*, lam in [1, 2], against the moment-matched kernel,
    where delta* = 2 (t' - g); samples land inside [g - 3(t'-g), g - (t'-g)].
    The operator is linear in the field, is the identity below the graph,
    and reproduces polynomials of degree <= 2 in t' exactly.

    Parameters
    ----------
    kappa : float
        Relative collar height. Must not exceed 2/9 so that all kernel
        samples stay within the lower two thirds of the column, keeping
        the interpolation stencil away from the extrapolated region.
    """

    def __init__(self, kappa=0.2):
        if not 0.0 < kappa <= 2.0 / 9.0:
            raise ConfigurationError(
                f"extension collar kappa={kappa} outside (0, 2/9]"
            )
        self.kappa = float(kappa)

    def extend_column(self, t_nodes, values, g):
        """Extension of one column sampled at t_nodes in [0, g].

        Returns a vectorized callable of t'; below g it evaluates the
        not-a-knot cubic spline through the samples, above g the kernel
        average of the same spline.
        """
        t_nodes = np.asarray(t_nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if t_nodes[-1] < g - 1e-12:
            raise DomainError("column samples do not reach the shock graph")
        spline = CubicSpline(t_nodes, values)
        kappa = self.kappa

        def ev(tp):
            tp = np.asarray(tp, dtype=float)
            scalar = tp.ndim == 0
            tp = np.atleast_1d(tp)
            if np.any(tp > (1.0 + kappa) * g + 1e-12):
                raise DomainError("evaluation above the extension collar")
            out = np.empty_like(tp)
            below = tp <= g
            out[below] = spline(tp[below])
            if np.any(~below):
                ta = tp[~below]
                dstar = 2.0 * (ta - g)
                samples = ta[:, None] - _LAM[None, :] * dstar[:, None]
                out[~below] = spline(samples) @ _WTS
            return out[0] if scalar else out

        return ev
