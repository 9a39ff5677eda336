"""Shock-fitting solver for the self-similar transonic reflection problem.

The subsonic region behind the reflected shock is mapped onto the fixed
square (-1, 1) x (0, 1); the unknowns are the potential perturbation
u = phi - phi*_beta sampled on a tensor grid, plus the shock graph g that
defines the map. The two are relaxed alternately:

* for a frozen graph, the quasilinear pseudo-potential equation is solved
  by damped Newton on a second-order finite-difference discretization with
  the gradient-jump (Rankine-Hugoniot) condition on the shock row, a slip
  condition on the wall row, and homogeneous Dirichlet data on the sonic
  sides;
* the graph is then re-rooted column by column from the level-set equation
  w_inf = E_g(u), where E_g is the moment-matched extension of the field
  above the current graph.

A continuation driver walks the incidence angle beta up from the exactly
known normal-reflection solution, halving the step on failure.

Interior discretization. Away from the sonic arcs the residual is assembled
in physical coordinates: second derivatives of u are pushed through the
square-to-plane map by the chain rule, with the metric obtained by finite
differences of the nodal coordinate arrays. Within the exact-chart strips
adjacent to s = +-1 the residual uses the local polar form in (x, y) =
(sonic offset, angle), whose coefficients degenerate linearly in x; there
the elliptic cutoff zeta1 caps psi_x / x so the linearized operator stays
elliptic off the solution set. The cutoff is inactive at an admissible
solution and its activation is reported, never silently absorbed.
"""

import math
import time

import numpy as np
from dataclasses import dataclass, field as dfield
from scipy.optimize import brentq
from scipy.interpolate import CubicSpline
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from ._util import bisect_vec
from .errors import DomainError, NumericalError, SingularDirectionError
from .gas_model import GasModel
from .geometry_map import ExtensionOperator, MappedDomain, ShockGraph
from .selfsim_states import beta_detach

MU0 = 0.5

_COLORING_CACHE = {}


def _zeta1(s, gamma):
    """Elliptic cutoff: identity for |s| <= (2 - mu0/5)/(1+gamma), saturated
    at (2 - mu0/10)/(1+gamma) by |s| = 2/(1+gamma), C^2 monotone between."""
    a = (2.0 - MU0 / 5.0) / (1.0 + gamma)
    b = 2.0 / (1.0 + gamma)
    q = np.minimum(np.abs(np.asarray(s, dtype=float)), b)
    t = np.clip((q - a) / (b - a), 0.0, 1.0)
    ramp_int = t**4 * (2.5 + t * (t - 3.0))
    return np.sign(s) * (q - (b - a) * ramp_int)


def _zeta1_active(s, gamma):
    a = (2.0 - MU0 / 5.0) / (1.0 + gamma)
    return np.abs(np.asarray(s, dtype=float)) > a


@dataclass
class SolutionField:
    """Discrete solution state on the fixed square.

    u holds the potential perturbation (phi - phi*_beta pulled back to the
    square) at the (ns+1) x (nt+1) tensor nodes, shock the graph that
    closes the map.
    """

    gamma: float
    v_inf: float
    beta: float
    s: np.ndarray
    t: np.ndarray
    u: np.ndarray
    shock: ShockGraph
    domain: MappedDomain
    newton_info: dict = dfield(default_factory=dict)

    @property
    def ns(self):
        return len(self.s) - 1

    @property
    def nt(self):
        return len(self.t) - 1


@dataclass
class SolveReport:
    """Outcome summary of one full free-boundary solve."""

    converged: bool
    beta_target: float
    beta_reached: float
    continuation_steps: int
    outer_iterations: int
    newton_iterations: int
    shock_move: float
    interior_residual: float
    ellipticity_flags: int
    cutoff_activations: int
    density_clamps: int
    transversality_min: float
    stalled: bool
    wall_time: float

    def to_dict(self):
        return {
            "beta_reached": float(self.beta_reached),
            "beta_target": float(self.beta_target),
            "continuation_steps": int(self.continuation_steps),
            "converged": bool(self.converged),
            "cutoff_activations": int(self.cutoff_activations),
            "density_clamps": int(self.density_clamps),
            "ellipticity_flags": int(self.ellipticity_flags),
            "interior_residual": float(self.interior_residual),
            "newton_iterations": int(self.newton_iterations),
            "outer_iterations": int(self.outer_iterations),
            "shock_move": float(self.shock_move),
            "stalled": bool(self.stalled),
            "transversality_min": float(self.transversality_min),
            "wall_time": float(self.wall_time),
        }


def _d2_axis(a, h, axis):
    out = np.empty_like(a)
    sl = [slice(None)] * a.ndim
    lo, mid, hi = slice(None, -2), slice(1, -1), slice(2, None)

    def ix(s):
        sl2 = list(sl)
        sl2[axis] = s
        return tuple(sl2)

    out[ix(mid)] = (a[ix(hi)] - 2.0 * a[ix(mid)] + a[ix(lo)]) / (h * h)
    out[ix(slice(0, 1))] = out[ix(slice(1, 2))]
    out[ix(slice(-1, None))] = out[ix(slice(-2, -1))]
    return out


def _dcross(a, hs, ht):
    out = np.zeros_like(a)
    out[1:-1, 1:-1] = (
        a[2:, 2:] - a[2:, :-2] - a[:-2, 2:] + a[:-2, :-2]
    ) / (4.0 * hs * ht)
    out[0, :] = out[1, :]
    out[-1, :] = out[-2, :]
    out[:, 0] = out[:, 1]
    out[:, -1] = out[:, -2]
    return out


class _Assembler:
    """Frozen-graph discrete operator on one grid.

    Precomputes nodal physical coordinates, the finite-difference metric of
    the square-to-plane map, the background-interpolant data, and the
    column partition into exact polar strips versus the mapped middle.
    """

    def __init__(self, domain, shock, s, t, shock_mode="gsh",
                 top_values=None):
        self.domain = domain
        self.shock = shock
        self.s = np.asarray(s, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.ns = len(self.s) - 1
        self.nt = len(self.t) - 1
        self.ds = self.s[1] - self.s[0]
        self.dt = self.t[1] - self.t[0]
        self.gamma = domain.gamma
        self.bernoulli = 0.5 * domain.v_inf**2
        self.shock_mode = shock_mode
        self.top_values = top_values
        gas = GasModel(domain.gamma, bernoulli=self.bernoulli)
        floor = gas.density_floor()
        self.c2_floor = (
            floor ** (domain.gamma - 1.0) if domain.gamma > 1.0 else 1.0
        )
        self.ln_floor = math.log(floor)
        self.flags = {"ellipticity": 0, "cutoff": 0, "clamp": 0}

        S = np.broadcast_to(self.s[:, None], (self.ns + 1, self.nt + 1))
        T = np.broadcast_to(self.t[None, :], (self.ns + 1, self.nt + 1))
        xi = domain.map_from_square(S, T, shock)
        self.X = xi[..., 0]
        self.Y = xi[..., 1]

        xs = np.gradient(self.X, self.ds, axis=0, edge_order=2)
        xt = np.gradient(self.X, self.dt, axis=1, edge_order=2)
        ys = np.gradient(self.Y, self.ds, axis=0, edge_order=2)
        yt = np.gradient(self.Y, self.dt, axis=1, edge_order=2)
        det = xs * yt - xt * ys
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        # inverse metric: derivatives of (s, t) with respect to (xi1, xi2)
        self.sx = yt / det
        self.sy = -xt / det
        self.tx = -ys / det
        self.ty = xs / det

        xss = _d2_axis(self.X, self.ds, 0)
        xtt = _d2_axis(self.X, self.dt, 1)
        xst = _dcross(self.X, self.ds, self.dt)
        yss = _d2_axis(self.Y, self.ds, 0)
        ytt = _d2_axis(self.Y, self.dt, 1)
        yst = _dcross(self.Y, self.ds, self.dt)

        # second derivatives of the inverse map:
        # a_m,ij = -A_mp xi_p,qr A_qi A_rj  summed over map coordinates
        A = ((self.sx, self.sy), (self.tx, self.ty))
        Xqr = (
            ((xss, xst), (xst, xtt)),
            ((yss, yst), (yst, ytt)),
        )
        # contract: B_p,ij = sum_qr xi_p,qr A_qi A_rj
        B = [[[None, None], [None, None]] for _ in range(2)]
        for p in range(2):
            for i in range(2):
                for j in range(2):
                    acc = 0.0
                    for q in range(2):
                        for r in range(2):
                            acc = acc + Xqr[p][q][r] * A[q][i] * A[r][j]
                    B[p][i][j] = acc
        self.curv = [[[None, None], [None, None]] for _ in range(2)]
        Arows = ((self.sx, self.sy), (self.tx, self.ty))
        for m in range(2):
            for i in range(2):
                for j in range(2):
                    self.curv[m][i][j] = -(
                        Arows[m][0] * B[0][i][j] + Arows[m][1] * B[1][i][j]
                    )

        # background interpolant data at the nodes
        self.pstar = domain.phi_star(self.X, self.Y)
        gstar = domain.grad_phi_star(self.X, self.Y)
        # phi* - phi_N and its xi1-derivatives (the xi2 parts cancel)
        self.dstar1 = gstar[..., 0] + self.X
        self.dstar11 = domain.hess_phi_star_11(self.X) + 1.0

        # column partition
        sp = domain.from_square_s(self.s)
        k = domain.k
        in_n = sp >= domain.geo.c_N * (1.0 - 0.5 / k)
        if domain.beta < domain.beta_s:
            in_o = sp <= domain.s_beta + domain.cbar_O / (2.0 * k)
        else:
            in_o = np.zeros_like(in_n)
        interior = np.zeros_like(in_n)
        interior[1:-1] = True
        self.cols_n = np.where(in_n & interior)[0]
        self.cols_o = np.where(in_o & interior)[0]
        self.cols_mid = np.where(~in_n & ~in_o & interior)[0]

        self.J_s = 0.5 * (domain.geo.c_N - domain.s_beta)
        g_all = shock(self.s)
        gp_all = shock.deriv(self.s)
        gpp_all = shock._spline(self.s, 2)
        self.g_cols = g_all
        self.gp_cols = gp_all
        self.gpp_cols = gpp_all
        self.strips = {}
        for name, cols in (("N", self.cols_n), ("O", self.cols_o)):
            if len(cols) == 0:
                continue
            if name == "N":
                c_c = domain.geo.c_N
                x = domain.geo.c_N - sp[cols]
                s_x = -1.0 / self.J_s
                qsign = 1.0
            else:
                c_c = domain.geo.c_O
                x = sp[cols] - (domain.geo.u_O - domain.geo.c_O)
                s_x = 1.0 / self.J_s
                qsign = -1.0
            self.strips[name] = {
                "cols": cols,
                "c_c": c_c,
                "x": x,
                "s_x": s_x,
                "qsign": qsign,
                "g": g_all[cols],
                "gp": gp_all[cols],
                "gpp": gpp_all[cols],
            }

        # incoming gradient on the shock row
        gi = domain.grad_phi_inf(self.X[:, -1], self.Y[:, -1])
        self.dphi_inf_top = gi

        self._build_coloring()

    # -- thermodynamics ------------------------------------------------------

    def _rho_c2(self, speed2, phi):
        """Density and squared sound speed from Bernoulli, floor-clamped."""
        z = self.bernoulli - 0.5 * speed2 - phi
        if self.gamma == 1.0:
            rho = np.exp(np.maximum(z, self.ln_floor))
            self.flags["clamp"] += int(np.count_nonzero(z < self.ln_floor))
            return rho, np.ones_like(rho)
        arg = 1.0 + (self.gamma - 1.0) * z
        clamped = arg < self.c2_floor
        self.flags["clamp"] += int(np.count_nonzero(clamped))
        c2 = np.maximum(arg, self.c2_floor)
        rho = c2 ** (1.0 / (self.gamma - 1.0))
        return rho, c2

    # -- residual ------------------------------------------------------------

    def _u_derivs(self, u):
        us = np.gradient(u, self.ds, axis=0, edge_order=2)
        ut = np.gradient(u, self.dt, axis=1, edge_order=2)
        uss = _d2_axis(u, self.ds, 0)
        utt = _d2_axis(u, self.dt, 1)
        ust = _dcross(u, self.ds, self.dt)
        return us, ut, uss, utt, ust

    def residual(self, u, forcing=None):
        """Nonlinear residual on the full grid.

        PDE rows at interior nodes, slip row at t = 0, shock condition (or
        Dirichlet data) at t = 1, identity rows u = 0 at s = +-1.

        Wild line-search trial states may overflow transiently; the
        resulting non-finite residual norms are rejected by the caller.
        """
        with np.errstate(over="ignore", invalid="ignore"):
            return self._residual_impl(u, forcing)

    def _residual_impl(self, u, forcing=None):
        self.flags = {"ellipticity": 0, "cutoff": 0, "clamp": 0}
        ns, nt = self.ns, self.nt
        us, ut, uss, utt, ust = self._u_derivs(u)
        F = np.zeros_like(u)

        # mapped middle, full-grid vectorized then sliced
        sx, sy, tx, ty = self.sx, self.sy, self.tx, self.ty
        hx = us * sx + ut * tx + self.dstar1
        hy = us * sy + ut * ty
        hxx = (
            uss * sx * sx + 2.0 * ust * sx * tx + utt * tx * tx
            + us * self.curv[0][0][0] + ut * self.curv[1][0][0]
            + self.dstar11
        )
        hxy = (
            uss * sx * sy + ust * (sx * ty + tx * sy) + utt * tx * ty
            + us * self.curv[0][0][1] + ut * self.curv[1][0][1]
        )
        hyy = (
            uss * sy * sy + 2.0 * ust * sy * ty + utt * ty * ty
            + us * self.curv[0][1][1] + ut * self.curv[1][1][1]
        )
        p1 = hx - self.X
        p2 = hy - self.Y
        phi = u + self.pstar
        speed2 = p1 * p1 + p2 * p2
        rho, c2 = self._rho_c2(speed2, phi)
        Fmid = (
            (c2 - p1 * p1) * hxx
            - 2.0 * p1 * p2 * hxy
            + (c2 - p2 * p2) * hyy
        )
        jj = slice(1, nt)
        for i in self.cols_mid:
            F[i, jj] = Fmid[i, jj]
        self.flags["ellipticity"] += int(
            np.count_nonzero((c2 - speed2)[self.cols_mid][:, 1:nt] <= 0.0)
        )

        # exact polar strips
        for st in self.strips.values():
            cols = st["cols"]
            x = st["x"][:, None]
            s_x = st["s_x"]
            g = st["g"][:, None]
            gp = st["gp"][:, None]
            gpp = st["gpp"][:, None]
            tt = self.t[None, jj]
            t_x = tt * gp * (-s_x) / g
            t_y = 1.0 / g
            t_xx = -s_x * s_x * tt * (gpp / g - 2.0 * gp * gp / (g * g))
            t_xy = -gp * s_x / (g * g)
            cu_s = us[cols][:, jj]
            cu_t = ut[cols][:, jj]
            cu_ss = uss[cols][:, jj]
            cu_tt = utt[cols][:, jj]
            cu_st = ust[cols][:, jj]
            psi = u[cols][:, jj]
            psi_x = cu_s * s_x + cu_t * t_x
            psi_y = cu_t * t_y
            psi_xx = (
                cu_ss * s_x * s_x + 2.0 * cu_st * s_x * t_x
                + cu_tt * t_x * t_x + cu_t * t_xx
            )
            psi_xy = cu_st * s_x * t_y + cu_tt * t_x * t_y + cu_t * t_xy
            psi_yy = cu_tt * t_y * t_y
            r = st["c_c"] - x
            q_t = psi_y / r
            q2 = q_t * q_t
            phi_r = -psi_x - r
            gm1 = self.gamma - 1.0
            c2s = st["c_c"] ** 2 + gm1 * (
                -r * psi_x - 0.5 * psi_x * psi_x - 0.5 * q2 - psi
            )
            ratio = psi_x / x
            zx = x * _zeta1(ratio, self.gamma)
            self.flags["cutoff"] += int(
                np.count_nonzero(_zeta1_active(ratio, self.gamma))
            )
            phir_cut = -zx - r
            c2_cut = st["c_c"] ** 2 + gm1 * (
                -r * zx - 0.5 * zx * zx - 0.5 * q2 - psi
            )
            Fst = (
                (c2_cut - phir_cut * phir_cut) * (psi_xx - 1.0)
                + 2.0 * phi_r * q_t * (psi_xy / r + psi_y / (r * r))
                + (c2s - q2) * (psi_yy / (r * r) - psi_x / r - 1.0)
                + 2.0 * c2s - phi_r * phi_r - q2
            )
            F[cols[:, None], np.arange(1, nt)[None, :]] = Fst
            self.flags["ellipticity"] += int(
                np.count_nonzero(c2_cut - phir_cut * phir_cut <= 0.0)
            )

        # slip condition on the wall row
        F[1:ns, 0] = (
            -3.0 * u[1:ns, 0] + 4.0 * u[1:ns, 1] - u[1:ns, 2]
        ) / (2.0 * self.dt)

        # shock row
        if self.shock_mode == "dirichlet":
            F[1:ns, nt] = u[1:ns, nt] - self.top_values[1:ns]
        else:
            p_top, z_top = self._top_gradient(u, us, ut)
            dinf = self.dphi_inf_top
            j1 = dinf[:, 0] - p_top[:, 0]
            j2 = dinf[:, 1] - p_top[:, 1]
            nrm = np.hypot(j1, j2)
            if np.any(nrm[1:ns] < 1e-12):
                raise SingularDirectionError(
                    "vanishing gradient jump on the shock row"
                )
            sp2 = p_top[:, 0] ** 2 + p_top[:, 1] ** 2
            rho_t, _ = self._rho_c2(sp2, z_top)
            F[1:ns, nt] = (
                (rho_t * p_top[:, 0] - dinf[:, 0]) * j1
                + (rho_t * p_top[:, 1] - dinf[:, 1]) * j2
            )[1:ns] / nrm[1:ns]

        # Dirichlet sides
        F[0, :] = u[0, :]
        F[ns, :] = u[ns, :]

        if forcing is not None:
            F[1:ns, 1:nt] -= forcing[1:ns, 1:nt]
        return F

    def _top_gradient(self, u, us, ut):
        """Physical pseudo-gradient and potential value on the shock row."""
        nt = self.nt
        us_t = us[:, nt]
        ut_t = (
            3.0 * u[:, nt] - 4.0 * u[:, nt - 1] + u[:, nt - 2]
        ) / (2.0 * self.dt)
        p1 = us_t * self.sx[:, nt] + ut_t * self.tx[:, nt] + self.dstar1[
            :, nt
        ] - self.X[:, nt]
        p2 = us_t * self.sy[:, nt] + ut_t * self.ty[:, nt] - self.Y[:, nt]
        p = np.stack([p1, p2], axis=-1)
        z = u[:, nt] + self.pstar[:, nt]
        for st in self.strips.values():
            cols = st["cols"]
            s_x = st["s_x"]
            g = st["g"]
            gp = st["gp"]
            t_x = gp * (-s_x) / g
            psi_x = us_t[cols] * s_x + ut_t[cols] * t_x
            psi_y = ut_t[cols] / g
            r = st["c_c"] - st["x"]
            phi_r = -psi_x - r
            q_t = st["qsign"] * psi_y / r
            theta = g if st["qsign"] > 0 else math.pi - g
            ct, stn = np.cos(theta), np.sin(theta)
            p[cols, 0] = phi_r * ct - q_t * stn
            p[cols, 1] = phi_r * stn + q_t * ct
        return p, z

    # -- Jacobian by colored finite differences --------------------------------

    def _build_coloring(self):
        ns, nt = self.ns, self.nt
        cached = _COLORING_CACHE.get((ns, nt))
        if cached is not None:
            self.color, self.color_entries, self.color_masks = cached
            return
        I, J = np.meshgrid(
            np.arange(ns + 1), np.arange(nt + 1), indexing="ij"
        )
        self.color = (I % 3) * 5 + (J % 5)
        flat = lambda i, j: i * (nt + 1) + j
        self.color_entries = []
        for c in range(15):
            rows = []
            cols = []
            ci, cj = c // 5, c % 5
            for di in (-1, 0, 1):
                for dj in (-2, -1, 0, 1, 2):
                    ni, nj = I + di, J + dj
                    ok = (
                        (ni >= 0) & (ni <= ns) & (nj >= 0) & (nj <= nt)
                        & (ni % 3 == ci) & (nj % 5 == cj)
                    )
                    rr = flat(I[ok], J[ok])
                    cc = flat(ni[ok], nj[ok])
                    rows.append(rr)
                    cols.append(cc)
            self.color_entries.append(
                (np.concatenate(rows), np.concatenate(cols))
            )
        self.color_masks = [
            (self.color == c).astype(float) for c in range(15)
        ]
        _COLORING_CACHE[(ns, nt)] = (
            self.color, self.color_entries, self.color_masks
        )

    def jacobian(self, u, F0, forcing=None):
        eps = 1e-7
        n = u.size
        rows_all, cols_all, vals_all = [], [], []
        for c in range(15):
            up = u + eps * self.color_masks[c]
            dF = (self.residual(up, forcing) - F0) / eps
            rows, cols = self.color_entries[c]
            rows_all.append(rows)
            cols_all.append(cols)
            vals_all.append(dF.ravel()[rows])
        J = csc_matrix(
            (
                np.concatenate(vals_all),
                (np.concatenate(rows_all), np.concatenate(cols_all)),
            ),
            shape=(n, n),
        )
        return J

    def newton(self, u0, tol, max_iter=30, forcing=None):
        """Damped Newton iteration to max-norm residual below tol."""
        u = np.array(u0, dtype=float)
        F = self.residual(u, forcing)
        nrm = np.linalg.norm(F.ravel())
        its = 0
        lu = None
        for _ in range(max_iter):
            if np.max(np.abs(F)) < tol:
                flags = dict(self.flags)
                return u, {"iterations": its, "residual": float(
                    np.max(np.abs(F))), "flags": flags}
            if lu is None:
                J = self.jacobian(u, F, forcing)
                lu = splu(J.tocsc())
            step = -lu.solve(F.ravel()).reshape(u.shape)
            lam = 1.0
            accepted = False
            nrm_old = nrm
            while lam >= 1.0 / 256.0:
                u_try = u + lam * step
                F_try = self.residual(u_try, forcing)
                n_try = np.linalg.norm(F_try.ravel())
                if n_try <= (1.0 - 0.25 * lam) * nrm:
                    u, F, nrm = u_try, F_try, n_try
                    accepted = True
                    break
                lam *= 0.5
            its += 1
            if not accepted:
                if lu is not None and its > 1:
                    lu = None  # refresh the Jacobian and retry once
                    J = self.jacobian(u, F, forcing)
                    lu = splu(J.tocsc())
                    step = -lu.solve(F.ravel()).reshape(u.shape)
                    u_try = u + step
                    F_try = self.residual(u_try, forcing)
                    n_try = np.linalg.norm(F_try.ravel())
                    if n_try <= 0.75 * nrm:
                        u, F, nrm = u_try, F_try, n_try
                        continue
                raise NumericalError(
                    "Newton line search failed",
                    residual=float(np.max(np.abs(F))),
                    iterations=its,
                )
            # keep the factorization while convergence is fast enough
            if nrm > 0.2 * nrm_old or its % 4 == 0:
                lu = None
        raise NumericalError(
            "Newton did not converge",
            residual=float(np.max(np.abs(F))),
            iterations=its,
        )

    # -- physical reconstruction ------------------------------------------------

    def physical_state(self, u):
        """phi, Dphi, rho, Mach at every node of the physical image."""
        us = np.gradient(u, self.ds, axis=0, edge_order=2)
        ut = np.gradient(u, self.dt, axis=1, edge_order=2)
        p1 = us * self.sx + ut * self.tx + self.dstar1 - self.X
        p2 = us * self.sy + ut * self.ty - self.Y
        phi = u + self.pstar
        speed2 = p1 * p1 + p2 * p2
        rho, c2 = self._rho_c2(speed2, phi)
        return {
            "xi1": self.X,
            "xi2": self.Y,
            "phi": phi,
            "dphi1": p1,
            "dphi2": p2,
            "rho": rho,
            "mach": np.sqrt(speed2 / c2),
        }


def _get_assembler(fieldobj, shock_mode="gsh", top_values=None):
    key = (id(fieldobj.shock), shock_mode)
    asm = fieldobj.newton_info.get("_asm_key")
    if asm is not None and asm[0] == key:
        return asm[1]
    a = _Assembler(
        fieldobj.domain, fieldobj.shock, fieldobj.s, fieldobj.t,
        shock_mode=shock_mode, top_values=top_values,
    )
    fieldobj.newton_info["_asm_key"] = (key, a)
    return a


def _tprime_cap(domain, sp):
    """Supremum of the strip ordinate reachable at abscissa sp."""
    sp = np.asarray(sp, dtype=float)
    to = domain._tchi_O(sp)
    tn = domain._tchi_N(sp)
    cap = np.full(sp.shape, np.inf)
    cap = np.where(to > 0.0, np.minimum(cap, domain.geo.u_O - sp), cap)
    cap = np.where(tn > 0.0, np.minimum(cap, sp), cap)
    out = np.full(sp.shape, np.inf)
    lim = np.isfinite(cap)
    if np.any(lim):
        out = np.where(
            lim, domain.h2(sp, np.where(lim, cap, 1.0) * (1.0 - 1e-9)), out
        )
    return out


def _winf_splines(domain, sp):
    """Per-column cubic splines of the graph-independent indicator w_inf.

    The indicator depends only on the chart collection, not on the current
    graph or field, so the samples are built once per domain and reused by
    every re-rooting pass. Returns the per-column sampling ceilings and the
    spline list.
    """
    cache = getattr(domain, "_winf_spl_cache", None)
    if (cache is not None and cache[0].shape == sp.shape
            and np.array_equal(cache[0], sp)):
        return cache[1], cache[2]
    caps = _tprime_cap(domain, sp)
    hi = np.where(np.isfinite(caps), 0.999 * caps, 2.0)
    nsamp = 49
    tt = np.linspace(0.0, 1.0, nsamp)[None, :] * hi[:, None]
    ww = domain.w_inf(np.broadcast_to(sp[:, None], tt.shape), tt)
    spl = [CubicSpline(tt[i], ww[i]) for i in range(sp.size)]
    domain._winf_spl_cache = (sp.copy(), hi, spl)
    return hi, spl


def background_shock_graph(domain, s_nodes):
    """Shock graph of the uniform background (u = 0): per-column root of
    the incoming-minus-interpolant indicator w_inf."""
    s_nodes = np.asarray(s_nodes, dtype=float)
    sp = domain.from_square_s(s_nodes)
    geo = domain.geo
    right = math.asin(geo.eta_N / geo.c_N)
    if domain.beta < domain.beta_s:
        left = math.asin(geo.eta_O / geo.c_O)
    else:
        left = 0.0
    inner = sp[1:-1]
    hi, spl = _winf_splines(domain, sp)
    vals = np.array([
        brentq(spl[i], 0.0, hi[i], xtol=1e-12)
        for i in range(1, sp.size - 1)
    ])
    # secant polish on the exact indicator (the spline only brackets)
    ta = vals
    tb = ta * (1.0 + 1e-7) + 1e-12
    wa = domain.w_inf(inner, ta)
    wb = domain.w_inf(inner, tb)
    for _ in range(3):
        denom = wb - wa
        safe = np.abs(denom) > 0.0
        tn = np.where(
            safe, tb - wb * (tb - ta) / np.where(safe, denom, 1.0), tb
        )
        tn = np.clip(tn, 0.0, hi[1:-1])
        ta, wa = tb, wb
        tb = tn
        wb = domain.w_inf(inner, tb)
    vals = tb
    g = np.empty_like(s_nodes)
    g[0], g[-1] = left, right
    g[1:-1] = vals
    return ShockGraph(s_nodes, g)


def exact_normal_solution(gamma, v_inf, ns=128, nt=64):
    """Closed-form normal-reflection solution at beta = 0: u vanishes and
    the shock graph is the image of the flat shock at height eta_N."""
    domain = MappedDomain(gamma, v_inf, 0.0)
    s = np.linspace(-1.0, 1.0, ns + 1)
    t = np.linspace(0.0, 1.0, nt + 1)
    shock = background_shock_graph(domain, s)
    u = np.zeros((ns + 1, nt + 1))
    return SolutionField(gamma, v_inf, 0.0, s, t, u, shock, domain)


def assemble_interior(fieldobj, forcing=None):
    """Nonlinear residual of the interior problem at the field's state."""
    return _get_assembler(fieldobj).residual(fieldobj.u, forcing)


def shock_bc_residual(fieldobj, shock, node):
    """Gradient-jump functional at one shock-row node index."""
    asm = _Assembler(fieldobj.domain, shock, fieldobj.s, fieldobj.t)
    F = asm.residual(fieldobj.u)
    return float(F[node, fieldobj.nt])


def solve_interior(shock, beta, init, *, tol_pde=1e-9, max_iter=30,
                   shock_mode="gsh", top_values=None, forcing=None):
    """Solve the frozen-graph interior problem by damped Newton.

    Returns a new SolutionField at the same grid; Newton statistics are in
    its newton_info.
    """
    if init.domain.beta == beta:
        domain = init.domain
    else:
        domain = MappedDomain(init.gamma, init.v_inf, beta)
    asm = _Assembler(domain, shock, init.s, init.t,
                     shock_mode=shock_mode, top_values=top_values)
    u, info = asm.newton(init.u, tol_pde, max_iter=max_iter, forcing=forcing)
    out = SolutionField(
        init.gamma, init.v_inf, beta, init.s, init.t, u, shock, domain,
        newton_info=info,
    )
    out.newton_info["_asm_key"] = ((id(shock), shock_mode), asm)
    return out


def update_shock(fieldobj, shock=None, *, kappa=0.2):
    """One implicit shock move: re-root w_inf = E_g(u) per column.

    Returns the damped new graph and diagnostics (pre-damping sup move,
    transversality margins).
    """
    if shock is None:
        shock = fieldobj.shock
    domain = fieldobj.domain
    s = fieldobj.s
    ns = fieldobj.ns
    sp = domain.from_square_s(s)
    g = shock.g_values
    ext = ExtensionOperator(kappa=kappa)

    # cached column-wise spline of the graph-independent indicator w_inf:
    # used only for bracketing, the root is polished on the exact indicator
    hi_spl, w_spl = _winf_splines(domain, sp)
    T = np.minimum(hi_spl, np.maximum((1.0 + kappa) * g * 1.05,
                                      1.3 * np.max(g)))

    ghat = np.array(g)
    margins = np.full(ns + 1, np.nan)
    clamped = 0
    evs = [None] * (ns + 1)
    free = []
    for i in range(1, ns):
        gi = g[i]
        ev = ext.extend_column(fieldobj.t * gi, fieldobj.u[i], gi)
        evs[i] = ev

        def W(tb, i=i, ev=ev):
            return float(w_spl[i](tb) - ev(tb))

        lo, hi = 0.5 * gi, min((1.0 + kappa) * gi, T[i])
        wlo, whi = W(lo), W(hi)
        if wlo <= 0.0:
            ghat[i] = lo
            clamped += 1
            continue
        if whi >= 0.0:
            ghat[i] = hi
            clamped += 1
            continue
        ghat[i] = brentq(W, lo, hi, xtol=1e-7)
        free.append(i)

    # secant polish on the exact indicator, all free columns at once
    if free:
        free = np.array(free, dtype=int)
        spf = sp[free]
        lo_f = 0.5 * g[free]
        hi_f = np.minimum((1.0 + kappa) * g[free], T[free])

        def w_exact(tv):
            wall = domain.w_inf(spf, tv)
            return wall - np.array(
                [evs[i](tv[k]) for k, i in enumerate(free)]
            )

        ta = ghat[free]
        tb = np.clip(ta * (1.0 + 1e-7) + 1e-12, lo_f, hi_f)
        wa = w_exact(ta)
        wb = w_exact(tb)
        for _ in range(4):
            denom = wb - wa
            safe = np.abs(denom) > 0.0
            tn = np.where(
                safe, tb - wb * (tb - ta) / np.where(safe, denom, 1.0), tb
            )
            tn = np.clip(tn, lo_f, hi_f)
            ta, wa = tb, wb
            tb = tn
            wb = w_exact(tb)
        ghat[free] = tb
        d = np.minimum(
            1e-6 * np.maximum(tb, 1e-3),
            0.49 * np.minimum(hi_f - tb, tb - lo_f),
        )
        d = np.maximum(d, 1e-9)
        margins[free] = -(w_exact(tb + d) - w_exact(tb - d)) / (2.0 * d)

    move = float(np.max(np.abs(ghat - g)))
    finite = margins[np.isfinite(margins)]
    # damp only on genuine transversality degradation, not on the
    # structural margin spread between the wall and the sonic ends
    lam = 1.0
    if clamped > 0:
        lam = 0.5
    elif finite.size > 0 and np.min(finite) < 0.25 * np.median(finite):
        lam = 0.5
    new_vals = g + lam * (ghat - g)
    info = {
        "move": move,
        "damping": lam,
        "clamped": clamped,
        "ghat": ghat,
        "margins": margins,
        "margin_min": float(np.min(finite)) if finite.size else float("nan"),
        "margin_median": float(np.median(finite)) if finite.size else float(
            "nan"),
    }
    return ShockGraph(s, new_vals), info


def _coupled_newton(fieldobj, shock, *, tol_pde, tol_shock, max_iter=25):
    """Newton iteration on the field and the shock graph jointly.

    The alternation between the frozen-graph interior solve and the shock
    re-rooting loses contraction once a pair of its error modes leaves the
    unit circle (this happens well inside the admissible angle range). The
    coupled system stays regular there: unknowns are the field u and the
    interior graph ordinates, with per-column equations
    w_inf(s_i, g_i) - u[i, top] = 0, and the bordered Jacobian is solved
    by a Schur complement on the graph block.
    """
    domain = fieldobj.domain
    s, t = fieldobj.s, fieldobj.t
    ns, nt = fieldobj.ns, fieldobj.nt
    sp = domain.from_square_s(s)
    caps = _tprime_cap(domain, sp)
    hi_g = np.where(np.isfinite(caps), 0.995 * caps, np.inf)
    u = np.array(fieldobj.u, dtype=float)
    gv = np.array(shock.g_values, dtype=float)
    hg = 1e-6
    top = np.array([i * (nt + 1) + nt for i in range(1, ns)])

    def shock_res(uu, gg):
        return domain.w_inf(sp[1:ns], gg[1:ns]) - uu[1:ns, nt]

    asm = _Assembler(domain, ShockGraph(s, gv), s, t)
    Fu = asm.residual(u)
    Fg = shock_res(u, gv)
    nrm = math.hypot(np.linalg.norm(Fu.ravel()), np.linalg.norm(Fg))
    its = 0
    fac = None
    fresh = False
    for _ in range(max_iter + 1):
        if (np.max(np.abs(Fu)) < tol_pde
                and np.max(np.abs(Fg)) < 0.05 * tol_shock):
            out = SolutionField(
                fieldobj.gamma, fieldobj.v_inf, fieldobj.beta, s, t, u,
                ShockGraph(s, gv), domain,
                newton_info={
                    "iterations": its,
                    "residual": float(np.max(np.abs(Fu))),
                    "flags": dict(asm.flags),
                },
            )
            out.newton_info["_asm_key"] = ((id(out.shock), "gsh"), asm)
            return out
        if its >= max_iter:
            break
        if fac is None:
            A = asm.jacobian(u, Fu)
            lu = splu(A.tocsc())
            # graph sensitivity by grouped differences: the spline
            # response to a nodal bump decays geometrically, so nodes a
            # dozen columns apart can be perturbed together and the
            # response split by proximity
            B = np.zeros((u.size, ns - 1))
            spacing = 12
            icols = np.arange(ns + 1)
            for off in range(1, spacing + 1):
                ks = np.arange(off, ns, spacing)
                if len(ks) == 0:
                    continue
                gp = gv.copy()
                gp[ks] += hg
                asm_k = _Assembler(domain, ShockGraph(s, gp), s, t)
                dF = (asm_k.residual(u) - Fu) / hg
                nearest = ks[np.argmin(
                    np.abs(icols[:, None] - ks[None, :]), axis=1
                )]
                for k in ks:
                    for i in icols[nearest == k]:
                        B[i * (nt + 1):(i + 1) * (nt + 1), k - 1] = dF[i]
            X = lu.solve(B)
            wp = (domain.w_inf(sp[1:ns], gv[1:ns] + hg)
                  - domain.w_inf(sp[1:ns], gv[1:ns] - hg)) / (2.0 * hg)
            S = np.diag(wp) + X[top, :]
            fac = (lu, X, S)
            fresh = True
        lu, X, S = fac
        y = lu.solve(Fu.ravel())
        rhs = -Fg - y[top]
        dg = np.linalg.solve(S, rhs)
        du = -(y + X @ dg).reshape(u.shape)
        lam = 1.0
        accepted = False
        nrm_old = nrm
        while lam >= 1.0 / 64.0:
            g_try = gv.copy()
            g_try[1:ns] = gv[1:ns] + lam * dg
            if (np.any(g_try[1:ns] <= 0.0)
                    or np.any(g_try[1:ns] >= hi_g[1:ns])):
                lam *= 0.5
                continue
            u_try = u + lam * du
            asm_try = _Assembler(domain, ShockGraph(s, g_try), s, t)
            Fu_try = asm_try.residual(u_try)
            Fg_try = shock_res(u_try, g_try)
            n_try = math.hypot(
                np.linalg.norm(Fu_try.ravel()), np.linalg.norm(Fg_try)
            )
            if n_try <= (1.0 - 0.25 * lam) * nrm:
                u, gv, asm = u_try, g_try, asm_try
                Fu, Fg, nrm = Fu_try, Fg_try, n_try
                accepted = True
                break
            lam *= 0.5
        its += 1
        if not accepted:
            if not fresh:
                fac = None  # stale factorization; rebuild and retry
                continue
            raise NumericalError(
                "coupled Newton line search failed",
                residual=float(nrm), iterations=its,
            )
        # reuse the factorization while contraction stays strong
        fresh = False
        if nrm > 0.15 * nrm_old:
            fac = None
    raise NumericalError(
        "coupled Newton did not converge",
        residual=float(nrm), iterations=its,
    )


def _accept_coupled(fieldobj, stats, tol_shock, kappa):
    """Fold a coupled-Newton result into the outer statistics.

    The re-rooted shock move is only identifiable at columns where the
    gradient-jump transversality is healthy; where the jump degenerates
    the root responds to solver noise as noise / margin, so those columns
    are judged by the coupled residual (already below tol) instead.
    """
    stats["newton"] += fieldobj.newton_info["iterations"]
    stats["flags"] = fieldobj.newton_info["flags"]
    stats["residual"] = fieldobj.newton_info["residual"]
    _, sinfo = update_shock(fieldobj, fieldobj.shock, kappa=kappa)
    margins = sinfo["margins"]
    finite = np.isfinite(margins)
    moved = np.abs(sinfo["ghat"] - fieldobj.shock.g_values)
    if np.any(finite):
        med = np.median(margins[finite])
        sound = finite & (margins >= 0.25 * med)
        move = float(np.max(moved[sound])) if np.any(sound) else 0.0
    else:
        move = sinfo["move"]
    stats["move"] = move
    stats["outer"] = stats.get("outer", 0) + 1
    if math.isfinite(sinfo["margin_min"]):
        stats["margin_min"] = min(stats["margin_min"], sinfo["margin_min"])
    return (move < tol_shock and sinfo["clamped"] == 0), stats


def _solve_at_beta(beta, init, prev_bg, *, tol_pde, tol_shock, max_outer,
                   kappa, u_init=None, corr_init=None, mode="alt"):
    """Inner solve at a fixed beta; raises NumericalError on failure.

    The shock is initialized as the new background graph plus a correction
    (by default the one carried over from the previous beta); u_init allows
    a continuation predictor for the field. mode "alt" runs the
    interior/shock alternation with the coupled Newton as fallback;
    "coupled" goes to the coupled Newton straight from the predictor,
    which is the productive order once the gradient-jump transversality
    degrades and the alternation map turns unstable.
    """
    domain = MappedDomain(init.gamma, init.v_inf, beta)
    s = init.s
    bg = background_shock_graph(domain, s)
    if corr_init is None:
        corr_init = init.shock.g_values - prev_bg.g_values
    vals = bg.g_values + corr_init
    vals = np.array(vals)
    vals[1:-1] = np.maximum(vals[1:-1], 0.2 * bg.g_values[1:-1])
    vals[0], vals[-1] = bg.g_values[0], bg.g_values[-1]
    g = ShockGraph(s, vals)
    u0 = np.array(init.u if u_init is None else u_init)
    fieldobj = SolutionField(
        init.gamma, init.v_inf, beta, s, init.t, u0, g, domain
    )
    stats = {"outer": 0, "newton": 0, "move": float("nan"),
             "margin_min": float("inf"), "flags": {}}
    if mode == "coupled":
        try:
            cf = _coupled_newton(
                fieldobj, g, tol_pde=tol_pde, tol_shock=tol_shock
            )
        except NumericalError:
            pass  # fall back to the alternation below
        else:
            ok, stats = _accept_coupled(cf, stats, tol_shock, kappa)
            if ok:
                return cf, bg, stats
    moves = []
    hist_g = []  # map values ghat_k of the outer fixed-point map
    hist_d = []  # residuals ghat_k - g_k
    g_solved = None  # last graph for which the interior solve converged
    best_move = float("inf")
    best_field = None
    coupled_tries = 0
    for outer in range(max_outer):
        try:
            fieldobj = solve_interior(g, beta, fieldobj, tol_pde=tol_pde)
        except NumericalError:
            # the shock moved out of the interior Newton basin: halve the
            # move toward the last solvable graph and retry
            if g_solved is None:
                raise
            ok = False
            for _ in range(5):
                g = ShockGraph(
                    s, 0.5 * (g.g_values + g_solved.g_values)
                )
                try:
                    fieldobj = solve_interior(g, beta, fieldobj,
                                              tol_pde=tol_pde)
                    ok = True
                    break
                except NumericalError:
                    continue
            if not ok:
                raise
            hist_g.clear()
            hist_d.clear()
        g_solved = g
        stats["newton"] += fieldobj.newton_info["iterations"]
        stats["flags"] = fieldobj.newton_info["flags"]
        stats["residual"] = fieldobj.newton_info["residual"]
        g_new, sinfo = update_shock(fieldobj, g, kappa=kappa)
        stats["outer"] = outer + 1
        stats["move"] = sinfo["move"]
        moves.append(sinfo["move"])
        if math.isfinite(sinfo["margin_min"]):
            stats["margin_min"] = min(stats["margin_min"],
                                      sinfo["margin_min"])
        if sinfo["move"] < tol_shock:
            return fieldobj, bg, stats
        if sinfo["move"] < best_move:
            best_move = sinfo["move"]
            best_field = fieldobj
        # switch to the coupled solve once the alternation stagnates or
        # its contraction turns sluggish
        stagnant = (
            (len(moves) >= 10 and moves[-1] > 0.5 * moves[-4])
            or (len(moves) >= 4 and moves[-1] > 0.25 * moves[-2])
        )
        if stagnant and coupled_tries < 3 and best_move < 5e-2:
            coupled_tries += 1
            try:
                fieldobj = _coupled_newton(
                    best_field, best_field.shock,
                    tol_pde=tol_pde, tol_shock=tol_shock,
                )
            except NumericalError:
                hist_g.clear()
                hist_d.clear()
                moves.clear()
                g = g_new
                fieldobj = SolutionField(
                    init.gamma, init.v_inf, beta, s, init.t,
                    fieldobj.u, g, domain
                )
                continue
            ok, stats = _accept_coupled(fieldobj, stats, tol_shock, kappa)
            if ok:
                return fieldobj, bg, stats
            raise NumericalError(
                "coupled solve left a large shock residual",
                move=stats["move"], beta=beta,
            )
        # Anderson acceleration of the outer fixed-point map g -> ghat:
        # combine the last few map values so the combined residual is
        # minimal in least squares. Unlike a scalar secant this copes with
        # several slow (or mildly expanding) error modes at once.
        d = sinfo["ghat"] - g.g_values
        if sinfo["clamped"] > 0 or sinfo["damping"] != 1.0:
            hist_g.clear()
            hist_d.clear()
            g = g_new
        else:
            hist_g.append(sinfo["ghat"].copy())
            hist_d.append(d.copy())
            if len(hist_g) > 6:
                hist_g.pop(0)
                hist_d.pop(0)
            vals = sinfo["ghat"]
            if len(hist_d) >= 2:
                dF = np.column_stack(
                    [hist_d[i + 1] - hist_d[i]
                     for i in range(len(hist_d) - 1)]
                )
                dG = np.column_stack(
                    [hist_g[i + 1] - hist_g[i]
                     for i in range(len(hist_g) - 1)]
                )
                gam = np.linalg.lstsq(dF, d, rcond=1e-10)[0]
                step = dG @ gam
                # distrust extrapolations far beyond the plain update
                if np.linalg.norm(step) <= 20.0 * np.linalg.norm(d):
                    vals = vals - step
            vals = np.array(vals)
            vals[1:-1] = np.maximum(vals[1:-1], 0.2 * bg.g_values[1:-1])
            vals[0], vals[-1] = bg.g_values[0], bg.g_values[-1]
            g = ShockGraph(s, vals)
        fieldobj = SolutionField(
            init.gamma, init.v_inf, beta, s, init.t, fieldobj.u, g, domain
        )
    # out of alternation budget; last chance with the coupled Newton from
    # the best iterate seen
    if best_field is not None and best_move < 5e-2:
        fieldobj = _coupled_newton(
            best_field, best_field.shock,
            tol_pde=tol_pde, tol_shock=tol_shock,
        )
        ok, stats = _accept_coupled(fieldobj, stats, tol_shock, kappa)
        if ok:
            return fieldobj, bg, stats
    raise NumericalError(
        "outer shock iteration did not converge",
        move=stats["move"], beta=beta,
    )


def solve_fbp(gamma, v_inf, beta_target, *, ns=128, nt=64, tol_pde=1e-9,
              tol_shock=1e-8, d_beta0=None, max_outer=40, kappa=0.2):
    """Continuation solve from the normal reflection up to beta_target.

    Returns (SolutionField, SolveReport). A continuation stall (step below
    1e-6) yields the last converged field with report.stalled = True.
    """
    t0 = time.perf_counter()
    b_d = beta_detach(gamma, v_inf)
    if not 0.0 <= beta_target < b_d - 1e-6:
        raise DomainError(
            f"beta_target={beta_target} outside [0, beta_detach - 1e-6)"
        )
    fieldobj = exact_normal_solution(gamma, v_inf, ns=ns, nt=nt)
    bg = fieldobj.shock
    res0 = float(np.max(np.abs(assemble_interior(fieldobj))))
    report = SolveReport(
        converged=True, beta_target=beta_target, beta_reached=0.0,
        continuation_steps=0, outer_iterations=0, newton_iterations=0,
        shock_move=0.0, interior_residual=res0, ellipticity_flags=0,
        cutoff_activations=0, density_clamps=0,
        transversality_min=float("nan"), stalled=False, wall_time=0.0,
    )
    if beta_target == 0.0:
        report.wall_time = time.perf_counter() - t0
        return fieldobj, report

    beta = 0.0
    dbeta = d_beta0 if d_beta0 is not None else b_d / 64.0
    mode = "alt"
    margin_min = float("inf")
    cur_corr = fieldobj.shock.g_values - bg.g_values  # zero at beta = 0
    prev_u = prev_corr = None
    last_step = None
    while beta < beta_target - 1e-14:
        step = min(dbeta, beta_target - beta)
        u_pred = corr_pred = None
        if prev_u is not None and last_step and last_step > 0.0:
            fac = step / last_step
            u_pred = fieldobj.u + fac * (fieldobj.u - prev_u)
            corr_pred = cur_corr + fac * (cur_corr - prev_corr)
        try:
            new_field, new_bg, stats = _solve_at_beta(
                beta + step, fieldobj, bg, tol_pde=tol_pde,
                tol_shock=tol_shock, max_outer=max_outer, kappa=kappa,
                u_init=u_pred, corr_init=corr_pred, mode=mode,
            )
        except NumericalError:
            dbeta *= 0.5
            if dbeta < 1e-6:
                report.converged = False
                report.stalled = True
                break
            continue
        # the alternation map destabilizes along with the gradient-jump
        # transversality; lead with the coupled Newton from here on
        if math.isfinite(stats["margin_min"]) and stats["margin_min"] < 0.2:
            mode = "coupled"
        prev_u, prev_corr, last_step = fieldobj.u, cur_corr, step
        beta += step
        fieldobj, bg = new_field, new_bg
        cur_corr = fieldobj.shock.g_values - bg.g_values
        report.continuation_steps += 1
        report.outer_iterations += stats["outer"]
        report.newton_iterations += stats["newton"]
        report.shock_move = stats["move"]
        report.interior_residual = stats.get("residual", float("nan"))
        report.ellipticity_flags += stats["flags"].get("ellipticity", 0)
        report.cutoff_activations += stats["flags"].get("cutoff", 0)
        report.density_clamps += stats["flags"].get("clamp", 0)
        if math.isfinite(stats["margin_min"]):
            margin_min = min(margin_min, stats["margin_min"])
        dbeta = min(dbeta * 1.5, b_d / 16.0)
    report.beta_reached = beta
    report.transversality_min = (
        margin_min if math.isfinite(margin_min) else float("nan")
    )
    report.converged = report.converged and beta >= beta_target - 1e-14
    report.wall_time = time.perf_counter() - t0
    return fieldobj, report


def reconstruct_phi(fieldobj):
    """Physical-plane samples of phi, Dphi, rho, Mach and the shock
    polyline for a converged field."""
    asm = _get_assembler(fieldobj)
    out = asm.physical_state(fieldobj.u)
    out["shock_xi"] = np.stack(
        [asm.X[:, -1], asm.Y[:, -1]], axis=-1
    )
    return out


# -- manufactured-solution support ---------------------------------------------


def manufactured_solution(domain, amplitude=0.01):
    """Smooth physical-plane perturbation and the exact forcing it induces.

    The perturbation w rides on the normal-reflection state phi_N at
    beta = 0: w = A sin^4(pi (xi1-a)/(b-a)) cos(xi2) on a band strictly
    inside the domain, zero outside, so all boundary conditions except the
    top row hold exactly. Returns (w, forcing) as callables of nodal
    coordinate arrays; forcing is the analytic interior residual.
    """
    if domain.beta != 0.0:
        raise DomainError("manufactured case is defined at beta = 0")
    a = 0.55 * domain.s_beta
    b = 0.6 * domain.geo.c_N
    gamma = domain.gamma
    B = 0.5 * domain.v_inf**2
    kk = math.pi / (b - a)

    def parts(x1, x2):
        z = np.clip((x1 - a) * kk, 0.0, math.pi)
        sz, cz = np.sin(z), np.cos(z)
        w = amplitude * sz**4 * np.cos(x2)
        wx = amplitude * 4.0 * kk * sz**3 * cz * np.cos(x2)
        wy = -amplitude * sz**4 * np.sin(x2)
        wxx = amplitude * 4.0 * kk * kk * sz**2 * (
            3.0 * cz * cz - sz * sz
        ) * np.cos(x2)
        wxy = -amplitude * 4.0 * kk * sz**3 * cz * np.sin(x2)
        wyy = -w
        return w, wx, wy, wxx, wxy, wyy

    def w_func(x1, x2):
        return parts(x1, x2)[0]

    def forcing(x1, x2):
        w, wx, wy, wxx, wxy, wyy = parts(x1, x2)
        phi = -0.5 * (x1**2 + x2**2) - domain.v_inf * domain.geo.eta_N + w
        p1 = -x1 + wx
        p2 = -x2 + wy
        speed2 = p1 * p1 + p2 * p2
        if gamma == 1.0:
            c2 = np.ones_like(speed2)
        else:
            c2 = 1.0 + (gamma - 1.0) * (B - 0.5 * speed2 - phi)
        f11 = -1.0 + wxx
        f12 = wxy
        f22 = -1.0 + wyy
        return (
            (c2 - p1 * p1) * f11
            - 2.0 * p1 * p2 * f12
            + (c2 - p2 * p2) * f22
            + 2.0 * c2 - speed2
        )

    return w_func, forcing


def mms_solve(gamma, v_inf, ns, nt, *, amplitude=0.01, tol_pde=1e-11):
    """Solve the manufactured problem on one grid.

    Returns (field, exact nodal values). Top row carries Dirichlet data
    from the exact perturbation; the error of interest is u - w away from
    the sonic strips.
    """
    fieldobj = exact_normal_solution(gamma, v_inf, ns=ns, nt=nt)
    domain = fieldobj.domain
    w_func, forcing = manufactured_solution(domain, amplitude=amplitude)
    asm = _get_assembler(fieldobj)
    w_nodes = w_func(asm.X, asm.Y)
    f_nodes = forcing(asm.X, asm.Y)
    solved = solve_interior(
        fieldobj.shock, 0.0, fieldobj, tol_pde=tol_pde,
        shock_mode="dirichlet", top_values=w_nodes[:, -1], forcing=f_nodes,
    )
    return solved, w_nodes
