"""Thermodynamic closure for self-similar potential flow.

Polytropic gas normalized so that the incoming state has density 1 and sound
speed 1. Specific enthalpy, density recovered from the Bernoulli relation,
sound speed, and the pseudo-Mach number, for adiabatic exponents gamma >= 1
including the isothermal branch gamma = 1 in exact closed form.
"""

import numpy as np

from .errors import DomainError, VacuumError


class GasModel:
    """Polytropic gas with a fixed pseudo-Bernoulli constant.

    Parameters
    ----------
    gamma : float
        Adiabatic exponent, >= 1. gamma == 1 selects the logarithmic
        (isothermal) enthalpy branch exactly, no limits are taken.
    bernoulli : float
        Pseudo-Bernoulli constant B of the configuration. With the incoming
        normalization (density 1, sound speed 1) the self-similar problem
        uses B = v_inf**2 / 2.

    Notes
    -----
    The constant is stored on the model because one configuration shares a
    single Bernoulli constant; every density evaluation refers to it.
    """

    __slots__ = ("gamma", "bernoulli")

    def __init__(self, gamma, bernoulli=0.0):
        if gamma < 1.0:
            raise DomainError(f"gamma must be >= 1, got {gamma}")
        self.gamma = float(gamma)
        self.bernoulli = float(bernoulli)

    def __repr__(self):
        return f"GasModel(gamma={self.gamma}, bernoulli={self.bernoulli})"

    # -- closed-form closure ------------------------------------------------

    def enthalpy_and_sound(self, rho):
        """Specific enthalpy h(rho) and squared sound speed c^2(rho).

        h = (rho^(gamma-1) - 1)/(gamma - 1) and c^2 = rho^(gamma-1) for
        gamma > 1; h = ln rho and c^2 = 1 for gamma = 1. h(1) = 0 always.

        Parameters
        ----------
        rho : float or ndarray
            Density, > 0.

        Returns
        -------
        (h, c2) : tuple of float or ndarray
        """
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise DomainError("density must be positive")
        g = self.gamma
        if g == 1.0:
            h = np.log(rho)
            c2 = np.ones_like(h)
        else:
            c2 = rho ** (g - 1.0)
            h = (c2 - 1.0) / (g - 1.0)
        if h.ndim == 0:
            return float(h), float(c2)
        return h, c2

    def density_from_bernoulli(self, speed2, z):
        """Density from the Bernoulli relation h(rho) + speed2/2 + z = B.

        Parameters
        ----------
        speed2 : float or ndarray
            Squared pseudo-velocity magnitude |Dphi|^2.
        z : float or ndarray
            Pseudo-potential value phi.

        Returns
        -------
        rho : float or ndarray

        Raises
        ------
        VacuumError
            If the argument 1 + (gamma-1)(B - speed2/2 - z) is not positive
            for gamma > 1 (vacuum boundary, inadmissible state).
        """
        a = self.bernoulli - 0.5 * np.asarray(speed2, dtype=float) - z
        g = self.gamma
        if g == 1.0:
            rho = np.exp(a)
        else:
            arg = 1.0 + (g - 1.0) * a
            if np.any(arg <= 0.0):
                raise VacuumError(
                    "Bernoulli argument reached the vacuum boundary"
                )
            rho = arg ** (1.0 / (g - 1.0))
        if rho.ndim == 0:
            return float(rho)
        return rho

    def sound_speed2(self, speed2, z):
        """Squared sound speed at a state given by |Dphi|^2 and phi.

        Equals rho^(gamma-1) with rho from the Bernoulli relation; for
        gamma > 1 this is just the linear expression
        1 + (gamma-1)(B - speed2/2 - z), and exactly 1 for gamma = 1.
        """
        g = self.gamma
        if g == 1.0:
            out = np.ones_like(np.asarray(speed2, dtype=float))
        else:
            arg = 1.0 + (g - 1.0) * (
                self.bernoulli - 0.5 * np.asarray(speed2, dtype=float) - z
            )
            if np.any(arg <= 0.0):
                raise VacuumError(
                    "Bernoulli argument reached the vacuum boundary"
                )
            out = arg
        if out.ndim == 0:
            return float(out)
        return out

    def pseudo_mach(self, grad, z):
        """Pseudo-Mach number M = |Dphi| / c at a state.

        Parameters
        ----------
        grad : array_like
            Pseudo-velocity vector Dphi; the last axis holds the 2 components.
        z : float or ndarray
            Pseudo-potential value.

        Returns
        -------
        M : float or ndarray
            M < 1 is the pseudo-subsonic (elliptic) regime.
        """
        grad = np.asarray(grad, dtype=float)
        speed2 = np.sum(grad * grad, axis=-1)
        c2 = self.sound_speed2(speed2, z)
        m = np.sqrt(speed2 / c2)
        if np.ndim(m) == 0:
            return float(m)
        return m

    def density_floor(self):
        """Lower density clamp used by coefficient evaluation safeguards.

        Half the critical density (2/(gamma+1))^(1/(gamma-1)); exp(-1/2)
        at gamma = 1 (the same limit).
        """
        g = self.gamma
        if g == 1.0:
            return 0.5 * float(np.exp(-0.5))
        return 0.5 * (2.0 / (g + 1.0)) ** (1.0 / (g - 1.0))
