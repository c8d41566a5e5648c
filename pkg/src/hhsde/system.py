"""Coupled membrane-plus-input system in first-order SDE form.

State x = (v, p_1..p_k, xi) in R^m with m = k + 2.  One Brownian motion
enters through the last coordinate and, via the voltage equation, through
the first: the diffusion column is sigma(xi) * e with e = (1/C, 0, .., 0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conductance import ConductanceModel, build_hh_as_conductance_model
from .jets import Jet4
from .noise import Noise


@dataclass(frozen=True)
class CoupledSystem:
    model: ConductanceModel
    noise: Noise

    @property
    def m(self) -> int:
        return self.model.k + 2

    def noise_direction(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[0] = 1.0 / self.model.capacitance
        e[-1] = 1.0
        return e

    def drift(self, t: float, x: np.ndarray) -> np.ndarray:
        """Ito drift b(t, x)."""
        v, p, xi = x[0], x[1:-1], x[-1]
        b = np.empty(self.m)
        b_xi = self.noise.drift(t, xi)
        b[0] = self.model.membrane_drift(v, p) + b_xi / self.model.capacitance
        for i in range(self.model.k):
            b[1 + i] = self.model.gate_drift(i, v, p[i])
        b[-1] = b_xi
        return b

    def sigma_vec(self, x: np.ndarray) -> np.ndarray:
        return self.noise.sigma(x[-1]) * self.noise_direction()

    def strat_drift(self, t: float, x: np.ndarray) -> np.ndarray:
        """Drift after the Ito-to-Stratonovich correction.

        Only the noise-carrying rows change: b_i - sigma sigma' e_i / 2.
        """
        xi = x[-1]
        corr = 0.5 * self.noise.sigma(xi) * self.noise.sigma_prime(xi)
        return self.drift(t, x) - corr * self.noise_direction()

    def drift_jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        """Analytic m x m Jacobian of the Ito drift.

        Voltage derivatives of the gate drifts come from order-1 jet
        coefficients; the rest follows the affine current-balance
        structure.
        """
        v, p, xi = float(x[0]), x[1:-1], float(x[-1])
        k, mdl = self.model.k, self.model
        jac = np.zeros((self.m, self.m))
        # voltage row: ohmic terms
        jac[0, 0] = -mdl.conductance_total(p) / mdl.capacitance
        for i in range(k):
            dg = 0.0
            for term in mdl.terms:
                if term.exponents[i] == 0:
                    continue
                gpartial = term.gain * term.exponents[i]
                for jj, (pj, e) in enumerate(zip(p, term.exponents)):
                    gpartial *= pj ** (e - 1 if jj == i else e)
                dg += gpartial * (v - term.reversal)
            jac[0, 1 + i] = -dg / mdl.capacitance
        dxi = self.noise.drift_dxi(t, xi)
        jac[0, -1] = dxi / mdl.capacitance
        # gate rows: d_i = -a_i(v) p_i + b_i(v)
        vjet = Jet4.variable(v)
        for i in range(k):
            a = mdl.rate_a(i, vjet)
            b = mdl.rate_b(i, vjet)
            jac[1 + i, 0] = -a.c1 * p[i] + b.c1
            jac[1 + i, 1 + i] = -a.c0
        jac[-1, -1] = dxi
        return jac

    def sigma_jacobian(self, x: np.ndarray) -> np.ndarray:
        """m x m Jacobian of the diffusion column (nonzero last column only)."""
        jac = np.zeros((self.m, self.m))
        jac[:, -1] = self.noise.sigma_prime(x[-1]) * self.noise_direction()
        return jac


def hh_system(noise: Noise) -> CoupledSystem:
    """The stochastic Hodgkin-Huxley system with the given input law."""
    return CoupledSystem(build_hh_as_conductance_model(), noise)
