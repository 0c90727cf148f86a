"""Isotropic stable densities, the continuum heat kernels of fractional kernels.

The kernel ``Lambda |z|^{-d-alpha}`` generates ``-c (-Delta)^{alpha/2}`` with
``c = Lambda / C_{d,alpha}``, where ``C_{d,alpha}`` is the normalizing constant
of the fractional Laplacian. Its heat kernel has Fourier transform
``exp(-c t |xi|^alpha)``:

    d = 1:  p(t, x) = (1/pi)   int_0^inf cos(xi x) exp(-c t xi^alpha) dxi
    d = 2:  p(t, r) = (1/2pi)  int_0^inf J_0(xi r) exp(-c t xi^alpha) xi dxi

For ``alpha = 1`` these are the Cauchy/Poisson kernels in closed form.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special

from .errors import DomainError, ParameterError


def fractional_laplacian_constant(d: int, alpha: float) -> float:
    """``C_{d,alpha}`` with ``(-Delta)^{alpha/2} u = C_{d,alpha} p.v. int (u(x) - u(y)) |x-y|^{-d-alpha} dy``.

    >>> round(fractional_laplacian_constant(1, 1.0) * math.pi, 12)
    1.0
    """
    if not 0 < alpha < 2:
        raise ParameterError("alpha must lie in (0, 2)")
    return (alpha * 2 ** (alpha - 1) * math.gamma((d + alpha) / 2)
            / (math.pi ** (d / 2) * math.gamma(1 - alpha / 2)))


def symbol_constant(Lambda: float, d: int, alpha: float) -> float:
    """``c`` such that the kernel ``Lambda |z|^{-d-alpha}`` has symbol ``-c |xi|^alpha``."""
    return Lambda / fractional_laplacian_constant(d, alpha)


def cauchy_density(t, x, c: float = 1.0, d: int = 1):
    """Closed-form ``alpha = 1`` heat kernel at time ``t`` and distance ``|x|``.

    ``d = 1``: ``(1/pi) ct / ((ct)^2 + x^2)``; ``d = 2``: ``(1/2pi) ct / ((ct)^2 + r^2)^{3/2}``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    a = c * t
    r2 = np.asarray(x, dtype=float) ** 2
    if d == 1:
        return a / (np.pi * (a * a + r2))
    if d == 2:
        return a / (2 * np.pi * (a * a + r2) ** 1.5)
    raise ParameterError("d must be 1 or 2")


def _cutoff(a: float, alpha: float, eps: float = 1e-17) -> float:
    # exp(-a xi^alpha) < eps beyond this frequency
    return (math.log(1 / eps) / a) ** (1 / alpha)


def stable_density(t: float, r, alpha: float, d: int = 1, c: float = 1.0, epsabs: float = 1e-14):
    """Heat kernel of symbol ``exp(-c t |xi|^alpha)`` at distances ``r`` by Fourier inversion.

    Returns an array of the same shape as ``r``. Quadrature is truncated at the
    frequency where the integrand falls below ``1e-17``.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not 0 < alpha <= 2:
        raise ParameterError("alpha must lie in (0, 2]")
    a = c * t
    xi_max = _cutoff(a, alpha)
    env = lambda xi: math.exp(-a * xi ** alpha)
    r = np.abs(np.asarray(r, dtype=float))
    out = np.empty(r.shape)
    for i, ri in np.ndenumerate(r):
        if d == 1:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                if ri == 0:
                    val, _ = integrate.quad(env, 0, xi_max, epsabs=epsabs, limit=400)
                else:
                    val, _ = integrate.quad(env, 0, xi_max, weight="cos", wvar=ri, epsabs=epsabs, limit=400)
            out[i] = val / math.pi
        elif d == 2:
            f = lambda xi: special.j0(xi * ri) * env(xi) * xi
            # split at the zeros of J_0 so each piece has one sign
            n_zero = int(xi_max * ri / math.pi) + 1 if ri > 0 else 0
            zeros = special.jn_zeros(0, n_zero) / ri if n_zero else np.array([])
            pts = np.concatenate([[0.0], zeros[zeros < xi_max], [xi_max]])
            total = 0.0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                for lo, hi in zip(pts[:-1], pts[1:]):
                    total += integrate.quad(f, lo, hi, epsabs=epsabs, limit=200)[0]
            out[i] = total / (2 * math.pi)
        else:
            raise ParameterError("d must be 1 or 2")
    return out


def fractional_heat_kernel(Lambda: float, alpha: float, d: int, t: float, r):
    """Continuum heat kernel of ``Lambda |z|^{-d-alpha}``: closed form at ``alpha = 1``, else Fourier inversion."""
    c = symbol_constant(Lambda, d, alpha)
    if alpha == 1:
        return cauchy_density(t, r, c=c, d=d)
    return stable_density(t, r, alpha, d=d, c=c)
