"""Symmetric jumping kernels, their presets, truncation and assumption checks.

A kernel ``k(t; x, y)`` is admissible when it is symmetric, bounded above by
``Lambda |x - y|^{-d-alpha}`` and coercive on balls with respect to the
Gagliardo seminorm. Presets:

``fractional``
    ``Lambda |x - y|^{-d-alpha}``.
``cone``
    fractional kernel restricted to jump directions inside a double cone.
``time-oscillating``
    ``Lambda (1/2 + 1/4 sin(2 pi t / period)) |x - y|^{-d-alpha}``.

Mixed-type kernels built from a scale function live in :mod:`heatlab.mixed`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import lobpcg
from scipy.stats import qmc

from .errors import DomainError, ParameterError
from .lattice import RADIUS_RTOL, Lattice, pair_displacements
from .reports import CheckReport

PRESETS = ("fractional", "cone", "time-oscillating")
KINDS = PRESETS + ("mixed-phi", "custom")

#: Seed of the low-discrepancy sampler used by the sampling checks.
SAMPLING_SEED = 0
UPPER_BOUND_RTOL = 1e-12
# Angular slack for the cone indicator so that exact lattice diagonals on the
# cone boundary are classified deterministically as inside.
CONE_ATOL = 1e-12
DENSE_EIG_CELLS = 2000


@dataclass(frozen=True)
class KernelParams:
    """Declared constants of a kernel.

    ``lambda_`` is the claimed coercivity constant (``lambda`` is reserved in
    Python); it defaults to ``Lambda``.
    """

    alpha: float
    Lambda: float = 1.0
    lambda_: Optional[float] = None
    horizon_T: float = 10.0
    dim: int = 1

    def __post_init__(self):
        if self.lambda_ is None:
            object.__setattr__(self, "lambda_", self.Lambda)
        if not 0 < self.alpha < 2:
            raise ParameterError(f"alpha out of (0,2): {self.alpha}")
        if not self.Lambda > 0:
            raise ParameterError(f"Lambda must be positive: {self.Lambda}")
        if not self.lambda_ > 0:
            raise ParameterError(f"lambda must be positive: {self.lambda_}")
        if not self.horizon_T > 0:
            raise ParameterError(f"horizon_T must be positive: {self.horizon_T}")
        if self.dim not in (1, 2):
            raise ParameterError(f"dim must be 1 or 2: {self.dim}")
        if self.lambda_ > self.Lambda:
            raise ParameterError("lambda cannot exceed Lambda")


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ParameterError(f"points must have {d} coordinates, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class JumpKernel:
    """Evaluable symmetric jumping kernel.

    Parameters
    ----------
    params : KernelParams
    kind : str
        One of :data:`KINDS`.
    func : callable
        ``func(t, x, y) -> intensity`` on arrays of points of shape ``(..., d)``;
        ``y`` is the minimum-image representative of the second point.
    trunc_radius : float, optional
        If set, the kernel vanishes for ``|x - y| > trunc_radius``.
    translation_invariant : bool
        Whether ``func`` depends on ``y - x`` only.
    time_dependent : bool
    bound : callable, optional
        ``r -> reference upper bound``; defaults to ``Lambda r^{-d-alpha}``.
    options : dict
        Preset options, echoed in :attr:`tag`.
    phi : ScaleFunction, optional
        Scale function of a mixed-type kernel; ``None`` means ``r^alpha``.
    """

    params: KernelParams
    kind: str
    func: Callable = field(repr=False, compare=False)
    trunc_radius: Optional[float] = None
    translation_invariant: bool = True
    time_dependent: bool = False
    bound: Optional[Callable] = field(default=None, repr=False, compare=False)
    options: dict = field(default_factory=dict, compare=False)
    phi: Optional[object] = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def tag(self) -> str:
        p = self.params
        opts = ",".join(f"{k}={v}" for k, v in sorted(self.options.items()))
        s = f"{self.kind}(alpha={p.alpha},Lambda={p.Lambda},d={p.dim}" + (f",{opts}" if opts else "") + ")"
        if self.trunc_radius is not None:
            s += f"|rho={self.trunc_radius}"
        return s

    def scale(self, r) -> float:
        """Natural time scale of jumps of length ``r``: ``phi(r)``, or ``r^alpha``."""
        if self.phi is not None:
            return float(self.phi(r))
        return float(r) ** self.params.alpha

    def upper_bound(self, r) -> np.ndarray:
        """Reference upper bound at separation ``r`` (the (k<=) right-hand side)."""
        r = np.asarray(r, dtype=float)
        if self.bound is not None:
            return self.bound(r)
        return self.params.Lambda * r ** (-self.dim - self.params.alpha)

    def evaluate(self, t, x, y) -> np.ndarray:
        """Intensity ``k(t; x, y)``; the diagonal ``x = y`` is rejected.

        Examples
        --------
        >>> k = make_preset("fractional", KernelParams(alpha=1.0))
        >>> float(k.evaluate(0.3, 0.0, 2.0))
        0.25
        """
        d = self.dim
        x = _as_points(x, d)
        y = _as_points(y, d)
        r = np.sqrt(np.sum((y - x) ** 2, axis=-1))
        if np.any(r == 0):
            raise DomainError("kernel is singular on the diagonal x = y")
        val = np.asarray(self.func(t, x, y), dtype=float)
        if self.trunc_radius is not None:
            val = np.where(r <= self.trunc_radius * (1 + RADIUS_RTOL), val, 0.0)
        return val

    __call__ = evaluate


def _fractional_func(p: KernelParams):
    def f(t, x, y):
        r = np.sqrt(np.sum((y - x) ** 2, axis=-1))
        return p.Lambda * r ** (-p.dim - p.alpha)
    return f


def make_preset(kind: str, params: KernelParams, preset_options: Optional[dict] = None) -> JumpKernel:
    """Build a preset kernel.

    Parameters
    ----------
    kind : {'fractional', 'cone', 'time-oscillating'}
    params : KernelParams
    preset_options : dict, optional
        ``cone``: ``aperture`` (half-angle in (0, pi/2), default pi/4) and
        ``axis`` (default e_1). ``time-oscillating``: ``period`` (default 1).
    """
    opts = dict(preset_options or {})
    base = _fractional_func(params)
    if kind == "fractional":
        return JumpKernel(params, kind, base)
    if kind == "cone":
        aperture = float(opts.pop("aperture", math.pi / 4))
        axis = np.asarray(opts.pop("axis", [1.0] + [0.0] * (params.dim - 1)), dtype=float).ravel()
        _reject_unknown(kind, opts)
        if not 0 < aperture < math.pi / 2:
            raise ParameterError(f"cone aperture outside (0, pi/2): {aperture}")
        if axis.shape != (params.dim,) or not np.linalg.norm(axis) > 0:
            raise ParameterError(f"cone axis must be a nonzero {params.dim}-vector")
        axis = axis / np.linalg.norm(axis)
        cos_ap = math.cos(aperture)

        def f(t, x, y):
            z = y - x
            r = np.sqrt(np.sum(z ** 2, axis=-1))
            inside = np.abs(z @ axis) >= (cos_ap - CONE_ATOL) * r
            return np.where(inside, base(t, x, y), 0.0)

        options = {"aperture": aperture}
        if params.dim > 1:
            options["axis"] = tuple(float(a) for a in axis)
        return JumpKernel(params, kind, f, options=options)
    if kind == "time-oscillating":
        period = float(opts.pop("period", 1.0))
        _reject_unknown(kind, opts)
        if not period > 0:
            raise ParameterError("oscillation period must be positive")

        def f(t, x, y):
            return (0.5 + 0.25 * np.sin(2 * np.pi * t / period)) * base(t, x, y)

        return JumpKernel(params, kind, f, time_dependent=True, options={"period": period})
    raise ParameterError(f"unknown preset {kind!r}; expected one of {PRESETS}")


def _reject_unknown(kind, opts):
    if opts:
        raise ParameterError(f"unknown options for {kind}: {sorted(opts)}")


def custom_kernel(params: KernelParams, func, *, translation_invariant=False, time_dependent=True,
                  bound=None, name="custom") -> JumpKernel:
    """Wrap a user function ``func(t, x, y)`` as a kernel.

    The function must be symmetric in ``x, y``. For use on a torus it must also
    be L-periodic in its spatial arguments.
    """
    return JumpKernel(params, "custom", func, translation_invariant=translation_invariant,
                      time_dependent=time_dependent, bound=bound, options={"name": name})


def truncate(k: JumpKernel, rho: float) -> JumpKernel:
    """``k_rho(t; x, y) = k(t; x, y) 1{|x - y| <= rho}``.

    Truncating an already truncated kernel keeps the smaller radius, so the
    operation is idempotent and monotone in ``rho``.
    """
    if not rho > 0:
        raise ParameterError(f"truncation radius must be positive: {rho}")
    rho = float(rho)
    if k.trunc_radius is not None:
        rho = min(rho, k.trunc_radius)
    return dataclasses.replace(k, trunc_radius=rho)


def sample_triples(k: JumpKernel, samples: int, box: float = 4.0, seed: int = SAMPLING_SEED):
    """Deterministic scrambled-Halton samples ``(t, x, y)`` with ``x, y`` in ``[-box, box]^d``."""
    d = k.dim
    u = qmc.Halton(d=2 * d + 1, scramble=True, seed=seed).random(samples)
    t = u[:, 0] * k.params.horizon_T
    x = box * (2 * u[:, 1:1 + d] - 1)
    y = box * (2 * u[:, 1 + d:] - 1)
    return t, x, y


def _evaluate_each(k, t, x, y):
    # time may differ per sample; evaluate row by row in a vectorised way
    if not k.time_dependent:
        return k.evaluate(t[0], x, y)
    return np.array([k.evaluate(ti, xi, yi) for ti, xi, yi in zip(t, x, y)]).ravel()


def check_upper_bound(k: JumpKernel, samples: int = 4096, box: float = 4.0) -> CheckReport:
    """Sample ``k / bound`` on quasi-random triples; pass iff ``max ratio <= 1 + 1e-12``."""
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    t, x, y = sample_triples(k, samples, box)
    r = np.sqrt(np.sum((y - x) ** 2, axis=-1))
    keep = r > 0
    t, x, y, r = t[keep], x[keep], y[keep], r[keep]
    ratio = _evaluate_each(k, t, x, y) / k.upper_bound(r)
    i = int(np.argmax(ratio))
    max_ratio = float(ratio[i])
    return CheckReport(
        "upper-bound", {"kernel": k.tag, "samples": samples, "box": box},
        max_ratio <= 1 + UPPER_BOUND_RTOL,
        {"max_ratio": max_ratio,
         "worst_triple": {"t": float(t[i]), "x": x[i].tolist(), "y": y[i].tolist()},
         "zero_fraction": float(np.mean(ratio == 0))},
    )


def check_symmetry(k: JumpKernel, samples: int = 1024, box: float = 4.0) -> CheckReport:
    """Max relative asymmetry ``|k(t;x,y) - k(t;y,x)| / k`` on sampled triples."""
    t, x, y = sample_triples(k, samples, box, seed=SAMPLING_SEED + 1)
    keep = np.sum((y - x) ** 2, axis=-1) > 0
    t, x, y = t[keep], x[keep], y[keep]
    a = _evaluate_each(k, t, x, y)
    b = _evaluate_each(k, t, y, x)
    scale = np.maximum(np.abs(a), np.finfo(float).tiny)
    worst = float(np.max(np.abs(a - b) / scale))
    return CheckReport("symmetry", {"kernel": k.tag, "samples": samples}, worst == 0.0,
                       {"max_relative_asymmetry": worst})


def _ball_forms(k: JumpKernel, lat: Lattice, center, radius, t):
    mask = lat.ball(center, radius)
    idx = np.flatnonzero(mask.ravel())
    if idx.size < 2:
        raise DomainError("coercivity ball must contain at least 2 cells")
    z, dist = pair_displacements(lat, idx)
    pts = lat.coords.reshape(-1, lat.dim)[idx]
    off = ~np.eye(idx.size, dtype=bool)
    KE = np.zeros_like(dist)
    KS = np.zeros_like(dist)
    xi = np.broadcast_to(pts[:, None, :], z.shape)[off]
    KE[off] = k.evaluate(t, xi, xi + z[off])
    KS[off] = dist[off] ** (-lat.dim - k.params.alpha)
    # quadratic forms sum_{i != j} (v_i - v_j)^2 K_ij = 2 v^T (D - K) v; the common factor cancels
    AE = np.diag(KE.sum(axis=1)) - KE
    AS = np.diag(KS.sum(axis=1)) - KS
    return AE, AS


def estimate_coercivity(k: JumpKernel, lat: Lattice, ball_radius: float, t: float,
                        center=None, seed: int = SAMPLING_SEED) -> float:
    """Smallest ratio of the ball-restricted energy to the Gagliardo seminorm.

    Computes ``min_v E_t^B(v, v) / [v]^2_{H^{alpha/2}(B)}`` over nonconstant ``v``
    supported on the discrete ball ``B``. Balls with at most
    ``DENSE_EIG_CELLS`` cells use a dense generalized eigensolve; larger balls
    use LOBPCG from a seeded random start.
    """
    if not 0 < t <= k.params.horizon_T:
        raise DomainError(f"time {t} outside (0, T]")
    if 2 * ball_radius > lat.period / 2:
        raise DomainError("ball diameter must not exceed L/2")
    if center is None:
        center = np.zeros(lat.dim)
    AE, AS = _ball_forms(k, lat, center, ball_radius, t)
    M = AE.shape[0]
    if M <= DENSE_EIG_CELLS:
        Q = scipy.linalg.null_space(np.ones((1, M)))
        ev = scipy.linalg.eigh(Q.T @ AE @ Q, Q.T @ AS @ Q, eigvals_only=True, subset_by_index=[0, 0])
        return float(max(ev[0], 0.0))
    # lift the shared constant null vector to a large eigenvalue; leaves the rest unchanged
    one = np.ones((M, 1)) / math.sqrt(M)
    s = float(np.mean(np.diag(AS)))
    mu = 10.0 * k.params.Lambda * s
    A = AE + mu * (one @ one.T)
    B = AS + s * (one @ one.T)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((M, 4))
    vals, _ = lobpcg(A, X, B=B, largest=False, tol=1e-10, maxiter=2000)
    return float(max(np.min(vals), 0.0))


def check_coercivity(k: JumpKernel, lat: Lattice, ball_radius: float, t: float,
                     tol: float = 1e-10) -> CheckReport:
    """Pass iff the estimated coercivity constant is at least the declared ``lambda - tol``."""
    lam_hat = estimate_coercivity(k, lat, ball_radius, t)
    return CheckReport(
        "coercivity", {"kernel": k.tag, "lattice": lat.describe(), "ball_radius": ball_radius, "t": t},
        lam_hat >= k.params.lambda_ - tol, {"lambda_hat": lam_hat, "declared_lambda": k.params.lambda_})
