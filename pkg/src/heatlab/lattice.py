"""Periodic lattice geometry and the discrete nonlocal generator.

The torus ``[0, L)^d`` with spacing ``h`` stands in for R^d. Distances are
minimum-image distances; a displacement of exactly ``L/2`` along an axis is
always represented by the positive image.

For a kernel ``k`` the generator at time ``t`` is the matrix

    G_ij = k(t; x_i, x_j) h^d            (i != j),
    G_ii = -sum_{j != i} G_ij,

so that ``(G u)_i = sum_j (u_j - u_i) k(t; x_i, x_j) h^d`` approximates
``L_t u(x_i)``. Translation-invariant kernels are stored as a stencil (the
first row) and applied with FFTs; others are stored densely.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ParameterError, ResourceError, ShapeError

#: Default cap on the number of cells for dense N x N matrices.
DENSE_CAP = 4096

# Relative slack used for "distance <= radius" tests on lattice distances.
RADIUS_RTOL = 1e-12


@dataclass(frozen=True)
class Lattice:
    """Periodic uniform grid with ``n = L/h`` cells per axis (``n`` even).

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    spacing : float
        Grid spacing ``h``.
    period : float
        Period ``L`` of the torus.

    Examples
    --------
    >>> lat = Lattice(1, 0.5, 8.0)
    >>> lat.n, lat.cell_volume
    (16, 0.5)
    """

    dim: int
    spacing: float
    period: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterError(f"dim must be 1 or 2, got {self.dim}")
        if not self.spacing > 0 or not self.period > 0:
            raise ParameterError("spacing and period must be positive")
        ratio = self.period / self.spacing
        n = int(round(ratio))
        if abs(ratio - n) > 1e-9 * max(1.0, ratio) or n % 2 or n < 2:
            raise ParameterError(f"L/h must be an even integer, got {ratio!r}")

    @cached_property
    def n(self) -> int:
        return int(round(self.period / self.spacing))

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.n ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def diameter(self) -> float:
        """Largest minimum-image distance between two points of the torus."""
        return 0.5 * self.period * np.sqrt(self.dim)

    def refine(self) -> "Lattice":
        """Same torus with half the spacing."""
        return Lattice(self.dim, self.spacing / 2, self.period)

    @cached_property
    def axis_offsets(self) -> np.ndarray:
        """Min-image displacement for an index difference ``o = 0..n-1`` along one axis."""
        o = np.arange(self.n)
        return np.where(o <= self.n // 2, o, o - self.n) * self.spacing

    @cached_property
    def offsets(self) -> np.ndarray:
        """Displacements from cell 0 to every cell, shape ``shape + (dim,)``."""
        grids = np.meshgrid(*([self.axis_offsets] * self.dim), indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def offset_distances(self) -> np.ndarray:
        return np.sqrt(np.sum(self.offsets ** 2, axis=-1))

    @cached_property
    def coords(self) -> np.ndarray:
        """Cell centers ``i*h``, shape ``shape + (dim,)``."""
        ax = np.arange(self.n) * self.spacing
        grids = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(grids, axis=-1)

    def min_image(self, z) -> np.ndarray:
        """Wrap displacements into ``(-L/2, L/2]`` componentwise."""
        z = np.asarray(z, dtype=float)
        L = self.period
        return -(np.mod(-z + L / 2, L) - L / 2)

    def point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ShapeError(f"expected a point with {self.dim} coordinates, got shape {x.shape}")
        return x

    def distances_from(self, x) -> np.ndarray:
        """Minimum-image distance from point ``x`` to every cell center."""
        z = self.min_image(self.coords - self.point(x))
        return np.sqrt(np.sum(z ** 2, axis=-1))

    def cell_of(self, x) -> int:
        """Flat index of the cell whose center is nearest to ``x``."""
        x = self.point(x)
        idx = np.mod(np.rint(x / self.spacing).astype(int), self.n)
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def cell_coords(self, index) -> np.ndarray:
        return self.coords.reshape(-1, self.dim)[self.flat_index(index)]

    def flat_index(self, index) -> int:
        """Flat cell index from an int or a per-axis index tuple."""
        if np.ndim(index) == 1:
            index = np.ravel_multi_index(tuple(int(i) for i in index), self.shape)
        index = int(index)
        if not 0 <= index < self.cell_count:
            raise DomainError(f"cell index {index} outside 0..{self.cell_count - 1}")
        return index

    def ball(self, center, radius) -> np.ndarray:
        """Boolean mask of cells within (closed) distance ``radius`` of ``center``."""
        return self.distances_from(center) <= radius * (1 + RADIUS_RTOL)

    def field(self, values) -> np.ndarray:
        """Validate/reshape values into a float array of shape :attr:`shape`."""
        arr = np.asarray(values, dtype=float)
        if arr.shape == self.shape:
            return arr
        if arr.size == self.cell_count and arr.ndim == 1:
            return arr.reshape(self.shape)
        raise ShapeError(f"field of shape {arr.shape} does not live on lattice of shape {self.shape}")

    def describe(self) -> dict:
        return {"d": self.dim, "h": self.spacing, "L": self.period}


def pair_displacements(lat: Lattice, idx) -> tuple[np.ndarray, np.ndarray]:
    """Min-image displacement vectors and distances among the cells ``idx`` (flat indices).

    Returns arrays of shape ``(M, M, d)`` and ``(M, M)``.
    """
    pts = lat.coords.reshape(-1, lat.dim)[np.asarray(idx)]
    z = lat.min_image(pts[None, :, :] - pts[:, None, :])
    return z, np.sqrt(np.sum(z ** 2, axis=-1))


class Generator:
    """Discrete generator of ``L_t`` at a fixed time.

    Attributes
    ----------
    lattice : Lattice
    time : float
    kernel_tag : str
    stencil : ndarray or None
        Row of the matrix belonging to cell 0, indexed by offset (translation-invariant case).
    dense : ndarray or None
        Full ``N x N`` matrix (general case).
    """

    def __init__(self, lattice, time, kernel_tag, stencil=None, dense=None):
        if (stencil is None) == (dense is None):
            raise ValueError("exactly one of stencil/dense must be given")
        self.lattice = lattice
        self.time = float(time)
        self.kernel_tag = kernel_tag
        self.stencil = stencil
        self.dense = dense

    @property
    def translation_invariant(self) -> bool:
        return self.stencil is not None

    @cached_property
    def symbol(self) -> np.ndarray:
        """Eigenvalues of a circulant generator on the ``rfftn`` frequency grid (zero mode exactly 0)."""
        if self.stencil is None:
            raise TypeError("symbol only exists for translation-invariant generators")
        lam = np.fft.rfftn(self.stencil).real
        lam.flat[0] = 0.0
        return lam

    def matrix(self, cap: int = DENSE_CAP) -> np.ndarray:
        """Dense ``N x N`` matrix (built from the stencil when needed)."""
        if self.dense is not None:
            return self.dense
        N = self.lattice.cell_count
        if N > cap:
            raise ResourceError(f"{N} cells exceed the dense cap {cap}")
        return circulant_matrix(self.lattice, self.stencil)

    def apply(self, u) -> np.ndarray:
        """``G u`` for a field ``u`` (shape :attr:`Lattice.shape`)."""
        u = self.lattice.field(u)
        if self.stencil is not None:
            U = np.fft.rfftn(u)
            return np.fft.irfftn(U * self.symbol, s=u.shape, axes=tuple(range(u.ndim)))
        return (self.dense @ u.ravel()).reshape(u.shape)

    @property
    def offdiag_max(self) -> float:
        if self.stencil is not None:
            s = self.stencil.copy()
            s.flat[0] = 0.0
            return float(np.max(np.abs(s)))
        m = self.dense.copy()
        np.fill_diagonal(m, 0.0)
        return float(np.max(np.abs(m)))


def circulant_matrix(lat: Lattice, first_row: np.ndarray) -> np.ndarray:
    """Dense matrix ``M[i, j] = first_row[(j - i) mod n]`` (per axis)."""
    first_row = np.asarray(first_row).reshape(lat.shape)
    a = np.arange(lat.n)
    if lat.dim == 1:
        return first_row[(a[None, :] - a[:, None]) % lat.n]
    n = lat.n
    # i = (i0, i1), j = (j0, j1); entry = row[(j0 - i0) % n, (j1 - i1) % n]
    i0 = a[:, None, None, None]
    i1 = a[None, :, None, None]
    j0 = a[None, None, :, None]
    j1 = a[None, None, None, :]
    out = first_row[(j0 - i0) % n, (j1 - i1) % n]
    return out.reshape(lat.cell_count, lat.cell_count)


def assemble_generator(k, lat: Lattice, t: float, dense_cap: int = DENSE_CAP) -> Generator:
    """Assemble the generator of kernel ``k`` on ``lat`` at time ``t``.

    Off-diagonal weights are midpoint evaluations ``k(t; x_i, x_j) h^d`` at
    minimum-image separation; the diagonal is the negated off-diagonal row sum.

    Raises
    ------
    DomainError
        If ``t`` is outside ``(0, T]``.
    ResourceError
        If a non-translation-invariant kernel needs more than ``dense_cap`` cells.
    """
    T = k.params.horizon_T
    if not 0 < t <= T:
        raise DomainError(f"time {t} outside (0, {T}]")
    if k.trunc_radius is not None and k.trunc_radius >= lat.period / 2:
        warnings.warn(
            f"truncation radius {k.trunc_radius} >= L/2 = {lat.period / 2}: "
            "indistinguishable from no truncation on this torus", stacklevel=2)
    hd = lat.cell_volume
    if k.translation_invariant:
        z = lat.offsets.reshape(-1, lat.dim)
        w = np.zeros(lat.cell_count)
        w[1:] = k.evaluate(t, np.zeros_like(z[1:]), z[1:]) * hd
        w[0] = -np.sum(w[1:])
        return Generator(lat, t, k.tag, stencil=w.reshape(lat.shape))
    N = lat.cell_count
    if N > dense_cap:
        raise ResourceError(f"dense generator with {N} cells exceeds cap {dense_cap}")
    pts = lat.coords.reshape(-1, lat.dim)
    G = np.zeros((N, N))
    for i in range(N - 1):
        # each row independently: upper triangle, mirrored for exact symmetry
        z = lat.min_image(pts[i + 1:] - pts[i])
        x = np.broadcast_to(pts[i], z.shape)
        G[i, i + 1:] = k.evaluate(t, x, x + z) * hd
    G = G + G.T
    np.fill_diagonal(G, -np.sum(G, axis=1))
    return Generator(lat, t, k.tag, dense=G)


def dirichlet_form(g: Generator, u, v) -> float:
    """Discrete energy ``E_t(u, v) = sum_{i != j} (u_i - u_j)(v_i - v_j) k_ij h^{2d}``.

    This counts ordered pairs, i.e. ``E_t(u, v) = 2 <-G u, v> h^d``.
    """
    lat = g.lattice
    u = lat.field(u)
    v = lat.field(v)
    return float(-2.0 * lat.cell_volume * np.sum(g.apply(u) * v))


def gagliardo_seminorm(lat: Lattice, u, alpha: float, region=None) -> float:
    """Discrete ``[u]^2_{H^{alpha/2}}`` over ordered pairs of distinct cells in ``region``.

    ``sum_{i != j} (u_i - u_j)^2 |x_i - x_j|^{-d-alpha} h^{2d}``

    Parameters
    ----------
    region : None, (center, radius) or boolean mask
        ``None`` means the whole torus.
    """
    if not 0 < alpha < 2:
        raise ParameterError("alpha must lie in (0, 2)")
    u = lat.field(u)
    d = lat.dim
    hd = lat.cell_volume
    if region is None:
        r = lat.offset_distances.copy()
        w = np.zeros_like(r)
        w.flat[1:] = r.flat[1:] ** (-d - alpha)
        # sum_{ij} (u_i - u_j)^2 w_{j-i} = 2 W sum u^2 - 2 u.(w * u)
        conv = np.fft.irfftn(np.fft.rfftn(u) * np.fft.rfftn(w).real, s=u.shape, axes=tuple(range(u.ndim)))
        val = 2 * np.sum(w) * np.sum(u ** 2) - 2 * np.sum(u * conv)
        return float(max(val, 0.0) * hd * hd)
    mask = _region_mask(lat, region)
    idx = np.flatnonzero(mask.ravel())
    if idx.size < 2:
        raise DomainError("region must contain at least 2 cells")
    _, dist = pair_displacements(lat, idx)
    vals = u.ravel()[idx]
    with np.errstate(divide="ignore"):
        wgt = np.where(dist > 0, dist, np.inf) ** (-d - alpha)
    diff = (vals[:, None] - vals[None, :]) ** 2
    return float(np.sum(diff * wgt) * hd * hd)


def _region_mask(lat: Lattice, region) -> np.ndarray:
    if isinstance(region, np.ndarray) and region.dtype == bool:
        return region.reshape(lat.shape)
    center, radius = region
    return lat.ball(center, radius)
