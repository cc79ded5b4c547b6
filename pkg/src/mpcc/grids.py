"""Discrete function spaces.

Radial functions on R^N (N >= 3) truncated to a ball with a Dirichlet
condition at r = R, functions on balls proper, and even/odd-free line
functions on [-L, L] vanishing at the ends.  All norms are quadrature
backed; the discrete operator -Delta + lambda is derived from the
quadratic form so that <A u, u>_{L2} reproduces the Dirichlet form
exactly (no separate stencil).

Nodal values are immutable after construction; every operation returns
a new :class:`DiscreteFunction`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solveh_banded
from scipy.optimize import brentq

__all__ = [
    "RadialGrid",
    "LineGrid",
    "DiscreteFunction",
    "sphere_area",
    "talenti_bump",
    "dirichlet_seminorm_sq",
    "h1_norm_sq",
    "composite_integral",
    "dilate",
    "unitary_dilate",
    "translate",
    "apply_operator",
    "solve_operator",
    "csv_dump",
    "csv_loads",
    "csv_load",
]


def sphere_area(N):
    """Surface measure of the unit sphere S^{N-1}; equals 2 for N = 1."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


class _GridBase:
    """Quadrature and operator plumbing shared by both grid kinds.

    Subclasses must set: ``nodes`` (strictly increasing, 1d), ``N``
    (effective dimension), ``weight_power`` (N-1 for radial grids, 0
    for line grids), and ``dirichlet_mask`` (bool per node).
    """

    def _setup(self):
        r = self.nodes
        if not np.all(np.diff(r) > 0):
            raise ValueError("grid nodes must be strictly increasing")
        h = np.diff(r)
        omega = sphere_area(self.N) if self.weight_power > 0 else 1.0
        if self.weight_power > 0:
            # exact cell volumes of the radial weight r^{N-1}
            vol = omega * (r[1:] ** self.N - r[:-1] ** self.N) / self.N
        else:
            vol = h.copy()
        self.cell_h = h
        self.cell_volumes = vol
        # stiffness coefficient per cell: piecewise-constant derivative
        self.cell_stiff = vol / h**2
        # lumped mass: each cell splits its volume between its endpoints
        m = np.zeros(len(r))
        m[:-1] += 0.5 * vol
        m[1:] += 0.5 * vol
        self.mass = m
        self._free = ~self.dirichlet_mask

    # -- quadrature ----------------------------------------------------

    @property
    def npoints(self):
        return len(self.nodes)

    def integrate(self, samples):
        """Weighted sum approximating the volume integral of nodal samples."""
        return float(np.dot(self.mass, samples))

    def seminorm_sq(self, values):
        d = np.diff(values)
        return float(np.dot(self.cell_stiff, d * d))

    def l2_sq(self, values):
        return float(np.dot(self.mass, values * values))

    def bilinear(self, u, v):
        """The Dirichlet bilinear form a(u, v)."""
        return float(np.dot(self.cell_stiff, np.diff(u) * np.diff(v)))

    # -- operator ------------------------------------------------------

    def stiffness_apply(self, values):
        c = self.cell_stiff
        d = c * np.diff(values)
        out = np.zeros_like(values)
        out[:-1] -= d
        out[1:] += d
        return out

    def operator_apply(self, values, lam):
        """Nodal values of (-Delta + lam) u, Dirichlet nodes returned as 0."""
        out = self.stiffness_apply(values) / self.mass + lam * values
        out[self.dirichlet_mask] = 0.0
        return out

    def _banded(self, lam):
        n = self.npoints
        c = self.cell_stiff
        diag = np.zeros(n)
        diag[:-1] += c
        diag[1:] += c
        diag = diag + lam * self.mass
        off = np.empty(n - 1)
        off[:] = -c
        free = self._free
        idx = np.nonzero(free)[0]
        # free nodes are contiguous on both grid kinds
        d = diag[idx]
        o = off[idx[:-1]] if len(idx) > 1 else np.empty(0)
        ab = np.zeros((2, len(idx)))
        ab[0, 1:] = o
        ab[1, :] = d
        return ab, idx

    def operator_solve(self, rhs_nodal, lam):
        """Solve (-Delta + lam) v = rhs weakly: (K + lam M) v = M rhs."""
        ab, idx = self._banded(lam)
        b = (self.mass * rhs_nodal)[idx]
        v = np.zeros(self.npoints)
        v[idx] = solveh_banded(ab, b)
        return v

    def eigen_smallest(self, k=1):
        """Smallest Dirichlet eigenvalues of -Delta (generalized, lumped mass)."""
        ab, idx = self._banded(0.0)
        from scipy.linalg import eigh_tridiagonal

        d = ab[1].copy()
        e = ab[0, 1:].copy()
        m = self.mass[idx]
        # symmetrize M^{-1} K with the diagonal mass
        s = 1.0 / np.sqrt(m)
        d = d * s * s
        e = e * s[:-1] * s[1:]
        vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1))
        return vals

    # -- resampling ----------------------------------------------------

    def interpolator(self, values):
        return PchipInterpolator(self.nodes, values, extrapolate=False)


@dataclass(eq=False)
class RadialGrid(_GridBase):
    """Radial mesh 0 = r_0 < ... < r_M = R with a Dirichlet end node.

    ``domain_kind`` is ``"whole_space_truncated"`` for problems posed on
    R^N and cut off at R, or ``"ball"`` for genuine Dirichlet problems
    on B_R.  Geometric spacing clusters nodes near the origin so that
    dilation towers gamma^{-j} stay resolved.
    """

    N: int
    nodes: np.ndarray
    domain_kind: str = "whole_space_truncated"
    spacing: str = "uniform"

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("radial grids require N >= 3")
        if self.domain_kind not in ("whole_space_truncated", "ball"):
            raise ValueError(f"unknown domain_kind {self.domain_kind!r}")
        self.nodes = np.asarray(self.nodes, dtype=float)
        if len(self.nodes) < 65:
            raise ValueError("radial grids require at least 64 cells")
        if self.nodes[0] != 0.0:
            raise ValueError("first radial node must be 0")
        self.weight_power = self.N - 1
        mask = np.zeros(len(self.nodes), dtype=bool)
        mask[-1] = True
        self.dirichlet_mask = mask
        self._setup()

    @classmethod
    def uniform(cls, N, R, M, domain_kind="whole_space_truncated"):
        return cls(N, np.linspace(0.0, R, M + 1), domain_kind, "uniform")

    @classmethod
    def geometric(cls, N, R, M, r1, domain_kind="whole_space_truncated"):
        """Nodes with geometrically growing spacing; first node at r1."""
        if not 0 < r1 < R / M:
            raise ValueError("need 0 < r1 < R/M for a geometric grid")

        def gap(g):
            lg = M * math.log(g)
            if lg > 600.0:  # g^M overflows; the first cell is then < r1
                return -r1
            return R * (g - 1.0) / (math.exp(lg) - 1.0) - r1

        g = brentq(gap, 1.0 + 1e-14, min(4.0, math.exp(650.0 / M)))
        i = np.arange(M + 1)
        nodes = R * (g**i - 1.0) / (g**M - 1.0)
        nodes[-1] = R
        return cls(N, nodes, domain_kind, "geometric")

    @property
    def R(self):
        return float(self.nodes[-1])

    @property
    def two_star(self):
        return 2.0 * self.N / (self.N - 2.0)

    @property
    def is_ball(self):
        return self.domain_kind == "ball"


@dataclass(eq=False)
class LineGrid(_GridBase):
    """Uniform nodes on [-L, L]; values vanish at both ends (truncated R)."""

    L: float
    M: int

    def __post_init__(self):
        if self.L <= 0 or self.M < 64:
            raise ValueError("line grids require L > 0 and at least 64 cells")
        self.N = 1
        self.nodes = np.linspace(-self.L, self.L, self.M + 1)
        self.weight_power = 0
        mask = np.zeros(self.M + 1, dtype=bool)
        mask[0] = mask[-1] = True
        self.dirichlet_mask = mask
        self._setup()

    @property
    def h(self):
        return 2.0 * self.L / self.M


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Nodal values on a grid; boundary (Dirichlet) nodes must be zero."""

    grid: object
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.npoints,):
            raise ValueError("value vector does not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("nodal values must be finite")
        if np.any(v[self.grid.dirichlet_mask] != 0.0):
            raise ValueError("boundary nodes must vanish")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(cls, grid, values):
        """Build a function, forcing boundary nodes to zero."""
        v = np.array(values, dtype=float)
        v[grid.dirichlet_mask] = 0.0
        return cls(grid, v)

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.npoints))

    def with_values(self, values):
        return DiscreteFunction.from_samples(self.grid, values)

    def __add__(self, other):
        self._check(other)
        return DiscreteFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return DiscreteFunction(self.grid, self.values - other.values)

    def __mul__(self, c):
        return DiscreteFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def _check(self, other):
        if other.grid is not self.grid:
            raise ValueError("functions live on different grids")


def talenti_bump(grid, width=1.0, amplitude=1.0):
    """Bump profile (1 + (r/width)^2)^{-(N-2)/2}; sech-shaped on line grids.

    The radial shape is the decay profile of the critical-exponent
    extremal and makes a good ascent/path seed at any width.
    """
    r = grid.nodes
    if isinstance(grid, LineGrid):
        vals = amplitude / np.cosh(r / width)
    else:
        p = (grid.N - 2) / 2.0
        vals = amplitude * (1.0 + (r / width) ** 2) ** (-p)
    return DiscreteFunction.from_samples(grid, vals)


# -- norms and integrals ------------------------------------------------


def dirichlet_seminorm_sq(u):
    """Squared gradient norm, int |grad u|^2 dx, by cell quadrature."""
    return u.grid.seminorm_sq(u.values)


def h1_norm_sq(u, lam):
    """Squared norm int (|grad u|^2 + lam u^2) dx; requires lam > 0."""
    if lam <= 0:
        raise ValueError("the H1 regime requires lambda > 0")
    return u.grid.seminorm_sq(u.values) + lam * u.grid.l2_sq(u.values)


def composite_integral(u, spec, x_aware=True):
    """Quadrature of F(x, u(x)) over the domain.

    ``spec`` provides a vectorized density F via ``eval_F``; for
    autonomous kinds the node coordinate is ignored.
    """
    from .nonlinearity import eval_F

    x = u.grid.nodes if x_aware else np.zeros_like(u.grid.nodes)
    return u.grid.integrate(eval_F(spec, x, u.values))


# -- group actions -------------------------------------------------------


def _resample(u, points):
    interp = u.grid.interpolator(u.values)
    vals = interp(points)
    return np.nan_to_num(vals, nan=0.0)


def dilate(u, t):
    """u(./t) resampled on the same radial grid; zero beyond R."""
    if t <= 0:
        raise ValueError("dilation parameter must be positive")
    if isinstance(u.grid, LineGrid):
        raise ValueError("dilate is defined on radial grids")
    pts = u.grid.nodes / t
    vals = _resample(u, pts)
    vals[pts > u.grid.R] = 0.0
    return DiscreteFunction.from_samples(u.grid, vals)


def unitary_dilate(u, j, gamma):
    """gamma^{(N-2)j/2} u(gamma^j .): the norm-preserving dilation."""
    if isinstance(u.grid, LineGrid):
        raise ValueError("unitary_dilate is defined on radial grids")
    N = u.grid.N
    amp = float(gamma) ** ((N - 2) * j / 2.0)
    pts = u.grid.nodes * float(gamma) ** j
    vals = amp * _resample(u, pts)
    vals[pts > u.grid.R] = 0.0
    return DiscreteFunction.from_samples(u.grid, vals)


def translate(u, y):
    """u(. - y) on the line, zero padded; exact for lattice shifts."""
    grid = u.grid
    if not isinstance(grid, LineGrid):
        raise ValueError("translate is defined on line grids")
    if abs(y) >= 2 * grid.L:
        raise ValueError("shift moves the support outside the grid")
    h = grid.h
    k = y / h
    vals = np.zeros(grid.npoints)
    if abs(k - round(k)) < 1e-12 * max(1.0, abs(k)):
        k = int(round(k))
        if k >= 0:
            vals[k:] = u.values[: grid.npoints - k]
        else:
            vals[:k] = u.values[-k:]
    else:
        pts = grid.nodes - y
        vals = _resample(u, pts)
        vals[np.abs(pts) > grid.L] = 0.0
    return DiscreteFunction.from_samples(grid, vals)


# -- operator -------------------------------------------------------------


def apply_operator(u, lam):
    """Nodal (-Delta + lam) u with the form-consistent discretization.

    By construction <apply_operator(u, 0), u>_{L2} equals the Dirichlet
    form of u exactly.
    """
    return DiscreteFunction(u.grid, u.grid.operator_apply(u.values, lam))


def solve_operator(rhs, lam):
    """Invert (-Delta + lam) with the grid's Dirichlet condition."""
    vals = rhs.grid.operator_solve(rhs.values, lam)
    return DiscreteFunction.from_samples(rhs.grid, vals)


# -- CSV round trip -------------------------------------------------------


def csv_dump(u, path_or_buf):
    """Write (node, value) rows with a grid metadata header line."""
    grid = u.grid
    if isinstance(grid, LineGrid):
        meta = f"# grid=line L={grid.L!r} M={grid.M}"
    else:
        meta = (
            f"# grid=radial N={grid.N} R={grid.R!r} M={grid.npoints - 1}"
            f" spacing={grid.spacing} domain={grid.domain_kind}"
        )
    lines = [meta, "node,value"]
    lines += [f"{r!r},{v!r}" for r, v in zip(grid.nodes, u.values)]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def csv_loads(text, grid=None):
    """Inverse of :func:`csv_dump`.

    When ``grid`` is omitted a grid is rebuilt from the header metadata
    and the node column.  Boundary values below 1e-9 of the max are
    snapped to zero; larger ones are an error.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing grid metadata header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    rows = [ln for ln in lines[1:] if not ln.startswith("#") and ln != "node,value"]
    data = np.array([[float(a) for a in ln.split(",")] for ln in rows])
    nodes, vals = data[:, 0], data[:, 1]
    if grid is None:
        if meta.get("grid") == "line":
            grid = LineGrid(float(meta["L"]), int(meta["M"]))
        else:
            grid = RadialGrid(
                int(meta["N"]),
                nodes,
                meta.get("domain", "whole_space_truncated"),
                meta.get("spacing", "uniform"),
            )
    if not np.allclose(nodes, grid.nodes, rtol=0, atol=1e-12 * max(1.0, grid.nodes[-1])):
        raise ValueError("node column does not match the grid")
    scale = np.max(np.abs(vals)) or 1.0
    bad = np.abs(vals[grid.dirichlet_mask]) > 1e-9 * scale
    if np.any(bad):
        raise ValueError("nonzero boundary values in profile file")
    return DiscreteFunction.from_samples(grid, vals)


def csv_load(path):
    with open(path) as fh:
        return csv_loads(fh.read())
