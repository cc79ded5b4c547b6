"""Nonlinear densities F(x, s) and their dilation/spatial asymptotics.

A density is described symbolically by :class:`NonlinearitySpec` and
evaluated pointwise (vectorized) through :func:`eval_F` / :func:`eval_f`.
The discrete-dilation rescaling with factor gamma > 1 acts as

    F  ->  gamma^{-N j} F(gamma^{-j} x, gamma^{(N-2)j/2} s),

and the limits of this rescaling as j -> +inf / -inf (together with the
spatial limit |x| -> inf) define the asymptotic family of a density.
Selfsimilar densities are the fixed points of the rescaling; they are
determined by their values on one multiplicative period and can be
reconstructed from samples by :func:`selfsimilar_extend`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DivergenceError, OverflowGuardError, SpecError

__all__ = [
    "Envelope",
    "NonlinearitySpec",
    "AsymptoticFamily",
    "SampleBox",
    "GrowthCheck",
    "eval_F",
    "eval_f",
    "dilation_rescaled_F",
    "asymptotic_limit",
    "asymptotic_table",
    "build_asymptotic_family",
    "selfsimilar_extend",
    "check_selfsimilar",
    "check_growth",
    "check_ar",
]

_KINDS = (
    "power",
    "critical_stem",
    "oscillating_stem",
    "spatial_modulation",
    "sum",
    "table_selfsimilar",
    "quadratic",
    "scaled",
    "custom",
)


@dataclass(frozen=True)
class Envelope:
    """Radial spatial modulation factor 1 + amplitude * exp(-|x|^2)."""

    amplitude: float

    def __call__(self, x):
        return 1.0 + self.amplitude * np.exp(-np.asarray(x, dtype=float) ** 2)

    @property
    def at_origin(self):
        return 1.0 + self.amplitude

    @property
    def at_infinity(self):
        return 1.0


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Symbolic description of a density F(x, s) with derivative f = dF/ds.

    Use the classmethod factories; invalid parameters are rejected here,
    not at evaluation time.  ``N`` is the ambient dimension (the critical
    exponent 2* = 2N/(N-2) exists only for N >= 3) and ``gamma`` > 1 is
    the dilation factor the asymptotics refer to.
    """

    kind: str
    N: int
    gamma: float = 2.0
    p: float | None = None
    eps: float | None = None
    coeff: float | None = None
    factor: float | None = None
    base: "NonlinearitySpec | None" = None
    envelope: Envelope | None = None
    terms: tuple = ()
    table: tuple | None = field(default=None, repr=False)
    F_fn: object = None
    f_fn: object = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SpecError(f"unknown kind {self.kind!r}")
        if self.N < 1:
            raise SpecError("dimension must be >= 1")
        if self.gamma <= 1.0:
            raise SpecError("dilation factor gamma must exceed 1")
        if self.kind in ("critical_stem", "oscillating_stem", "table_selfsimilar") and self.N < 3:
            raise SpecError(f"{self.kind} requires N >= 3")
        if self.kind == "power" and (self.p is None or self.p <= 2.0):
            raise SpecError("power kind requires exponent p > 2")
        if self.kind == "oscillating_stem" and not (0.0 <= self.eps < 1.0):
            raise SpecError("oscillation amplitude must lie in [0, 1)")
        if self.kind == "table_selfsimilar":
            object.__setattr__(self, "table", _prep_table(self))

    # -- factories -------------------------------------------------------

    @classmethod
    def power(cls, p, N, gamma=2.0):
        """F(s) = |s|^p / p, the homogeneous subcritical model (p > 2)."""
        return cls("power", N, gamma, p=float(p))

    @classmethod
    def critical_stem(cls, N, gamma=2.0):
        """F(s) = |s|^{2*}; invariant under every dilation rescaling."""
        return cls("critical_stem", N, gamma)

    @classmethod
    def oscillating_stem(cls, eps, gamma, N):
        """|s|^{2*} (1 + eps sin(2 pi ln|s| / ln gamma)).

        Log-periodic oscillation about the critical stem.  Exactly
        selfsimilar with factor gamma when (N-2)/2 is an integer; the
        toolkit's scenarios use N = 4.
        """
        return cls("oscillating_stem", N, float(gamma), eps=float(eps))

    @classmethod
    def quadratic(cls, coeff, N, gamma=2.0):
        """F(s) = coeff * s^2 (mass-type perturbation for ball problems)."""
        return cls("quadratic", N, gamma, coeff=float(coeff))

    @classmethod
    def spatial_modulation(cls, base, envelope):
        """F(x, s) = envelope(|x|) * F_base(s)."""
        if not isinstance(envelope, Envelope):
            envelope = Envelope(float(envelope))
        return cls("spatial_modulation", base.N, base.gamma, base=base, envelope=envelope)

    @classmethod
    def sum_of(cls, terms, N=None, gamma=None):
        terms = tuple(terms)
        if terms:
            N = terms[0].N if N is None else N
            gamma = terms[0].gamma if gamma is None else gamma
            if any(t.N != N for t in terms):
                raise SpecError("sum terms must share the dimension")
        return cls("sum", N or 3, gamma or 2.0, terms=terms)

    @classmethod
    def zero(cls, N, gamma=2.0):
        return cls.sum_of((), N=N, gamma=gamma)

    @classmethod
    def scaled(cls, base, factor):
        """factor * F_base; e.g. a sign flip of the stem."""
        return cls("scaled", base.N, base.gamma, base=base, factor=float(factor))

    @classmethod
    def table_selfsimilar(cls, gamma, s_base, F_base, N, even_symmetric=True,
                          s_base_neg=None, F_base_neg=None):
        """Selfsimilar density pinned by samples on one period [1, gamma^{(N-2)/2}].

        For N = 4 the period interval is [1, gamma].  The negative branch
        defaults to the even reflection of the positive one.
        """
        tbl = (
            np.asarray(s_base, dtype=float),
            np.asarray(F_base, dtype=float),
            None if s_base_neg is None else np.asarray(s_base_neg, dtype=float),
            None if F_base_neg is None else np.asarray(F_base_neg, dtype=float),
            bool(even_symmetric),
        )
        return cls("table_selfsimilar", N, float(gamma), table=tbl)

    @classmethod
    def custom(cls, F_fn, f_fn, N, gamma=2.0):
        """Black-box density for checks and tests (vectorized callables)."""
        return cls("custom", N, gamma, F_fn=F_fn, f_fn=f_fn)

    # -- structure -------------------------------------------------------

    @property
    def two_star(self):
        if self.N < 3:
            raise SpecError("2* requires N >= 3")
        return 2.0 * self.N / (self.N - 2.0)

    @property
    def autonomous(self):
        if self.kind == "spatial_modulation":
            return False
        if self.kind in ("sum", "scaled"):
            return all(t.autonomous for t in self.terms) if self.kind == "sum" else self.base.autonomous
        return True

    @property
    def is_zero(self):
        return self.kind == "sum" and not self.terms


def _prep_table(spec):
    s_pos, F_pos, s_neg, F_neg, even = spec.table
    m = (spec.N - 2) / 2.0
    cover = spec.gamma**max(1.0, m)
    order = np.argsort(s_pos)
    s_pos, F_pos = s_pos[order], F_pos[order]
    if s_pos[0] > 1.0 + 1e-12 or s_pos[-1] < cover - 1e-12:
        raise SpecError(
            f"base samples must cover [1, {cover:.6g}] for N={spec.N}, gamma={spec.gamma}"
        )
    pos = PchipInterpolator(s_pos, F_pos, extrapolate=True)
    if s_neg is None:
        if not even:
            raise SpecError("negative branch samples required unless even_symmetric")
        neg_interp = lambda s: pos(-s)  # noqa: E731
        neg_deriv = lambda s: -pos.derivative()(-s)  # noqa: E731
    else:
        order = np.argsort(s_neg)
        neg = PchipInterpolator(s_neg[order], F_neg[order], extrapolate=True)
        neg_interp, neg_deriv = neg, neg.derivative()
    return (pos, pos.derivative(), neg_interp, neg_deriv, cover)


# -- evaluation -----------------------------------------------------------


def _stem_powers(spec):
    return spec.two_star


def eval_F(spec, x, s):
    """F(x, s), vectorized over broadcastable ``x`` and ``s``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    kind = spec.kind
    if kind == "power":
        out = np.abs(s) ** spec.p / spec.p
    elif kind == "critical_stem":
        out = np.abs(s) ** spec.two_star
    elif kind == "oscillating_stem":
        ts = spec.two_star
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = 2.0 * np.pi * np.log(a) / math.log(spec.gamma)
            out = a**ts * (1.0 + spec.eps * np.sin(phase))
        out = np.where(a == 0.0, 0.0, out)
    elif kind == "quadratic":
        out = spec.coeff * s**2
    elif kind == "spatial_modulation":
        out = spec.envelope(x) * eval_F(spec.base, x, s)
    elif kind == "sum":
        out = np.zeros(np.broadcast(x, s).shape)
        for t in spec.terms:
            out = out + eval_F(t, x, s)
    elif kind == "scaled":
        out = spec.factor * eval_F(spec.base, x, s)
    elif kind == "table_selfsimilar":
        out = _table_eval(spec, s, derivative=False)
    elif kind == "custom":
        out = np.asarray(spec.F_fn(x, s), dtype=float)
    else:  # pragma: no cover
        raise SpecError(kind)
    return out + np.zeros(np.broadcast(x, s).shape)


def eval_f(spec, x, s):
    """f(x, s) = dF/ds, vectorized like :func:`eval_F`."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    kind = spec.kind
    if kind == "power":
        out = np.abs(s) ** (spec.p - 2.0) * s
    elif kind == "critical_stem":
        ts = spec.two_star
        out = ts * np.abs(s) ** (ts - 2.0) * s
    elif kind == "oscillating_stem":
        ts = spec.two_star
        c = 2.0 * np.pi / math.log(spec.gamma)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = 2.0 * np.pi * np.log(a) / math.log(spec.gamma)
            mag = a ** (ts - 1.0) * (
                ts * (1.0 + spec.eps * np.sin(phase)) + c * spec.eps * np.cos(phase)
            )
            out = np.sign(s) * mag
        out = np.where(a == 0.0, 0.0, out)
    elif kind == "quadratic":
        out = 2.0 * spec.coeff * s
    elif kind == "spatial_modulation":
        out = spec.envelope(x) * eval_f(spec.base, x, s)
    elif kind == "sum":
        out = np.zeros(np.broadcast(x, s).shape)
        for t in spec.terms:
            out = out + eval_f(t, x, s)
    elif kind == "scaled":
        out = spec.factor * eval_f(spec.base, x, s)
    elif kind == "table_selfsimilar":
        out = _table_eval(spec, s, derivative=True)
    elif kind == "custom":
        out = np.asarray(spec.f_fn(x, s), dtype=float)
    else:  # pragma: no cover
        raise SpecError(kind)
    return out + np.zeros(np.broadcast(x, s).shape)


def _table_eval(spec, s, derivative):
    pos, dpos, neg, dneg, cover = spec.table
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.zeros_like(s)
    nz = s != 0.0
    if np.any(nz):
        m = (spec.N - 2) / 2.0
        step = spec.gamma**m
        j = np.floor(np.log(np.abs(s[nz])) / math.log(step))
        sb = s[nz] / step**j
        if derivative:
            amp = spec.gamma ** ((spec.N + 2) / 2.0 * j)
            vals = np.where(sb >= 0, dpos(np.abs(sb)), dneg(-np.abs(sb)))
        else:
            amp = spec.gamma ** (spec.N * j)
            vals = np.where(sb >= 0, pos(np.abs(sb)), neg(-np.abs(sb)))
        res = amp * vals
        if not np.all(np.isfinite(res)):
            raise OverflowGuardError("selfsimilar extension overflowed")
        out[nz] = res
    return out[0] if scalar else out


def selfsimilar_extend(gamma, s_base, F_base, s, N):
    """Extend one-period samples of a selfsimilar density to arbitrary s.

    ``s_base`` must cover [1, gamma^{(N-2)/2}] (and, via even reflection,
    the negative branch); ``s`` may be a scalar or array; F(0) = 0.
    """
    spec = NonlinearitySpec.table_selfsimilar(gamma, s_base, F_base, N)
    return _table_eval(spec, s, derivative=False)


# -- dilation rescaling and asymptotics ------------------------------------


def dilation_rescaled_F(spec, j, x, s):
    """gamma^{N j} F(gamma^{-j} x, gamma^{(N-2)j/2} s) with overflow guard."""
    if spec.N < 3:
        raise SpecError("dilation rescaling requires N >= 3")
    g = spec.gamma
    amp = g ** (spec.N * j)
    s_in = np.asarray(s, dtype=float) * g ** ((spec.N - 2) / 2.0 * j)
    x_in = np.asarray(x, dtype=float) * g ** (-float(j))
    if not (np.all(np.isfinite(s_in)) and np.isfinite(amp)):
        raise OverflowGuardError("dilation scale exceeds representable magnitude")
    out = amp * eval_F(spec, x_in, s_in)
    if not np.all(np.isfinite(out)):
        raise OverflowGuardError("dilation scale exceeds representable magnitude")
    return out


_DIVERGENCE_CAP = 1e12


def asymptotic_limit(spec, direction, s, tol=1e-9, j_max=60):
    """Limit of the rescaled density along dilations or spatial escape.

    direction ``"plus"`` / ``"minus"``: value at step j is
    gamma^{-Nj} F(gamma^{-j} x, gamma^{(N-2)j/2} s) with j -> +inf resp.
    -inf (evaluated at x = 0; for autonomous kinds x is ignored anyway).
    direction ``"spatial"``: F(x, s) along |x| -> inf.

    Returns ``(value, certified)``; certification requires three
    successive steps within ``tol``.  Unbounded growth raises
    :class:`DivergenceError` (distinct from running out of steps).
    """
    s = np.asarray(s, dtype=float)
    if direction not in ("plus", "minus", "spatial"):
        raise ValueError(direction)
    prev = None
    prev2 = None
    val = None
    stable = 0
    for step in range(1, j_max + 1):
        if direction == "spatial":
            val = eval_F(spec, 2.0**step, s)
        else:
            j = step if direction == "plus" else -step
            g = spec.gamma
            amp = g ** (-spec.N * j)
            s_in = s * g ** ((spec.N - 2) / 2.0 * j)
            with np.errstate(over="raise"):
                try:
                    val = amp * eval_F(spec, 0.0, s_in)
                except FloatingPointError:
                    raise DivergenceError(
                        f"rescaled density diverges along direction {direction}"
                    ) from None
        if not np.all(np.isfinite(val)) or np.max(np.abs(val)) > _DIVERGENCE_CAP:
            raise DivergenceError(f"rescaled density diverges along direction {direction}")
        if prev is not None:
            scale = 1.0 + np.max(np.abs(val))
            if np.max(np.abs(val - prev)) < tol * scale:
                stable += 1
                if stable >= 2:  # three successive values agree
                    return val, True
            else:
                stable = 0
        prev2, prev = prev, val
    return val, False


def asymptotic_table(spec, direction, n_base=512, tol=1e-9, j_max=60, zero_tol=1e-10):
    """Materialize an asymptotic limit as an evaluable density.

    Returns ``(limit_spec, certified)``.  A limit that vanishes on the
    sample period is returned as the zero density; otherwise a
    selfsimilar table (``"plus"``/``"minus"``) or, for ``"spatial"``, a
    table over the period of the underlying dilation structure.
    """
    m = max(1.0, (spec.N - 2) / 2.0) if spec.N >= 3 else 1.0
    cover = spec.gamma**m
    s_grid = np.linspace(1.0, cover, n_base)
    vals, cert = asymptotic_limit(spec, direction, s_grid, tol=tol, j_max=j_max)
    vals_neg, cert_neg = asymptotic_limit(spec, direction, -s_grid, tol=tol, j_max=j_max)
    cert = cert and cert_neg
    scale = max(1.0, float(np.max(np.abs(vals))), float(np.max(np.abs(vals_neg))))
    if max(np.max(np.abs(vals)), np.max(np.abs(vals_neg))) < zero_tol * scale:
        return NonlinearitySpec.zero(spec.N, spec.gamma), cert
    if spec.N >= 3:
        limit = NonlinearitySpec.table_selfsimilar(
            spec.gamma, s_grid, vals, spec.N,
            even_symmetric=False, s_base_neg=-s_grid[::-1], F_base_neg=vals_neg[::-1],
        )
    else:  # spatial limits in low dimension: keep the base structure
        limit = _strip_envelope(spec, direction)
    return limit, cert


def _strip_envelope(spec, direction):
    """Spatial limit of a density whose x-dependence is an envelope."""
    if spec.kind == "spatial_modulation":
        base = _strip_envelope(spec.base, direction)
        return NonlinearitySpec.scaled(base, spec.envelope.at_infinity) \
            if spec.envelope.at_infinity != 1.0 else base
    if spec.kind == "sum":
        return NonlinearitySpec.sum_of(
            tuple(_strip_envelope(t, direction) for t in spec.terms),
            N=spec.N, gamma=spec.gamma,
        )
    if spec.kind == "scaled":
        return NonlinearitySpec.scaled(_strip_envelope(spec.base, direction), spec.factor)
    return spec


@dataclass(frozen=True)
class AsymptoticFamily:
    """Evaluable asymptotic limits of one density, with certification flags."""

    F0: NonlinearitySpec | None = None
    Fplus: NonlinearitySpec | None = None
    Fminus: NonlinearitySpec | None = None
    Finf: NonlinearitySpec | None = None
    certified: dict = field(default_factory=dict)
    tol: float = 1e-9

    def available(self, label):
        return getattr(self, label) is not None


def build_asymptotic_family(spec, directions=("plus", "minus", "spatial"), tol=1e-9,
                            j_max=60, n_base=512):
    """Compute the asymptotic family of ``spec``.

    A direction whose rescaling diverges is left unavailable (None);
    "spatial" fills both F0 and Finf.
    """
    out = {"certified": {}, "tol": tol}
    for direction in directions:
        if direction in ("plus", "minus") and spec.N < 3:
            continue
        try:
            limit, cert = asymptotic_table(spec, direction, n_base=n_base, tol=tol, j_max=j_max)
        except DivergenceError:
            continue
        if direction == "plus":
            out["Fplus"] = limit
        elif direction == "minus":
            out["Fminus"] = limit
        else:
            if spec.autonomous:
                limit, cert = spec, True
            out["F0"] = limit
            out["Finf"] = limit
        out["certified"][direction] = cert
    return AsymptoticFamily(**out)


# -- structural checks ------------------------------------------------------


def check_selfsimilar(spec, gamma, tol=1e-8, j_range=3, n_s=41):
    """True iff F(s) = gamma^{-Nj} F(gamma^{(N-2)j/2} s) on a sample grid."""
    if spec.N < 3:
        return False
    m = (spec.N - 2) / 2.0
    s = np.concatenate([-np.geomspace(3.0, 1 / 3.0, n_s), np.geomspace(1 / 3.0, 3.0, n_s)])
    base = eval_F(spec, 0.0, s)
    worst = 0.0
    for j in range(-j_range, j_range + 1):
        if j == 0:
            continue
        rescaled = float(gamma) ** (-spec.N * j) * eval_F(spec, 0.0, float(gamma) ** (m * j) * s)
        dev = np.max(np.abs(base - rescaled) / (1.0 + np.abs(base)))
        worst = max(worst, float(dev))
    return worst < tol


@dataclass(frozen=True)
class SampleBox:
    """Sampling region for the growth and structure checks."""

    s_min: float = 1e-3
    s_max: float = 1e3
    x_max: float = 10.0
    n: int = 121

    def s_grid(self):
        pos = np.geomspace(self.s_min, self.s_max, self.n)
        return np.concatenate([-pos[::-1], pos])

    def x_slices(self):
        return np.array([0.0, 0.5 * self.x_max, self.x_max])


@dataclass
class GrowthCheck:
    passed: bool
    constants: dict
    flags: list


def _edge_slope(svals, ratio, top=True, frac=0.25):
    """Log-log slope of a ratio near the sample edge (growth detector)."""
    k = max(3, int(len(svals) * frac))
    sl = slice(-k, None) if top else slice(None, k)
    r = ratio[sl]
    s = svals[sl]
    good = r > 0
    if good.sum() < 3:
        return 0.0
    c = np.polyfit(np.log(s[good]), np.log(r[good]), 1)
    return float(c[0])


def check_growth(spec, regime, box=None):
    """Empirical growth constants for a regime, with a boundedness verdict.

    regimes: ``"critical"`` (|F| <= C|s|^{2*}, |f| <= C|s|^{2*-1}),
    ``"bounded_domain"`` (|f| <= C(1+|s|^{2*-1})), ``"subcritical"``
    (epsilon-split bound with a subcritical power).  Sample based: the
    verdict fails when the tested ratio keeps growing at the box edge.
    """
    box = box or SampleBox()
    s = box.s_grid()
    spos = np.abs(s)
    flags = []
    if regime in ("critical", "bounded_domain") and spec.N < 3:
        raise SpecError("critical-growth checks require N >= 3")
    fmax = np.zeros_like(s)
    Fmax = np.zeros_like(s)
    for x in box.x_slices():
        Fmax = np.maximum(Fmax, np.abs(eval_F(spec, x, s)))
        fmax = np.maximum(fmax, np.abs(eval_f(spec, x, s)))
    if regime == "critical":
        ts = spec.two_star
        rF = Fmax / spos**ts
        rf = fmax / spos ** (ts - 1.0)
        C = float(max(rF.max(), rf.max()))
        ok = True
        for ratio in (rF, rf):
            if _edge_slope(spos, ratio, top=True) > 0.05:
                ok = False
                flags.append("ratio grows at large s (supercritical)")
            if _edge_slope(spos, ratio, top=False) < -0.05:
                ok = False
                flags.append("ratio grows as s -> 0 (subquadratic term)")
        if ok and rF[-1] < 1e-3 * C:
            flags.append("subcritical decay at infinity")
        return GrowthCheck(ok, {"C": C}, sorted(set(flags)))
    if regime == "bounded_domain":
        ts = spec.two_star
        ratio = fmax / (1.0 + spos ** (ts - 1.0))
        C = float(ratio.max())
        ok = _edge_slope(spos, ratio, top=True) <= 0.05
        if not ok:
            flags.append("ratio grows at large s (supercritical)")
        return GrowthCheck(ok, {"C": C}, flags)
    if regime == "subcritical":
        ts = spec.two_star if spec.N >= 3 else None
        table = {}
        ok_all = True
        p_hi = (ts - 0.05) if ts else 8.0
        p_grid = np.linspace(2.2, max(2.4, p_hi), 13)
        for eps in (0.1, 0.01):
            lead = eps * (spos + (spos ** (ts - 1.0) if ts else 0.0))
            resid = np.maximum(fmax - lead, 0.0)
            best = None
            for p in p_grid:
                ratio = resid / spos ** (p - 1.0)
                if _edge_slope(spos, ratio, top=True) > 0.05:
                    continue
                if _edge_slope(spos, ratio, top=False) < -0.05:
                    continue
                C = float(ratio.max())
                if best is None or C < best[1]:
                    best = (float(p), C)
            if best is None:
                ok_all = False
                flags.append(f"no subcritical exponent fits at eps={eps}")
                table[eps] = None
            else:
                table[eps] = {"p": best[0], "C": best[1]}
        return GrowthCheck(ok_all, table, flags)
    raise ValueError(f"unknown growth regime {regime!r}")


def check_ar(spec, mu, box=None):
    """Superquadraticity check  f(x,s) s >= mu F(x,s)  on the sample box."""
    if mu <= 2.0:
        raise ValueError("the superquadraticity constant must exceed 2")
    box = box or SampleBox()
    s = box.s_grid()
    for x in box.x_slices():
        lhs = eval_f(spec, x, s) * s
        rhs = mu * eval_F(spec, x, s)
        slack = 1e-12 * (np.abs(lhs) + np.abs(rhs) + 1.0)
        if np.any(lhs < rhs - slack):
            return False
    return True
