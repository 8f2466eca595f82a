"""Two-variable operator means through their representing functions.

A normalized operator monotone function ``f`` on ``(0, inf)`` with
``f(1) = 1`` determines a binary matrix mean via

    ``A sigma B = A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}``.

This module keeps ``f`` symbolic: a catalog entry (trivial, weighted
arithmetic / harmonic / geometric, or a convex combination) plus an ordered
stack of transforms (adjoint, transpose, inner / outer power maps).  A spec
evaluates vectorized over numpy arrays, so matrix functional calculus and
dense scalar grids share one code path.

The scalar solver :func:`deformed_rep` computes the representing function
of the deformed mean ``tau_sigma`` (the unique fixed point of
``x = (x sigma 1) tau (x sigma t)``), which is how two-variable deformed
means are evaluated on matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import (
    DimensionMismatch,
    DomainError,
    MissingParameter,
    NoConvergence,
    SigmaIsLeftTrivial,
    UnknownKind,
)
from .psd_core import SpdMatrix, eigh_apply, spd_sqrt_pair, sym

__all__ = [
    "RepFnSpec",
    "Transform",
    "MarginReport",
    "left_trivial",
    "right_trivial",
    "arithmetic",
    "harmonic",
    "geometric",
    "convex_combo",
    "arithmetic_harmonic_mix",
    "rep_eval",
    "rep_transform",
    "two_var_mean",
    "two_var_deformed_mean",
    "deformed_rep",
    "pmi_margin",
    "condition_vi_margin",
    "default_x_grid",
    "default_r_grid",
    "repfn_to_json",
    "repfn_from_json",
]

_KINDS = ("left_trivial", "right_trivial", "arithmetic", "harmonic", "geometric", "convex")
_TRANSFORM_OPS = ("adjoint", "transpose", "power_inner", "power_inner_outer", "power_outer")
_DERIV_STEP = 1e-6


@dataclass(frozen=True)
class Transform:
    op: str
    r: float | None = None

    def __post_init__(self):
        if self.op not in _TRANSFORM_OPS:
            raise UnknownKind(f"unknown transform {self.op!r}")
        if self.op in ("power_inner", "power_inner_outer", "power_outer"):
            if self.r is None:
                raise MissingParameter(f"transform {self.op!r} needs a parameter r")
            if self.r <= 0:
                raise DomainError(f"transform {self.op!r} needs r > 0, got {self.r}")
            if self.op == "power_outer" and not self.r <= 1:
                raise DomainError(f"power_outer keeps operator monotonicity only for r <= 1, got {self.r}")


@dataclass(frozen=True)
class RepFnSpec:
    """A representing function: catalog entry plus transform stack.

    ``params`` is kind-specific: ``(w,)`` for arithmetic, ``(alpha,)`` for
    harmonic / geometric, a tuple of ``(weight, RepFnSpec)`` pairs for
    convex combinations, ``()`` for the trivial means.
    """

    kind: str
    params: tuple = ()
    transforms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise UnknownKind(f"unknown representing-function kind {self.kind!r}")
        if self.kind in ("arithmetic", "harmonic", "geometric"):
            (p,) = self.params
            if not 0 <= p <= 1:
                raise DomainError(f"{self.kind} parameter must lie in [0, 1], got {p}")
        if self.kind == "convex":
            weights = np.array([w for w, _ in self.params], dtype=float)
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise DomainError("convex combination weights must be nonnegative and sum to 1")

    @cached_property
    def derivative_at_one(self) -> float:
        lo = rep_eval(self, 1.0 - _DERIV_STEP)
        hi = rep_eval(self, 1.0 + _DERIV_STEP)
        return float((hi - lo) / (2.0 * _DERIV_STEP))

    @property
    def is_left_trivial(self) -> bool:
        # A transform stack never turns a nontrivial mean into the left
        # trivial one, and maps the trivial pair onto itself; checking the
        # value profile is still the robust test.
        probe = rep_eval(self, np.array([0.5, 2.0]))
        return bool(np.all(np.abs(probe - 1.0) < 1e-14))


@dataclass(frozen=True)
class MarginReport:
    worst_margin: float
    worst_point: tuple
    grid_size: int


# --------------------------------------------------------------------------
# catalog constructors
# --------------------------------------------------------------------------


def left_trivial() -> RepFnSpec:
    return RepFnSpec("left_trivial")


def right_trivial() -> RepFnSpec:
    return RepFnSpec("right_trivial")


def arithmetic(w: float) -> RepFnSpec:
    """Weighted arithmetic mean, f(x) = 1 - w + w x."""
    return RepFnSpec("arithmetic", (float(w),))


def harmonic(alpha: float) -> RepFnSpec:
    """Weighted harmonic mean, f(x) = (1 - alpha + alpha/x)^{-1}."""
    return RepFnSpec("harmonic", (float(alpha),))


def geometric(alpha: float) -> RepFnSpec:
    """Weighted geometric mean, f(x) = x^alpha."""
    return RepFnSpec("geometric", (float(alpha),))


def convex_combo(terms) -> RepFnSpec:
    """Convex combination sum w_i f_i of representing functions."""
    return RepFnSpec("convex", tuple((float(w), spec) for w, spec in terms))


def arithmetic_harmonic_mix(weight_on_arithmetic: float = 0.25) -> RepFnSpec:
    """Blend of the symmetric arithmetic and harmonic means.

    At the default weight 1/4 this is the classical witness of a mean whose
    representing function satisfies the tangent-line condition
    ``f(x^r) >= r f(x) - r + 1`` for all ``r >= 1`` while failing power
    monotonicity ``f(x^r) >= f(x)^r``.
    """
    w = float(weight_on_arithmetic)
    return convex_combo([(w, arithmetic(0.5)), (1.0 - w, harmonic(0.5))])


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _eval_base(spec: RepFnSpec, t):
    kind = spec.kind
    if kind == "left_trivial":
        return np.ones_like(t)
    if kind == "right_trivial":
        return t
    if kind == "arithmetic":
        w = spec.params[0]
        return 1.0 - w + w * t
    if kind == "harmonic":
        a = spec.params[0]
        return 1.0 / (1.0 - a + a / t)
    if kind == "geometric":
        a = spec.params[0]
        return t**a
    # convex
    out = np.zeros_like(t)
    for w, sub in spec.params:
        out += w * _eval_transformed(sub, sub.transforms, t)
    return out


def _eval_transformed(spec: RepFnSpec, stack, t):
    if not stack:
        return _eval_base(spec, t)
    head, tr = stack[:-1], stack[-1]
    if tr.op == "adjoint":
        return 1.0 / _eval_transformed(spec, head, 1.0 / t)
    if tr.op == "transpose":
        return t * _eval_transformed(spec, head, 1.0 / t)
    if tr.op == "power_inner":
        return _eval_transformed(spec, head, t**tr.r)
    if tr.op == "power_inner_outer":
        return _eval_transformed(spec, head, t**tr.r) ** (1.0 / tr.r)
    # power_outer
    return _eval_transformed(spec, head, t) ** tr.r


def rep_eval(spec: RepFnSpec, t):
    """Evaluate the representing function at ``t > 0`` (scalar or ndarray)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise DomainError("representing functions are defined on (0, inf)")
    out = _eval_transformed(spec, spec.transforms, arr)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def rep_transform(spec: RepFnSpec, op: str, r: float | None = None) -> RepFnSpec:
    """Append a transform to the stack; derivative cache resets with the new object."""
    return RepFnSpec(spec.kind, spec.params, spec.transforms + (Transform(op, r),))


# --------------------------------------------------------------------------
# matrix means
# --------------------------------------------------------------------------


def _two_var_arrays(fn, a, b):
    a_half, a_invh = spd_sqrt_pair(a)
    w = sym(a_invh @ b @ a_invh)
    return sym(a_half @ eigh_apply(w, fn) @ a_half)


def two_var_mean(spec: RepFnSpec, A: SpdMatrix, B: SpdMatrix) -> SpdMatrix:
    """``A sigma B`` through the functional-calculus formula."""
    if A.dim != B.dim:
        raise DimensionMismatch(f"dimensions differ: {A.dim} vs {B.dim}")
    out = _two_var_arrays(lambda w: rep_eval(spec, w), A.a, B.a)
    return SpdMatrix(dim=A.dim, entries=out)


def two_var_deformed_mean(
    tau: RepFnSpec,
    sigma: RepFnSpec,
    A: SpdMatrix,
    B: SpdMatrix,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> SpdMatrix:
    """``A tau_sigma B``: functional calculus with the solved representing function."""
    if A.dim != B.dim:
        raise DimensionMismatch(f"dimensions differ: {A.dim} vs {B.dim}")
    out = _two_var_arrays(lambda w: deformed_rep(tau, sigma, w, cfg), A.a, B.a)
    return SpdMatrix(dim=A.dim, entries=out)


# --------------------------------------------------------------------------
# the scalar deformed mean
# --------------------------------------------------------------------------


def _deformed_residual(tau, sigma, t, x):
    # F(x)/x - 1 where F(x) = (x sigma 1) tau (x sigma t); zero exactly at
    # the deformed mean's value.
    u = rep_eval(sigma, 1.0 / x)
    v = rep_eval(sigma, t / x)
    return u * rep_eval(tau, v / u) - 1.0


def deformed_rep(tau: RepFnSpec, sigma: RepFnSpec, t, cfg: SolverConfig = DEFAULT_CONFIG):
    """Representing function of the deformed mean ``tau_sigma`` at ``t``.

    Solves ``x = (x sigma 1) tau (x sigma t)`` by fixed-point iteration from
    ``x = 1`` (a strict Thompson contraction), falling back to bisection of
    the residual on ``[min(1, t), max(1, t)]`` if the cap is reached.
    Vectorized over ``t``.
    """
    if sigma.is_left_trivial:
        raise SigmaIsLeftTrivial("deformation by the left trivial mean is undefined")
    scalar_in = np.isscalar(t) or np.asarray(t).ndim == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt <= 0):
        raise DomainError("deformed representing functions are defined on (0, inf)")

    if sigma.kind == "right_trivial" and not sigma.transforms:
        out = rep_eval(tau, tt)
        return float(out[0]) if scalar_in else out.reshape(np.shape(t))

    def advance(x):
        u = rep_eval(sigma, 1.0 / x)
        v = rep_eval(sigma, tt / x)
        return x * u * rep_eval(tau, v / u)

    x = np.ones_like(tt)
    converged = False
    for _ in range(cfg.scalar_max_iters):
        x_new = advance(x)
        step = np.max(np.abs(np.log(x_new) - np.log(x)))
        x = x_new
        if step < cfg.tol:
            converged = True
            break
    if converged:
        # Aitken extrapolation in log coordinates kills the geometric tail
        # left by a slowly contracting map (rate close to 1 near the
        # trivial means), at the price of two extra map evaluations.
        l0 = np.log(x)
        l1 = np.log(advance(x))
        l2 = np.log(advance(np.exp(l1)))
        denom = l2 - 2.0 * l1 + l0
        safe = np.abs(denom) > 1e-300
        lhat = np.where(safe, l0 - (l1 - l0) ** 2 / np.where(safe, denom, 1.0), l0)
        x = np.exp(lhat)
    resid = np.abs(_deformed_residual(tau, sigma, tt, x))
    if not (converged and np.all(resid < max(cfg.tol, 1e-14))):
        x = _deformed_bisect(tau, sigma, tt, x, cfg)
        resid = np.abs(_deformed_residual(tau, sigma, tt, x))
        if not np.all(resid < max(cfg.tol, 1e-12)):
            raise NoConvergence(
                "scalar deformed-mean solve did not reach tolerance",
                last_iterate=x,
                residual=float(resid.max()),
            )
    return float(x[0]) if scalar_in else x.reshape(np.shape(t))


def _deformed_bisect(tau, sigma, tt, x0, cfg):
    lo = np.minimum(1.0, tt)
    hi = np.maximum(1.0, tt)
    flo = _deformed_residual(tau, sigma, tt, np.maximum(lo, 1e-300))
    if np.any(flo < -1e-12) or np.any(
        _deformed_residual(tau, sigma, tt, hi) > 1e-12
    ):  # pragma: no cover - bracket is guaranteed for operator means
        raise NoConvergence(
            "residual bracket invalid for bisection", last_iterate=x0, residual=None
        )
    x = x0.copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = _deformed_residual(tau, sigma, tt, np.maximum(mid, 1e-300))
        take_lo = fmid >= 0
        lo = np.where(take_lo, mid, lo)
        hi = np.where(take_lo, hi, mid)
        if np.max(hi - lo) < 1e-15 * np.max(hi):
            break
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# scalar margin scans
# --------------------------------------------------------------------------


def default_x_grid(n: int = 200):
    return np.geomspace(1e-3, 1e3, n)


def default_r_grid(n: int = 50):
    return np.linspace(1.0, 8.0, n)


def _grid_margin(values, x_grid, r_grid) -> MarginReport:
    idx = np.unravel_index(np.argmin(values), values.shape)
    return MarginReport(
        worst_margin=float(values[idx]),
        worst_point=(float(x_grid[idx[0]]), float(r_grid[idx[1]])),
        grid_size=int(values.size),
    )


def pmi_margin(spec: RepFnSpec, x_grid=None, r_grid=None) -> MarginReport:
    """Worst value of ``f(x^r) - f(x)^r`` on the grid.

    A negative worst margin proves the function is not power monotone
    increasing; a nonnegative one is evidence only, since the grid is
    finite.
    """
    x = np.asarray(default_x_grid() if x_grid is None else x_grid, dtype=float)
    r = np.asarray(default_r_grid() if r_grid is None else r_grid, dtype=float)
    _check_grids(x, r)
    fx = rep_eval(spec, x)[:, None]
    fxr = rep_eval(spec, x[:, None] ** r[None, :])
    return _grid_margin(fxr - fx**r, x, r)


def condition_vi_margin(spec: RepFnSpec, x_grid=None, r_grid=None) -> MarginReport:
    """Worst value of ``f(x^r) - r f(x) + r - 1`` on the grid."""
    x = np.asarray(default_x_grid() if x_grid is None else x_grid, dtype=float)
    r = np.asarray(default_r_grid() if r_grid is None else r_grid, dtype=float)
    _check_grids(x, r)
    fx = rep_eval(spec, x)[:, None]
    fxr = rep_eval(spec, x[:, None] ** r[None, :])
    return _grid_margin(fxr - r[None, :] * fx + r[None, :] - 1.0, x, r)


def _check_grids(x, r):
    if x.size == 0 or r.size == 0:
        raise DomainError("grids must be nonempty")
    if np.any(x <= 0):
        raise DomainError("x grid must be positive")
    if np.any(r < 1):
        raise DomainError("r grid must lie in [1, inf)")


# --------------------------------------------------------------------------
# wire format
# --------------------------------------------------------------------------


def repfn_to_json(spec: RepFnSpec) -> dict:
    if spec.kind == "convex":
        params = {"terms": [{"weight": w, "fn": repfn_to_json(s)} for w, s in spec.params]}
    elif spec.params:
        key = "w" if spec.kind == "arithmetic" else "alpha"
        params = {key: spec.params[0]}
    else:
        params = {}
    return {
        "kind": spec.kind,
        "params": params,
        "transforms": [{"op": tr.op, **({"r": tr.r} if tr.r is not None else {})} for tr in spec.transforms],
    }


def repfn_from_json(obj) -> RepFnSpec:
    try:
        kind = obj["kind"]
    except (KeyError, TypeError) as exc:
        raise UnknownKind(f"representing-function JSON must carry 'kind': {exc}") from exc
    if kind not in _KINDS:
        raise UnknownKind(f"unknown representing-function kind {kind!r}")
    raw_params = obj.get("params", {})
    if kind == "convex":
        params = tuple(
            (float(term["weight"]), repfn_from_json(term["fn"])) for term in raw_params["terms"]
        )
    elif kind in ("arithmetic", "harmonic", "geometric"):
        key = "w" if kind == "arithmetic" else "alpha"
        if key not in raw_params:
            raise MissingParameter(f"kind {kind!r} needs parameter {key!r}")
        params = (float(raw_params[key]),)
    else:
        params = ()
    transforms = tuple(
        Transform(tr["op"], tr.get("r")) for tr in obj.get("transforms", [])
    )
    return RepFnSpec(kind, params, transforms)
