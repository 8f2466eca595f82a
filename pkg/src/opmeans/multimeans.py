"""n-variable matrix means: elementary, deformed, power, Karcher, adjoint.

The deformed mean of a base mean ``M`` by a two-variable mean ``sigma`` is
the unique fixed point of ``X = M(X sigma A_1, ..., X sigma A_n)``, computed
by the monotone iteration started at ``delta^{-1} I`` (which dominates the
fixed point, so the iterates decrease in the positive semidefinite order,
and the step size contracts in the Thompson metric).  Power means are the
geometric deformation of the weighted arithmetic mean; the Karcher mean is
solved directly from its defining equation and certified against a
power-mean enclosure computed by the independent fixed-point route.

All solvers run on stacked operands of shape ``(..., n, d, d)`` and
broadcast over the leading axes, which is what makes large randomized
verification campaigns cheap; the typed API wraps the single-ensemble case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import (
    AlphaZero,
    ArityMismatch,
    CertificationFailure,
    DimensionMismatch,
    HypothesisFails,
    InvalidWeights,
    NoConvergence,
    SigmaIsLeftTrivial,
    UnknownKind,
)
from .meanfns import RepFnSpec, geometric, rep_eval, repfn_from_json, repfn_to_json
from .psd_core import (
    LoewnerVerdict,
    SpdMatrix,
    eigh_apply,
    lambda_min,
    loewner_compare,
    matrix_from_json,
    op_norm,
    spd_inv,
    spd_sqrt_pair,
    sym,
    thompson,
)

__all__ = [
    "Weights",
    "MultiMeanSpec",
    "MeanResult",
    "elementary_mean",
    "deformed_mean",
    "comparison_bound",
    "power_mean",
    "karcher_mean",
    "adjoint_eval",
    "eval_mean",
    "eval_mean_stack",
    "meanspec_to_json",
    "meanspec_from_json",
]

_MONO_TOL = 1e-9
_MEAN_KINDS = ("arithmetic", "harmonic", "deformed", "power", "karcher", "adjoint")


@dataclass(frozen=True)
class Weights:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        arr = np.array(vals)
        if arr.size == 0 or np.any(arr < 0):
            raise InvalidWeights("weights must be a nonempty list of nonnegative reals")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise InvalidWeights(f"weights must sum to 1, got {arr.sum()!r}")

    @classmethod
    def uniform(cls, n: int) -> "Weights":
        return cls(tuple(1.0 / n for _ in range(n)))

    def asarray(self):
        return np.array(self.values)


@dataclass(frozen=True)
class MultiMeanSpec:
    """Description of an n-variable mean; build through the classmethods."""

    kind: str
    weights: Optional[Weights] = None
    alpha: Optional[float] = None
    base: Optional["MultiMeanSpec"] = None
    sigma: Optional[RepFnSpec] = None
    inner: Optional["MultiMeanSpec"] = None

    def __post_init__(self):
        if self.kind not in _MEAN_KINDS:
            raise UnknownKind(f"unknown mean kind {self.kind!r}")
        if self.kind == "power":
            if self.alpha == 0:
                raise AlphaZero("power mean exponent must be nonzero")
            if not -1 <= self.alpha <= 1:
                raise AlphaZero(f"power mean exponent must lie in [-1, 1], got {self.alpha}")
        if self.kind == "deformed" and self.sigma.is_left_trivial:
            raise SigmaIsLeftTrivial("cannot deform by the left trivial mean")

    @classmethod
    def arithmetic(cls, w: Weights) -> "MultiMeanSpec":
        return cls("arithmetic", weights=w)

    @classmethod
    def harmonic(cls, w: Weights) -> "MultiMeanSpec":
        return cls("harmonic", weights=w)

    @classmethod
    def deformed(cls, base: "MultiMeanSpec", sigma: RepFnSpec) -> "MultiMeanSpec":
        return cls("deformed", base=base, sigma=sigma)

    @classmethod
    def power(cls, w: Weights, alpha: float) -> "MultiMeanSpec":
        return cls("power", weights=w, alpha=float(alpha))

    @classmethod
    def karcher(cls, w: Weights) -> "MultiMeanSpec":
        return cls("karcher", weights=w)

    @classmethod
    def adjoint(cls, inner: "MultiMeanSpec") -> "MultiMeanSpec":
        return cls("adjoint", inner=inner)


@dataclass(frozen=True)
class MeanResult:
    value: SpdMatrix
    iterations: int
    residual_dt: float
    enclosure_gap: Optional[float] = None

    def to_json(self):
        return {
            "value": self.value.to_json(),
            "iterations": self.iterations,
            "residual_dt": self.residual_dt,
            "enclosure_gap": self.enclosure_gap,
        }


@dataclass(frozen=True)
class StackResult:
    """Batched solve outcome: arrays broadcast over the leading axes."""

    values: np.ndarray
    iterations: int
    residual_dt: np.ndarray
    enclosure_gap: Optional[np.ndarray] = None


# --------------------------------------------------------------------------
# stacked engine
# --------------------------------------------------------------------------


def _node_weights(spec: MultiMeanSpec, w_over, n: int):
    if w_over is not None:
        w = np.asarray(w_over, dtype=float)
    elif spec.weights is not None:
        w = spec.weights.asarray()
    else:
        raise InvalidWeights(f"mean kind {spec.kind!r} needs weights")
    if w.shape[-1] != n:
        raise ArityMismatch(f"{w.shape[-1]} weights for {n} matrices")
    return w


def _weighted_sum(w, stack):
    return np.einsum("...n,...nij->...ij", w, stack)


def _sigma_acts_as_right_trivial(sigma: RepFnSpec) -> bool:
    probe = rep_eval(sigma, np.array([0.5, 2.0]))
    return bool(np.allclose(probe, [0.5, 2.0], rtol=0, atol=1e-14))


def _eval_node(spec: MultiMeanSpec, stack, cfg: SolverConfig, w_over=None):
    """Evaluate a mean on ``stack`` of shape (..., n, d, d).

    Returns ``(values, iterations, step)`` where ``step`` is the final
    Thompson step size per batch element (zero for closed forms).
    """
    n = stack.shape[-3]
    batch = stack.shape[:-3]
    zeros = np.zeros(batch)
    if spec.weights is not None and w_over is None and len(spec.weights.values) != n:
        raise ArityMismatch(f"{len(spec.weights.values)} weights for {n} matrices")
    if n == 1:
        # forced by normalization plus congruence invariance
        return stack[..., 0, :, :], 0, zeros
    kind = spec.kind
    if kind == "arithmetic":
        w = _node_weights(spec, w_over, n)
        return _weighted_sum(w, stack), 0, zeros
    if kind == "harmonic":
        w = _node_weights(spec, w_over, n)
        return spd_inv(_weighted_sum(w, spd_inv(stack))), 0, zeros
    if kind == "adjoint":
        vals, iters, step = _eval_node(spec.inner, spd_inv(stack), cfg, w_over)
        return spd_inv(vals), iters, step
    if kind == "power":
        return _power_node(spec, stack, cfg, w_over)
    if kind == "karcher":
        w = _node_weights(spec, w_over, n)
        return _karcher_loop(w, stack, cfg)
    # deformed
    return _deformed_loop(spec.base, spec.sigma, stack, cfg, w_over)


def _power_node(spec, stack, cfg, w_over):
    alpha = spec.alpha
    w = _node_weights(spec, w_over, stack.shape[-3])
    if alpha > 0:
        base = MultiMeanSpec.arithmetic(Weights.uniform(stack.shape[-3]))
        return _deformed_loop(base, geometric(alpha), stack, cfg, w)
    neg = MultiMeanSpec.power(spec.weights or Weights.uniform(stack.shape[-3]), -alpha)
    vals, iters, step = _power_node(neg, spd_inv(stack), cfg, w_over)
    return spd_inv(vals), iters, step


def _deformed_loop(base: MultiMeanSpec, sigma: RepFnSpec, stack, cfg, w_over=None):
    if sigma.is_left_trivial:
        raise SigmaIsLeftTrivial("cannot deform by the left trivial mean")
    if _sigma_acts_as_right_trivial(sigma):
        vals, iters, _ = _eval_node(base, stack, cfg, w_over)
        return vals, max(iters, 1), np.zeros(stack.shape[:-3])

    d = stack.shape[-1]
    eye = np.eye(d)
    eigs = np.linalg.eigvalsh(stack)
    lam_lo = eigs[..., 0].min(axis=-1)
    lam_hi = eigs[..., -1].max(axis=-1)
    delta = np.minimum(1.0, np.minimum(lam_lo, 1.0 / lam_hi))
    delta = np.maximum(delta, cfg.delta_floor)
    x = (1.0 / delta)[..., None, None] * eye

    sigma_fn = lambda t: rep_eval(sigma, t)  # noqa: E731 - tight capture
    step = None
    for k in range(1, cfg.max_iters + 1):
        xh, xih = spd_sqrt_pair(x)
        w_blocks = sym(np.einsum("...ij,...njk,...kl->...nil", xih, stack, xih))
        f_blocks = eigh_apply(w_blocks, sigma_fn)
        z, _, _ = _eval_node(base, f_blocks, cfg, w_over)
        zw = np.linalg.eigvalsh(z)
        if np.max(zw[..., -1]) > 1.0 + _MONO_TOL:
            raise NoConvergence(
                "monotone descent violated; the base mean broke the fixed-point "
                f"contract at iteration {k}",
                last_iterate=x,
                residual=float(np.max(zw[..., -1]) - 1.0),
            )
        lzw = np.log(np.maximum(zw, 1e-300))
        step = np.maximum(np.abs(lzw[..., 0]), np.abs(lzw[..., -1]))
        x = sym(np.einsum("...ij,...jk,...kl->...il", xh, z, xh))
        if np.all(step < cfg.dt_tol):
            return x, k, step
    raise NoConvergence(
        f"deformed-mean iteration did not converge in {cfg.max_iters} steps",
        last_iterate=x,
        residual=float(np.max(step)),
    )


def _karcher_residual(w, stack, x):
    xh, xih = spd_sqrt_pair(x)
    blocks = sym(np.einsum("...ij,...njk,...kl->...nil", xih, stack, xih))
    ew, ev = np.linalg.eigh(blocks)
    if np.any(ew <= 0):
        raise NoConvergence(
            "Karcher iterate lost positive definiteness", last_iterate=x, residual=None
        )
    lew = np.log(ew)
    logs = sym(np.einsum("...ij,...j,...kj->...ik", ev, lew, ev))
    # max Thompson radius of the inputs seen from x, for the step-size model
    dmax = np.maximum(np.abs(lew[..., 0]), np.abs(lew[..., -1])).max(axis=-1)
    r = _weighted_sum(w, logs)
    return xh, r, op_norm(r), dmax


def _karcher_loop(w, stack, cfg):
    # Exponential-residual descent from the arithmetic mean.  The step is
    # metric gradient descent on the squared-distance objective; its local
    # Hessian is bounded by 1 + (max Thompson radius of the inputs), so the
    # informed step 2/(2 + dmax) descends without overshoot and degrades to
    # the full step as the radius shrinks.  A damping cap that starts at 1
    # and halves whenever the residual still manages to increase guards the
    # model.
    x = _weighted_sum(w, stack)
    xh, r, rnorm, dmax = _karcher_residual(w, stack, x)
    batch = stack.shape[:-3]
    cap = np.ones(batch)
    iters = 0
    for k in range(1, cfg.max_iters + 1):
        if np.all(rnorm < cfg.dt_tol):
            break
        theta = np.minimum(cap, 2.0 / (2.0 + dmax))
        step = eigh_apply(theta[..., None, None] * r, np.exp)
        x_try = sym(np.einsum("...ij,...jk,...kl->...il", xh, step, xh))
        xh_try, r_try, rnorm_try, dmax_try = _karcher_residual(w, stack, x_try)
        accept = (rnorm_try <= rnorm) | (rnorm < cfg.dt_tol)
        acc = accept[..., None, None]
        x = np.where(acc, x_try, x)
        xh = np.where(acc, xh_try, xh)
        r = np.where(acc, r_try, r)
        rnorm = np.where(accept, rnorm_try, rnorm)
        dmax = np.where(accept, dmax_try, dmax)
        cap = np.where(accept, np.minimum(1.0, cap * 1.25), cap * 0.5)
        if np.any(cap < 1e-8):
            raise NoConvergence(
                "Karcher damping collapsed without residual decrease",
                last_iterate=x,
                residual=float(rnorm.max()),
            )
        iters = k
    else:
        raise NoConvergence(
            f"Karcher iteration did not converge in {cfg.max_iters} steps",
            last_iterate=x,
            residual=float(rnorm.max()),
        )
    return x, iters, rnorm


def eval_mean_stack(
    spec: MultiMeanSpec,
    stack: np.ndarray,
    cfg: SolverConfig = DEFAULT_CONFIG,
    weights_override=None,
) -> StackResult:
    """Evaluate ``spec`` on stacked ensembles of shape ``(..., n, d, d)``.

    ``weights_override`` (shape ``(n,)`` or ``(..., n)``) substitutes the
    weight vector at every weighted node, which is how campaigns run many
    random weightings through one batched solve.
    """
    stack = np.asarray(stack, dtype=float)
    if stack.ndim < 3 or stack.shape[-1] != stack.shape[-2]:
        raise DimensionMismatch(f"expected shape (..., n, d, d), got {stack.shape}")
    gap = None
    vals, iters, step = _eval_node(spec, stack, cfg, weights_override)
    if spec.kind == "karcher" and cfg.certify:
        w = _node_weights(spec, weights_override, stack.shape[-3])
        gap = _certify_karcher(w, stack, vals, cfg)
    return StackResult(values=vals, iterations=iters, residual_dt=np.asarray(step), enclosure_gap=gap)


def _certify_karcher(w, stack, vals, cfg):
    """Assert the power-mean enclosure around a Karcher solve; return its width."""
    n = stack.shape[-3]
    upper_spec = MultiMeanSpec.power(Weights.uniform(n), cfg.karcher_alpha)
    upper, _, _ = _power_node(upper_spec, stack, cfg, w)
    lower_spec = MultiMeanSpec.power(Weights.uniform(n), -cfg.karcher_alpha)
    lower, _, _ = _power_node(lower_spec, stack, cfg, w)
    scale = op_norm(upper) + op_norm(vals)
    tol = 1e-9
    up_margin = lambda_min(upper - vals) / scale
    lo_margin = lambda_min(vals - lower) / scale
    if np.any(up_margin < -tol) or np.any(lo_margin < -tol):
        raise CertificationFailure(
            "Karcher solve escaped its power-mean enclosure "
            f"(margins {float(np.min(up_margin)):.3e}, {float(np.min(lo_margin)):.3e})"
        )
    return thompson(lower, upper)


# --------------------------------------------------------------------------
# typed API
# --------------------------------------------------------------------------


def _as_stack(As: Sequence[SpdMatrix]):
    if not As:
        raise ArityMismatch("need at least one matrix")
    dim = As[0].dim
    for m in As:
        if m.dim != dim:
            raise DimensionMismatch(f"mixed dimensions {dim} and {m.dim}")
    return np.stack([m.a for m in As])


def _wrap(result: StackResult) -> MeanResult:
    gap = result.enclosure_gap
    return MeanResult(
        value=SpdMatrix(dim=result.values.shape[-1], entries=result.values),
        iterations=int(result.iterations),
        residual_dt=float(np.max(result.residual_dt)),
        enclosure_gap=None if gap is None else float(np.max(gap)),
    )


def eval_mean(spec: MultiMeanSpec, As: Sequence[SpdMatrix], cfg: SolverConfig = DEFAULT_CONFIG) -> MeanResult:
    """Evaluate any mean description on a list of SPD matrices."""
    return _wrap(eval_mean_stack(spec, _as_stack(As), cfg))


def elementary_mean(kind: str, w: Weights, As: Sequence[SpdMatrix]) -> SpdMatrix:
    """Weighted arithmetic or harmonic mean (closed forms)."""
    if kind not in ("arithmetic", "harmonic"):
        raise UnknownKind(f"elementary mean must be arithmetic or harmonic, got {kind!r}")
    spec = MultiMeanSpec.arithmetic(w) if kind == "arithmetic" else MultiMeanSpec.harmonic(w)
    if len(w.values) != len(As):
        raise ArityMismatch(f"{len(w.values)} weights for {len(As)} matrices")
    return eval_mean(spec, As).value


def deformed_mean(
    base: MultiMeanSpec,
    sigma: RepFnSpec,
    As: Sequence[SpdMatrix],
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> MeanResult:
    """Fixed point of ``X = base(X sigma A_1, ..., X sigma A_n)``."""
    return _wrap(eval_mean_stack(MultiMeanSpec.deformed(base, sigma), _as_stack(As), cfg))


def power_mean(w: Weights, alpha: float, As: Sequence[SpdMatrix], cfg: SolverConfig = DEFAULT_CONFIG) -> MeanResult:
    if alpha == 0:
        raise AlphaZero("power mean exponent must be nonzero")
    return _wrap(eval_mean_stack(MultiMeanSpec.power(w, alpha), _as_stack(As), cfg))


def karcher_mean(w: Weights, As: Sequence[SpdMatrix], cfg: SolverConfig = DEFAULT_CONFIG) -> MeanResult:
    """Solve the defining equation of the multivariate geometric mean.

    The returned result is certified (unless ``cfg.certify`` is off) by the
    power-mean pair at exponents ``+-cfg.karcher_alpha``, an enclosure that
    is computed by a different solver route than the solution itself;
    ``enclosure_gap`` is the Thompson width of that certificate.
    """
    return _wrap(eval_mean_stack(MultiMeanSpec.karcher(w), _as_stack(As), cfg))


def adjoint_eval(spec: MultiMeanSpec, As: Sequence[SpdMatrix], cfg: SolverConfig = DEFAULT_CONFIG) -> MeanResult:
    """Evaluate the adjoint of ``spec``: the mean of the inverses, inverted."""
    return _wrap(eval_mean_stack(MultiMeanSpec.adjoint(spec), _as_stack(As), cfg))


def comparison_bound(
    base: MultiMeanSpec,
    sigma: RepFnSpec,
    As: Sequence[SpdMatrix],
    Y: SpdMatrix,
    direction: str,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> LoewnerVerdict:
    """One-sided comparison of ``Y`` against the deformed mean.

    ``direction='lower'`` requires the premise ``Y <= base(Y sigma A_j ...)``
    and then compares ``Y`` with the deformed mean; ``'upper'`` is the
    mirror image.  A failing premise raises :class:`HypothesisFails`, it is
    not an inequality violation.
    """
    if direction not in ("lower", "upper"):
        raise ValueError("direction must be 'lower' or 'upper'")
    stack = _as_stack(As)
    if Y.dim != stack.shape[-1]:
        raise DimensionMismatch(f"Y has dimension {Y.dim}, inputs {stack.shape[-1]}")
    yh, yih = spd_sqrt_pair(Y.a)
    blocks = sym(np.einsum("ij,njk,kl->nil", yih, stack, yih))
    f_blocks = eigh_apply(blocks, lambda t: rep_eval(sigma, t))
    z, _, _ = _eval_node(base, f_blocks, cfg)
    fy = SpdMatrix(dim=Y.dim, entries=sym(yh @ z @ yh))
    premise = loewner_compare(Y, fy)
    ok = premise.holds_le if direction == "lower" else premise.holds_ge
    if not ok:
        raise HypothesisFails(
            f"premise Y {'<=' if direction == 'lower' else '>='} base(Y sigma A_j) "
            f"fails with margin {premise.margin:.3e}"
        )
    target = deformed_mean(base, sigma, As, cfg).value
    return loewner_compare(Y, target)


# --------------------------------------------------------------------------
# wire format
# --------------------------------------------------------------------------


def meanspec_to_json(spec: MultiMeanSpec) -> dict:
    out = {"kind": spec.kind}
    if spec.weights is not None:
        out["weights"] = list(spec.weights.values)
    if spec.alpha is not None:
        out["alpha"] = spec.alpha
    if spec.base is not None:
        out["base"] = meanspec_to_json(spec.base)
    if spec.sigma is not None:
        out["sigma"] = repfn_to_json(spec.sigma)
    if spec.inner is not None:
        out["inner"] = meanspec_to_json(spec.inner)
    return out


def meanspec_from_json(obj) -> MultiMeanSpec:
    try:
        kind = obj["kind"]
    except (KeyError, TypeError) as exc:
        raise UnknownKind(f"mean JSON must carry 'kind': {exc}") from exc
    if kind not in _MEAN_KINDS:
        raise UnknownKind(f"unknown mean kind {kind!r}")
    weights = Weights(tuple(obj["weights"])) if "weights" in obj else None
    return MultiMeanSpec(
        kind=kind,
        weights=weights,
        alpha=obj.get("alpha"),
        base=meanspec_from_json(obj["base"]) if "base" in obj else None,
        sigma=repfn_from_json(obj["sigma"]) if "sigma" in obj else None,
        inner=meanspec_from_json(obj["inner"]) if "inner" in obj else None,
    )


def mean_result_from_json(obj) -> MeanResult:
    return MeanResult(
        value=matrix_from_json(obj["value"]),
        iterations=int(obj["iterations"]),
        residual_dt=float(obj["residual_dt"]),
        enclosure_gap=None if obj.get("enclosure_gap") is None else float(obj["enclosure_gap"]),
    )
