"""Dense real symmetric positive definite matrix kernel.

Everything in this module is a pure function of its arguments.  The array
helpers (``sym``, ``eigh_apply``, ``spd_power``, ``thompson`` ...) accept
stacked operands of shape ``(..., d, d)`` and broadcast over the leading
axes; the typed entry points (:func:`validate_spd`, :func:`matrix_function`,
:func:`thompson_distance` ...) work on single :class:`SpdMatrix` values and
carry the tolerance semantics.

Eigendecomposition is the single primitive behind every matrix function
here: the matrices are small (dimension of order tens) and symmetric
eigensolvers are backward stable, so there is no reason to special-case
exp/log/sqrt.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BadInterval,
    DimensionMismatch,
    DomainError,
    EigenFailure,
    NotPositiveDefinite,
    NotSquare,
    NotSymmetric,
)

__all__ = [
    "SpdMatrix",
    "SpectralStats",
    "Relation",
    "LoewnerVerdict",
    "validate_spd",
    "matrix_function",
    "thompson_distance",
    "loewner_compare",
    "spectral_stats",
    "random_spd",
    "congruence",
    "sym",
    "eigh_apply",
    "spd_power",
    "spd_inv",
    "spd_sqrt_pair",
    "spd_log",
    "spd_exp",
    "thompson",
    "lambda_min",
    "op_norm",
    "matrix_to_json",
    "matrix_from_json",
]

DEFAULT_PD_TOL = 1e-12
DEFAULT_SYM_TOL = 1e-8
DEFAULT_ORDER_TOL = 1e-10


# --------------------------------------------------------------------------
# stacked-array helpers
# --------------------------------------------------------------------------


def sym(a):
    """Symmetric part ``(a + a^T)/2`` over the trailing two axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _eigh(a):
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails
        raise EigenFailure(f"symmetric eigendecomposition failed: {exc}") from exc


def eigh_apply(a, fn):
    """Apply scalar ``fn`` to the spectrum of symmetric ``a``, batched.

    Returns ``U fn(L) U^T`` from ``a = U L U^T``; the result is exactly
    symmetric by construction.
    """
    w, v = _eigh(a)
    fw = np.asarray(fn(w), dtype=float)
    if not np.all(np.isfinite(fw)):
        bad = w[~np.isfinite(fw)]
        raise DomainError(f"function undefined at eigenvalue(s) {bad[:4]}")
    return sym(np.einsum("...ij,...j,...kj->...ik", v, fw, v))


def spd_power(a, r):
    """``a**r`` through the spectrum; ``a`` must be positive definite."""
    if r == 1:
        return sym(np.asarray(a, dtype=float))
    return eigh_apply(a, lambda w: _checked_pow(w, r))


def _checked_pow(w, r):
    if np.any(w <= 0) and (r < 0 or r != int(r)):
        raise DomainError(f"nonpositive eigenvalue {w.min()} under power {r}")
    return np.power(w, r)


def spd_inv(a):
    return eigh_apply(a, lambda w: 1.0 / w)


def spd_sqrt_pair(a):
    """Return ``(a**0.5, a**-0.5)`` from a single decomposition."""
    w, v = _eigh(a)
    if np.any(w <= 0):
        raise DomainError(f"matrix not positive definite (min eigenvalue {w.min()})")
    s = np.sqrt(w)
    half = np.einsum("...ij,...j,...kj->...ik", v, s, v)
    inv_half = np.einsum("...ij,...j,...kj->...ik", v, 1.0 / s, v)
    return sym(half), sym(inv_half)


def spd_log(a):
    return eigh_apply(a, _checked_log)


def _checked_log(w):
    if np.any(w <= 0):
        raise DomainError(f"log of nonpositive eigenvalue {w.min()}")
    return np.log(w)


def spd_exp(a):
    return eigh_apply(a, np.exp)


def lambda_min(a):
    """Smallest eigenvalue over the trailing two axes (batched)."""
    return np.linalg.eigvalsh(a)[..., 0]


def op_norm(a):
    """Spectral norm of symmetric ``a`` (batched)."""
    w = np.linalg.eigvalsh(a)
    return np.maximum(np.abs(w[..., 0]), np.abs(w[..., -1]))


def thompson(a, b):
    """Thompson distance ``max |log eig(a^{-1/2} b a^{-1/2})|`` (batched)."""
    _, a_invh = spd_sqrt_pair(a)
    w = np.linalg.eigvalsh(sym(a_invh @ b @ a_invh))
    if np.any(w <= 0):
        raise DomainError("thompson distance needs positive definite operands")
    lw = np.log(w)
    return np.maximum(np.abs(lw[..., 0]), np.abs(lw[..., -1]))


def congruence(s, a):
    """``s^T a s`` symmetrized, batched over leading axes."""
    st = np.swapaxes(s, -1, -2)
    return sym(st @ a @ s)


# --------------------------------------------------------------------------
# typed values
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpdMatrix:
    """A validated dense real symmetric positive definite matrix.

    Construct through :func:`validate_spd` (or :func:`random_spd`); the raw
    constructor trusts its input.
    """

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))
        self.entries.setflags(write=False)

    @property
    def a(self):
        """The underlying ndarray (read-only view)."""
        return self.entries

    def to_json(self):
        return matrix_to_json(self.entries)


@dataclass(frozen=True)
class SpectralStats:
    lambda_min: float
    op_norm: float
    condition_number: float


class Relation(Enum):
    LESS_EQUAL = "LessEqual"
    GREATER_EQUAL = "GreaterEqual"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class LoewnerVerdict:
    """Outcome of an order comparison.

    ``margin`` is the smallest eigenvalue of the difference taken in the
    relation's favorable direction; for EQUAL it is the worse of the two
    directions and for INCOMPARABLE the better one (both signed).
    """

    relation: Relation
    margin: float

    @property
    def holds_le(self):
        return self.relation in (Relation.LESS_EQUAL, Relation.EQUAL)

    @property
    def holds_ge(self):
        return self.relation in (Relation.GREATER_EQUAL, Relation.EQUAL)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def validate_spd(entries, tol=DEFAULT_PD_TOL, sym_tol=DEFAULT_SYM_TOL) -> SpdMatrix:
    """Validate and symmetrize a square array into an :class:`SpdMatrix`.

    Asymmetry up to ``sym_tol * max|entries|`` is folded away by averaging
    with the transpose; larger asymmetry is an error.  Positive definiteness
    is rejected when the smallest eigenvalue is at or below
    ``tol * spectral_scale``.
    """
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquare(f"expected a square 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix entries must be finite")
    scale = np.max(np.abs(a)) if a.size else 0.0
    gap = np.max(np.abs(a - a.T)) if a.size else 0.0
    if gap > sym_tol * max(scale, 1e-300):
        raise NotSymmetric(
            f"asymmetry {gap:.3e} exceeds {sym_tol:.1e} * max|entries| = "
            f"{sym_tol * scale:.3e}"
        )
    s = sym(a)
    w = np.linalg.eigvalsh(s)
    spectral_scale = max(abs(w[0]), abs(w[-1]))
    if w[0] <= tol * spectral_scale:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.6e} is not positive")
    return SpdMatrix(dim=a.shape[0], entries=s)


def matrix_function(A: SpdMatrix, f) -> np.ndarray:
    """``U f(L) U^T`` for ``A = U L U^T``; plain symmetric ndarray out.

    The result need not be positive definite (``f`` may be a log, say), so
    it is returned raw; re-validate before feeding it back into solvers.
    """
    return eigh_apply(A.a, f)


def thompson_distance(A: SpdMatrix, B: SpdMatrix) -> float:
    if A.dim != B.dim:
        raise DimensionMismatch(f"dimensions differ: {A.dim} vs {B.dim}")
    return float(thompson(A.a, B.a))


def loewner_compare(A: SpdMatrix, B: SpdMatrix, tol=DEFAULT_ORDER_TOL) -> LoewnerVerdict:
    """Compare in the positive semidefinite order with relative slack.

    ``A <= B`` is accepted when ``lambda_min(B - A) >= -tol * (|A| + |B|)``
    in spectral norm, which keeps the verdict invariant under rescaling of
    both operands.
    """
    if A.dim != B.dim:
        raise DimensionMismatch(f"dimensions differ: {A.dim} vs {B.dim}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return loewner_compare_arrays(A.a, B.a, tol)


def loewner_compare_arrays(a, b, tol=DEFAULT_ORDER_TOL) -> LoewnerVerdict:
    """Array-level twin of :func:`loewner_compare` (single matrices)."""
    scale = float(op_norm(a) + op_norm(b))
    slack = tol * scale
    diff = b - a
    lo = float(lambda_min(diff))
    hi = float(lambda_min(-diff))
    le = lo >= -slack
    ge = hi >= -slack
    if le and ge:
        return LoewnerVerdict(Relation.EQUAL, min(lo, hi))
    if le:
        return LoewnerVerdict(Relation.LESS_EQUAL, lo)
    if ge:
        return LoewnerVerdict(Relation.GREATER_EQUAL, hi)
    return LoewnerVerdict(Relation.INCOMPARABLE, max(lo, hi))


def spectral_stats(A: SpdMatrix) -> SpectralStats:
    w = np.linalg.eigvalsh(A.a)
    return SpectralStats(
        lambda_min=float(w[0]),
        op_norm=float(w[-1]),
        condition_number=float(w[-1] / w[0]),
    )


def random_spd(dim: int, spectrum, seed: int) -> SpdMatrix:
    """Seeded random SPD matrix with the spectrum pinned to ``[m, M]``.

    For ``dim >= 2`` the extreme eigenvalues are exactly ``m`` and ``M`` and
    the rest are uniform in between, so hypotheses of the form
    ``m I <= A <= M I`` hold with equality at both ends rather than only in
    distribution.  ``dim == 1`` draws a single value in ``[m, M]``.
    """
    m, M = spectrum
    if not (0 < m < M):
        raise BadInterval(f"need 0 < m < M, got [{m}, {M}]")
    if dim < 1:
        raise BadInterval(f"dimension must be positive, got {dim}")
    rng = np.random.default_rng(seed)
    if dim == 1:
        val = rng.uniform(m, M)
        return SpdMatrix(dim=1, entries=np.array([[val]]))
    eigs = np.empty(dim)
    eigs[0], eigs[-1] = m, M
    eigs[1:-1] = rng.uniform(m, M, size=dim - 2)
    q = _random_orthogonal(dim, rng)
    a = sym((q * eigs) @ q.T)
    return SpdMatrix(dim=dim, entries=a)


def _random_orthogonal(dim, rng):
    # QR with the sign fix that makes the distribution Haar and the result
    # independent of LAPACK's sign conventions.
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


# --------------------------------------------------------------------------
# wire format
# --------------------------------------------------------------------------


def matrix_to_json(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"dim": int(a.shape[0]), "entries": [[float(x) for x in row] for row in a]}


def matrix_from_json(obj, tol=DEFAULT_PD_TOL, sym_tol=DEFAULT_SYM_TOL) -> SpdMatrix:
    try:
        dim = int(obj["dim"])
        entries = obj["entries"]
    except (KeyError, TypeError) as exc:
        raise NotSquare(f"matrix JSON must carry 'dim' and 'entries': {exc}") from exc
    a = np.asarray(entries, dtype=float)
    if a.shape != (dim, dim):
        raise NotSquare(f"declared dim {dim} does not match entries shape {a.shape}")
    return validate_spd(a, tol=tol, sym_tol=sym_tol)
