"""Overflow-safe projective matrix arithmetic, compounds and eigendata.

Group elements are projective classes: a ``ScaledMatrix`` keeps its entries
at Frobenius norm one and accumulates the true magnitude in a separate
natural-log accumulator, so that words of arbitrary length never overflow.
Every projection built on top recenters log-spectra to sum zero, which makes
all downstream quantities invariant under rescaling a representative.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

MAX_DIM = 8

__all__ = [
    "ScaledMatrix",
    "CompoundMatrix",
    "EigenData",
    "multiply",
    "compound",
    "eigen",
    "NumericsError",
]


class NumericsError(RuntimeError):
    """A numerical routine failed to produce a trustworthy answer."""


def _normalize(entries: np.ndarray) -> tuple[np.ndarray, float]:
    peak = float(np.max(np.abs(entries)))
    if not np.isfinite(peak) or peak == 0.0:
        raise NumericsError("matrix with zero or non-finite entries")
    scaled = entries / peak
    nrm = float(np.linalg.norm(scaled))
    out = scaled / nrm
    out.setflags(write=False)
    return out, float(np.log(peak) + np.log(nrm))


@dataclass(frozen=True)
class ScaledMatrix:
    """A d x d matrix stored as (unit-Frobenius entries, log-scale)."""

    entries: np.ndarray
    log_scale: float = 0.0

    @staticmethod
    def of(matrix, log_scale: float = 0.0) -> "ScaledMatrix":
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if m.shape[0] > MAX_DIM:
            raise ValueError(f"dimension {m.shape[0]} exceeds supported maximum {MAX_DIM}")
        dtype = np.complex128 if np.iscomplexobj(m) else np.float64
        ent, shift = _normalize(m.astype(dtype))
        return ScaledMatrix(ent, log_scale + shift)

    @staticmethod
    def identity(d: int, field: str = "R") -> "ScaledMatrix":
        eye = np.eye(d, dtype=np.complex128 if field == "C" else np.float64)
        return ScaledMatrix.of(eye)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def field(self) -> str:
        return "C" if np.iscomplexobj(self.entries) else "R"

    def rescaled(self, factor: float) -> "ScaledMatrix":
        """Same projective class: entries scaled by ``factor``, log-scale compensated."""
        return ScaledMatrix.of(self.entries * factor, self.log_scale - np.log(abs(factor)))

    def inv(self) -> "ScaledMatrix":
        try:
            raw = np.linalg.inv(self.entries)
        except np.linalg.LinAlgError as exc:
            raise NumericsError("singular matrix has no inverse") from exc
        return ScaledMatrix.of(raw, -self.log_scale)

    def adjoint(self) -> "ScaledMatrix":
        return ScaledMatrix(np.conj(self.entries.T), self.log_scale)

    def true_matrix(self) -> np.ndarray:
        """The actual matrix; only safe while the scale fits in float range."""
        if abs(self.log_scale) > 600.0:
            raise NumericsError(f"log scale {self.log_scale:.1f} too large to materialize")
        return np.exp(self.log_scale) * self.entries

    def __matmul__(self, other: "ScaledMatrix") -> "ScaledMatrix":
        return multiply(self, other)

    def power(self, n: int) -> "ScaledMatrix":
        if n < 0:
            return self.inv().power(-n)
        acc = ScaledMatrix.identity(self.dim, self.field)
        base = self
        while n:
            if n & 1:
                acc = acc @ base
            base = base @ base
            n >>= 1
        return acc


def multiply(a: ScaledMatrix, b: ScaledMatrix) -> ScaledMatrix:
    """Product of projective classes, renormalized; log-scales accumulate."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.field != b.field:
        raise ValueError("field mismatch between operands")
    return ScaledMatrix.of(a.entries @ b.entries, a.log_scale + b.log_scale)


def _subsets(d: int, j: int) -> list[tuple[int, ...]]:
    return list(combinations(range(d), j))


def minor_matrix(m: np.ndarray, j: int) -> np.ndarray:
    """The j-th compound: matrix of j x j minors in lexicographic subset order."""
    d = m.shape[0]
    if j == 1:
        return m.copy()
    subs = _subsets(d, j)
    c = len(subs)
    blocks = np.empty((c, c, j, j), dtype=m.dtype)
    for r, rows in enumerate(subs):
        sl = m[np.ix_(rows, range(d))]
        for s, cols in enumerate(subs):
            blocks[r, s] = sl[:, cols]
    return np.linalg.det(blocks.reshape(c * c, j, j)).reshape(c, c)


@dataclass(frozen=True)
class CompoundMatrix:
    """Level-j exterior power of a ScaledMatrix, itself kept in scaled form."""

    level: int
    entries: np.ndarray
    log_scale: float

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def as_scaled(self) -> ScaledMatrix:
        return ScaledMatrix(self.entries, self.log_scale)


def compound(g: ScaledMatrix, j: int) -> CompoundMatrix:
    """Exterior-power matrix of level j; multiplicative in g."""
    d = g.dim
    if not 1 <= j <= d - 1:
        raise ValueError(f"compound level must lie in [1, {d - 1}], got {j}")
    ent, shift = _normalize(minor_matrix(g.entries, j))
    return CompoundMatrix(j, ent, j * g.log_scale + shift)


@dataclass(frozen=True)
class EigenData:
    """Eigenpairs sorted by decreasing log-modulus.

    log_moduli include the source log-scale; phases are the eigenvalue
    arguments of the normalized entries.  ``diagonalizable`` is false when
    the eigenvector matrix condition number exceeds the configured cap.
    """

    log_moduli: np.ndarray
    phases: np.ndarray
    vectors: np.ndarray
    vector_condition: float
    diagonalizable: bool

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def recentered_moduli(self) -> np.ndarray:
        return self.log_moduli - self.log_moduli.mean()


def eigen(g: ScaledMatrix, condition_cap: float = 1e8) -> EigenData:
    """Eigendecomposition of the projective class, checked for sanity."""
    try:
        vals, vecs = np.linalg.eig(g.entries)
    except np.linalg.LinAlgError as exc:
        raise NumericsError("eigendecomposition failed to converge") from exc
    moduli = np.abs(vals)
    if np.any(moduli == 0.0) or not np.all(np.isfinite(moduli)):
        raise NumericsError("eigenvalues vanished or overflowed; input too ill-conditioned")
    order = np.argsort(-np.log(moduli), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    residual = np.linalg.norm(g.entries @ vecs - vecs * vals, axis=0).max()
    if residual > 1e-8 * np.linalg.norm(g.entries):
        raise NumericsError(f"eigenpair residual {residual:.2e} above tolerance")
    cond = float(np.linalg.cond(vecs))
    return EigenData(
        log_moduli=np.log(np.abs(vals)) + g.log_scale,
        phases=np.angle(vals),
        vectors=vecs,
        vector_condition=cond,
        diagonalizable=bool(cond < condition_cap),
    )


def wedge_coordinates(columns: np.ndarray, j: int) -> np.ndarray:
    """Pluecker coordinates of the span of the first j columns (lex order)."""
    d = columns.shape[0]
    block = columns[:, :j]
    subs = _subsets(d, j)
    if j == 1:
        return block[:, 0].copy()
    stack = np.empty((len(subs), j, j), dtype=columns.dtype)
    for i, rows in enumerate(subs):
        stack[i] = block[rows, :]
    return np.linalg.det(stack)


def subspace_from_wedge(w: np.ndarray, d: int, j: int) -> np.ndarray:
    """Recover the j-dimensional subspace from a decomposable wedge vector.

    Solves x wedge w = 0 as a linear system in x; the wedge must be
    decomposable (it always is when it came from a subspace).
    """
    if j == d:
        return np.eye(d, dtype=w.dtype)
    subs_j = {s: i for i, s in enumerate(_subsets(d, j))}
    subs_j1 = _subsets(d, j + 1)
    rows = np.zeros((len(subs_j1), d), dtype=np.complex128 if np.iscomplexobj(w) else np.float64)
    for r, sup in enumerate(subs_j1):
        for pos, i in enumerate(sup):
            rest = sup[:pos] + sup[pos + 1 :]
            rows[r, i] = ((-1) ** pos) * w[subs_j[rest]]
    _, sv, vh = np.linalg.svd(rows)
    large = int(np.sum(sv > 1e-10 * sv[0])) if sv.size else 0
    if large > d - j:
        raise NumericsError("wedge vector is not decomposable within tolerance")
    return vh[d - j :, :].conj().T
