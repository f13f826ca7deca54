"""Cartan and Jordan projections, gaps, loxodromy and attracting flags.

Cartan data comes from singular values with respect to the standard inner
product, Jordan data from eigenvalue moduli; both are recentered to sum zero
so that they only depend on the projective class.  Attracting and repelling
flags are produced both for the classical projections (singular flags) and
for the form-twisted dynamics through the adjoint involution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flags import Flag, flag_distance, line_hyperplane_distance
from .forms import Form, o_adjoint
from .numerics import ScaledMatrix, compound, eigen, wedge_coordinates
from .weyl import ChamberA

__all__ = [
    "CartanVector",
    "cartan",
    "jordan",
    "has_gap",
    "gap_margin",
    "is_loxodromic",
    "loxodromy_margin",
    "cartan_attractor",
    "cartan_repellor",
    "o_attractor",
    "o_repellor",
    "check_r_eps_loxodromic",
    "MissingGapError",
    "NotLoxodromicError",
]

GAP_TOL = 1e-6


class MissingGapError(ValueError):
    """The element has no singular-value gap where one is required."""


class NotLoxodromicError(ValueError):
    """The element is not loxodromic where loxodromy is required."""


@dataclass(frozen=True)
class CartanVector:
    """Sum-zero length-d vector of log data.

    frame_tag is "sorted" for descending-sorted values (Cartan/Jordan data)
    and "slots" for values indexed by the reference lines (slot-chamber data).
    """

    coords: np.ndarray
    frame_tag: str = "sorted"

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def in_chamber(self, chamber: ChamberA) -> np.ndarray:
        """Sorted values placed into the given chamber's line order."""
        if self.frame_tag != "sorted":
            raise ValueError("only sorted-frame vectors can be re-framed")
        return chamber.place(self.coords)


def _recenter(values: np.ndarray) -> np.ndarray:
    return values - values.mean()


def cartan(g: ScaledMatrix) -> CartanVector:
    """Log singular values, recentered to sum zero, sorted descending."""
    sv = np.linalg.svd(g.entries, compute_uv=False)
    return CartanVector(_recenter(np.log(sv)))


def jordan(g: ScaledMatrix) -> CartanVector:
    """Log eigenvalue moduli, recentered, sorted descending."""
    eig = eigen(g)
    return CartanVector(_recenter(np.sort(eig.log_moduli)[::-1]))


def gap_margin(g: ScaledMatrix) -> float:
    return float(np.min(-np.diff(cartan(g).coords)))


def has_gap(g: ScaledMatrix, tol: float = GAP_TOL) -> bool:
    """All simple-root values of the Cartan projection exceed the tolerance."""
    return gap_margin(g) > tol


def loxodromy_margin(g: ScaledMatrix) -> float:
    return float(np.min(-np.diff(jordan(g).coords)))


def is_loxodromic(g: ScaledMatrix, tol: float = GAP_TOL) -> bool:
    """All consecutive eigenvalue-modulus gaps exceed the tolerance."""
    return loxodromy_margin(g) > tol


def cartan_attractor(g: ScaledMatrix, tol: float = GAP_TOL) -> Flag:
    """Flag of left singular directions in descending singular order."""
    if not has_gap(g, tol):
        raise MissingGapError("Cartan attractor needs a singular-value gap")
    u, _, _ = np.linalg.svd(g.entries)
    return Flag.of(u)


def cartan_repellor(g: ScaledMatrix, tol: float = GAP_TOL) -> Flag:
    """Attractor of the inverse: right singular directions in ascending order."""
    if not has_gap(g, tol):
        raise MissingGapError("Cartan repellor needs a singular-value gap")
    _, _, vh = np.linalg.svd(g.entries)
    return Flag.of(vh.conj().T[:, ::-1])


def _eigen_flag(m: ScaledMatrix, tol: float) -> Flag:
    eig = eigen(m)
    if np.min(-np.diff(eig.log_moduli)) <= tol:
        raise NotLoxodromicError("eigenvalue moduli are not separated")
    vecs = eig.vectors
    if m.field == "R":
        # real loxodromic spectrum: strip the spurious imaginary parts
        phases = np.exp(-1j * np.angle(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(m.dim)]))
        vecs = np.real(vecs * phases[None, :])
    return Flag.of(vecs)


def o_attractor(o: Form, g: ScaledMatrix, tol: float = GAP_TOL) -> Flag:
    """Attracting fixed flag of g * sigma(g^{-1}) (eigenlines by decreasing modulus).

    sigma(g^{-1}) is the plain adjoint of g, so no inversion is needed.
    """
    return _eigen_flag(g @ o_adjoint(o, g), tol)


def o_repellor(o: Form, g: ScaledMatrix, tol: float = GAP_TOL) -> Flag:
    """Repelling fixed flag of sigma(g^{-1}) * g; equals the attractor of g^{-1}."""
    eig_flag = _eigen_flag(o_adjoint(o, g) @ g, tol)
    return Flag.of(eig_flag.basis[:, ::-1])


def check_r_eps_loxodromic(g: ScaledMatrix, r: float, eps: float, tol: float = GAP_TOL) -> bool:
    """Quantified loxodromy: fixed-point separation and contraction per level.

    The contraction clause is certified through an operator bound: writing a
    point of the eps-ball complement as a combination of the attracting line
    and the repelling hyperplane, the image distance to the attracting line
    is at most ||T|_H|| (sqrt(1 - eps^2) + (eps/D) sqrt(1 - D^2)) / (|mu| eps)
    with D the separation of the fixed pair and mu the top eigenvalue.
    """
    if not 0 < eps <= r:
        raise ValueError("need 0 < eps <= r")
    if not is_loxodromic(g, tol):
        raise NotLoxodromicError("quantified check needs a loxodromic element")
    d = g.dim
    plus = _eigen_flag(g, tol)
    minus_basis = _eigen_flag(g, tol).basis[:, ::-1]
    minus = Flag.of(minus_basis)
    for j in range(1, d):
        cj = compound(g, j)
        line = wedge_coordinates(plus.basis, j)
        dual = wedge_coordinates(minus.basis, d - j)
        theta = _hodge_dual(dual, d, j)
        sep = line_hyperplane_distance(line, theta)
        if sep < 2 * r:
            return False
        if not _contracts(cj.entries, line, theta, eps):
            return False
    return True


def _hodge_dual(w: np.ndarray, d: int, j: int) -> np.ndarray:
    """Covector of the annihilator hyperplane of a (d-j)-wedge, in level-j coords."""
    from itertools import combinations

    subs_j = list(combinations(range(d), j))
    index_cmpl = {tuple(sorted(set(range(d)) - set(s))): i for i, s in enumerate(subs_j)}
    subs_cj = list(combinations(range(d), d - j))
    out = np.zeros(len(subs_j), dtype=w.dtype)
    for a, comp in enumerate(subs_cj):
        i = index_cmpl[comp]
        merged = list(comp) + list(subs_j[i])
        sign = _perm_sign(merged)
        out[i] = sign * np.conj(w[a])
    return out


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for k in range(i + 1, len(seq)):
            if seq[i] > seq[k]:
                sign = -sign
    return sign


def _contracts(t: np.ndarray, plus_line: np.ndarray, theta: np.ndarray, eps: float) -> bool:
    v = plus_line / np.linalg.norm(plus_line)
    th = theta / np.linalg.norm(theta)
    big_d = abs(np.vdot(th, v))
    if big_d <= 0:
        return False
    mu = np.vdot(v, t @ v)  # eigenvalue on the attracting line
    # operator norm of t restricted to the repelling hyperplane {u : <th, u> = 0}
    q, _ = np.linalg.qr(np.column_stack([th, np.eye(len(th))]))
    h_basis = q[:, 1:]
    t_h = np.linalg.norm(t @ h_basis, 2)
    bound = t_h * (np.sqrt(max(0.0, 1 - eps**2)) + (eps / big_d) * np.sqrt(max(0.0, 1 - big_d**2)))
    return bool(bound / (abs(mu) * eps) <= eps)


def flag_pair_distance(x: Flag, y: Flag) -> float:
    return flag_distance(x, y)
