"""Signed Cartan decomposition: membership, slot projection and distance.

An element admits a decomposition h w exp(X) h' (isometries h, h', signed
permutation w, X in the slot chamber) exactly when the twisted square
S = sigma(g^{-1}) g is diagonalizable with real eigenvalues.  The slot
coordinate is then half the recentered log eigenvalue spectrum of S, filed
into positive and negative slots by the form-signs of the eigenlines; its
Euclidean norm is the distance between the base geodesic copy of the
isometry group's symmetric space and its g-translate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flags import o_generic
from .forms import Form, o_adjoint, restricted_signature
from .numerics import ScaledMatrix, eigen
from .projections import (
    CartanVector,
    GAP_TOL,
    cartan_attractor,
    cartan_repellor,
    gap_margin,
)
from .weyl import (
    ChamberA,
    WeylElement,
    chamber_from_signs,
    chamber_transition,
    iota_of_chamber,
)

__all__ = [
    "MembershipResult",
    "PqCartanResult",
    "membership",
    "pq_project",
    "distance_So",
    "weyl_chamber_of",
    "NotInBoGError",
]

PHASE_TOL = 1e-6
ISOTROPY_TOL = 1e-9
MODULUS_CLUSTER_TOL = 1e-9


class NotInBoGError(ValueError):
    """The element admits no signed Cartan decomposition."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class MembershipResult:
    ok: bool
    reason: str | None = None
    phase_margin: float = np.nan
    condition: float = np.nan
    isotropy_margin: float = np.nan

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class PqCartanResult:
    """Slot projection b_o, its Weyl coordinate and quality margins.

    b_o is a slot-frame CartanVector; w_g maps descending rank to slot, so
    b_o = w_g . (half the sorted log spectrum of the twisted square).
    eigen_signs are the form-signs of the eigenlines in descending-modulus
    order.  degenerate marks results whose modulus gaps or isotropy margins
    fell below tolerance (values are still returned, without an accuracy
    promise).
    """

    b_o: CartanVector
    w_g: WeylElement
    eigen_signs: tuple[int, ...]
    modulus_gap: float
    isotropy_margin: float
    degenerate: bool


def twisted_square(o: Form, g: ScaledMatrix) -> ScaledMatrix:
    """S = sigma(g^{-1}) g = adjoint(g) g; self-adjoint for the form."""
    return o_adjoint(o, g) @ g


def _aligned_phases(vals_phases: np.ndarray, field: str, tol: float) -> tuple[bool, float]:
    """Check all eigenvalue phases lie on a common real axis.

    Over the reals the projective lift is fixed up to sign, so phases must
    sit at 0 or pi; over the complexes a global unit factor is free, so only
    phases relative to the top eigenvalue matter.
    """
    phases = vals_phases.copy()
    if field == "C":
        phases = phases - phases[0]
    dev = np.abs(np.sin(phases))
    margin = float(tol - np.max(dev))
    return bool(np.max(dev) <= tol), margin


def membership(
    o: Form,
    g: ScaledMatrix,
    phase_tol: float = PHASE_TOL,
    condition_cap: float = 1e8,
    isotropy_tol: float = ISOTROPY_TOL,
) -> MembershipResult:
    """Whether g admits a signed Cartan decomposition, with failure reason.

    True exactly when the twisted square is numerically diagonalizable with
    real spectrum; the eigenbasis is then orthogonal for the form up to the
    conditioning, and eigenline isotropy only occurs at modulus collisions,
    which the clustered projection absorbs.
    """
    s = twisted_square(o, g)
    try:
        eig = eigen(s, condition_cap=condition_cap)
    except Exception as exc:  # eigen failure counts as non-diagonalizable
        return MembershipResult(False, f"non-diagonalizable ({exc})")
    ok_phase, phase_margin = _aligned_phases(eig.phases, s.field, phase_tol)
    if not ok_phase:
        return MembershipResult(False, "complex spectrum", phase_margin, eig.vector_condition)
    if not eig.diagonalizable:
        return MembershipResult(
            False, "non-diagonalizable", phase_margin, eig.vector_condition
        )
    clusters = _modulus_clusters(eig.recentered_moduli())
    iso_margin = np.inf
    for idx in clusters:
        cols = eig.vectors[:, idx]
        if s.field == "R":
            cols = _realign_real(cols)
        pos, neg, margin = restricted_signature(o, cols)
        iso_margin = min(iso_margin, margin)
        if pos + neg < len(idx):
            return MembershipResult(
                False, "isotropic eigenline", phase_margin, eig.vector_condition, margin
            )
    return MembershipResult(True, None, phase_margin, eig.vector_condition, float(iso_margin))


def _modulus_clusters(moduli_desc: np.ndarray, tol: float = MODULUS_CLUSTER_TOL) -> list[list[int]]:
    clusters: list[list[int]] = [[0]]
    for i in range(1, len(moduli_desc)):
        if moduli_desc[i - 1] - moduli_desc[i] <= tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def _realign_real(cols: np.ndarray) -> np.ndarray:
    lead = cols[np.argmax(np.abs(cols), axis=0), np.arange(cols.shape[1])]
    out = cols * np.exp(-1j * np.angle(lead))[None, :]
    return np.real(out)


def pq_project(
    o: Form,
    g: ScaledMatrix,
    phase_tol: float = PHASE_TOL,
    condition_cap: float = 1e8,
    isotropy_tol: float = ISOTROPY_TOL,
) -> PqCartanResult:
    """Slot projection of g: half the twisted-square spectrum, filed by sign.

    Eigenvalues of equal modulus are grouped and the group's slots are
    filled according to the signature of the form restricted to the modulus
    eigenspace, following the inductive uniqueness argument; this absorbs
    the sign ambiguity of the signed-permutation coordinate without ever
    materializing it.
    """
    member = membership(o, g, phase_tol, condition_cap, isotropy_tol)
    if not member.ok:
        raise NotInBoGError(member.reason or "not in the decomposable set")
    p, q = o.signature
    d = o.dim
    s = twisted_square(o, g)
    eig = eigen(s, condition_cap=condition_cap)
    halves = eig.recentered_moduli() / 2.0
    clusters = _modulus_clusters(eig.recentered_moduli())
    slots = np.empty(d)
    rank_to_slot = [0] * d
    signs = [0] * d
    next_pos, next_neg = 0, p
    min_gap = np.inf
    iso_margin = np.inf
    prev_top = None
    for idx in clusters:
        cols = eig.vectors[:, idx]
        if s.field == "R":
            cols = _realign_real(cols)
        npos, nneg, margin = restricted_signature(o, cols)
        iso_margin = min(iso_margin, margin)
        if npos + nneg != len(idx):
            raise NotInBoGError("isotropic eigenline")
        value = float(np.mean(halves[idx]))
        if prev_top is not None:
            min_gap = min(min_gap, prev_top - 2 * value)
        prev_top = 2 * value
        pos_ranks, neg_ranks = idx[:npos], idx[npos:]
        for r in pos_ranks:
            slots[next_pos] = value
            rank_to_slot[r] = next_pos
            signs[r] = 1
            next_pos += 1
        for r in neg_ranks:
            slots[next_neg] = value
            rank_to_slot[r] = next_neg
            signs[r] = -1
            next_neg += 1
    if next_pos != p or next_neg != d:
        raise NotInBoGError("eigenline signs do not fill the signature")
    if len(clusters) == 1:
        min_gap = 0.0
    slots = slots - slots.mean()
    degenerate = bool(min_gap < 10 * MODULUS_CLUSTER_TOL or iso_margin < isotropy_tol)
    return PqCartanResult(
        b_o=CartanVector(slots, frame_tag="slots"),
        w_g=WeylElement(tuple(rank_to_slot)),
        eigen_signs=tuple(signs),
        modulus_gap=float(min_gap) if np.isfinite(min_gap) else np.inf,
        isotropy_margin=float(iso_margin),
        degenerate=degenerate,
    )


def distance_So(o: Form, g: ScaledMatrix, **kwargs) -> float:
    """Distance between the base copy and its g-translate: the slot norm."""
    return pq_project(o, g, **kwargs).b_o.norm()


@dataclass(frozen=True)
class ChamberPrediction:
    chamber: ChamberA
    w_decomposition: WeylElement
    rank_to_slot: WeylElement
    attractor_signs: tuple[int, ...]
    repellor_signs: tuple[int, ...]


def weyl_chamber_of(o: Form, g: ScaledMatrix, tol: float = GAP_TOL) -> ChamberPrediction:
    """Chamber containing the slot projection, read off the singular flags.

    For g with a strong singular gap and generic singular flags, the slot
    projection lies in the opposition image of the chamber attached to the
    repelling flag's orbit, and the signed-permutation coordinate of the
    decomposition is the transition from that chamber's flag to the
    attracting flag's one.  Valid once the gap margin dominates the flag
    margins; agreement with pq_project's slot assignment is the executable
    consistency check.
    """
    if gap_margin(g) <= tol:
        raise ValueError("chamber prediction needs a singular-value gap")
    u_flag = cartan_attractor(g, tol)
    s_flag = cartan_repellor(g, tol)
    ru = o_generic(o, u_flag)
    rs = o_generic(o, s_flag)
    if not ru.generic or not rs.generic:
        raise NotInBoGError("non-generic singular flag")
    chamber_u = chamber_from_signs(ru.signature.signs)
    chamber_s = chamber_from_signs(rs.signature.signs)
    predicted = iota_of_chamber(chamber_s, o.signature[0])
    w_dec = chamber_transition(chamber_u, predicted)
    rank_to_slot = WeylElement(predicted.order)
    return ChamberPrediction(
        chamber=predicted,
        w_decomposition=w_dec,
        rank_to_slot=rank_to_slot,
        attractor_signs=ru.signature.signs,
        repellor_signs=rs.signature.signs,
    )
