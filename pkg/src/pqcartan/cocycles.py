"""Busemann cocycles, the comparison potential, Gromov product, cross-ratio.

All level data are the logarithmic expansion rates of exterior powers:
chi_j(value) is recovered from ratios of level-j pairings, and the full
vector lives in the chamber frame through prefix-sum increments.  The
choice of a compatible full chamber is an explicit parameter everywhere;
no chamber-free version exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flags import Flag, NonGenericFlagError, flag_perp, o_generic, transverse
from .forms import Form, induced_form
from .numerics import ScaledMatrix, compound, wedge_coordinates
from .projections import jordan
from .weyl import ChamberA

__all__ = [
    "CocycleValue",
    "busemann_tau",
    "busemann_o",
    "potential",
    "dual_busemann",
    "iota_a",
    "gromov_product",
    "cross_ratio",
    "PhiCocycles",
]


@dataclass(frozen=True)
class CocycleValue:
    """Level values chi and the chamber-frame sum-zero coordinate vector."""

    chi: np.ndarray
    coords: np.ndarray
    chamber: ChamberA

    @property
    def dim(self) -> int:
        return len(self.coords)

    def pair(self, functional: np.ndarray) -> float:
        return float(np.dot(np.asarray(functional, dtype=float), self.coords))


def _value_from_chi(chi_full: np.ndarray, chamber: ChamberA) -> CocycleValue:
    """Assemble the vector from chi_1..chi_d; recentering drops the lift scale."""
    increments = np.diff(np.concatenate([[0.0], chi_full]))
    increments -= increments.mean()
    coords = np.empty(len(increments))
    coords[list(chamber.order)] = increments
    chi = np.cumsum(increments[: len(increments)])[:-1]
    return CocycleValue(chi, coords, chamber)


def _chamber_or_default(chamber: ChamberA | None, d: int) -> ChamberA:
    return chamber if chamber is not None else ChamberA.default(d)


def _log_det(g: ScaledMatrix) -> float:
    sign, logabs = np.linalg.slogdet(g.entries)
    return float(logabs) + g.dim * g.log_scale


def busemann_tau(g: ScaledMatrix, xi: Flag, chamber: ChamberA | None = None) -> CocycleValue:
    """Iwasawa cocycle through exterior norms: chi_j = log |L^j g . v| / |v|."""
    d = g.dim
    chamber = _chamber_or_default(chamber, d)
    chi = np.empty(d)
    for j in range(1, d):
        cj = compound(g, j)
        v = wedge_coordinates(xi.basis, j)
        chi[j - 1] = (
            np.log(np.linalg.norm(cj.entries @ v)) + cj.log_scale - np.log(np.linalg.norm(v))
        )
    chi[d - 1] = _log_det(g)
    return _value_from_chi(chi, chamber)


def _generic_wedges(o: Form, xi: Flag, label: str):
    rep = o_generic(o, xi)
    if not rep.generic:
        raise NonGenericFlagError(f"{label} flag degenerates at level {rep.failed_level}")


def busemann_o(
    o: Form, g: ScaledMatrix, xi: Flag, chamber: ChamberA | None = None
) -> CocycleValue:
    """Form-twisted cocycle: chi_j = (1/2) log |Q_j(L^j g v) / Q_j(v)|.

    Needs xi and g.xi generic; refuses otherwise rather than extrapolating.
    """
    d = g.dim
    chamber = _chamber_or_default(chamber, d)
    _generic_wedges(o, xi, "base")
    _generic_wedges(o, xi.translate(g), "translated")
    chi = np.empty(d)
    for j in range(1, d):
        oj = induced_form(o, j)
        cj = compound(g, j)
        v = wedge_coordinates(xi.basis, j)
        gv = cj.entries @ v
        chi[j - 1] = 0.5 * (
            np.log(abs(oj.quad(gv))) + 2 * cj.log_scale - np.log(abs(oj.quad(v)))
        )
    chi[d - 1] = _log_det(g)
    return _value_from_chi(chi, chamber)


def potential(o: Form, xi: Flag, chamber: ChamberA | None = None) -> CocycleValue:
    """Comparison potential between the form and the standard inner product.

    Its coboundary along the action is exactly the difference of the two
    cocycles: V(g.xi) - V(xi) = twisted(g, xi) - plain(g, xi).
    """
    d = xi.dim
    chamber = _chamber_or_default(chamber, d)
    _generic_wedges(o, xi, "potential")
    chi = np.empty(d)
    for j in range(1, d):
        oj = induced_form(o, j)
        v = wedge_coordinates(xi.basis, j)
        chi[j - 1] = 0.5 * np.log(abs(oj.quad(v))) - np.log(np.linalg.norm(v))
    chi[d - 1] = 0.0
    return _value_from_chi(chi, chamber)


def iota_a(value: CocycleValue) -> CocycleValue:
    """Opposition involution of the chamber: reverse-negate in rank order."""
    ranks = value.coords[list(value.chamber.order)]
    flipped = -ranks[::-1]
    coords = np.empty_like(value.coords)
    coords[list(value.chamber.order)] = flipped
    chi = np.cumsum(flipped)[:-1]
    return CocycleValue(chi, coords, value.chamber)


def dual_busemann(
    o: Form, g: ScaledMatrix, xi: Flag, chamber: ChamberA | None = None
) -> CocycleValue:
    """The dual cocycle value: twisted cocycle of sigma(g) at the dual flag.

    Equals the opposition image of the direct value; ``duality_defect``
    measures the deviation.
    """
    from .forms import sigma_o

    return busemann_o(o, sigma_o(o, g), flag_perp(o, xi), chamber)


def duality_defect(o: Form, g: ScaledMatrix, xi: Flag, chamber: ChamberA | None = None) -> float:
    lhs = dual_busemann(o, g, xi, chamber)
    rhs = iota_a(busemann_o(o, g, xi, chamber))
    return float(np.max(np.abs(lhs.coords - rhs.coords)))


def gromov_product(
    o: Form, xi: Flag, eta: Flag, chamber: ChamberA | None = None
) -> CocycleValue:
    """Pairing of transverse generic flags through the dual flag of the first.

    chi_j = (1/2) log |<v, v'>^2 / (Q(v) Q(v'))| with v the level-j wedge of
    the dual flag of xi and v' that of eta.  No symmetry is asserted.
    """
    d = xi.dim
    chamber = _chamber_or_default(chamber, d)
    if not transverse(xi, eta):
        raise ValueError("flags are not transverse")
    _generic_wedges(o, xi, "first")
    _generic_wedges(o, eta, "second")
    perp = flag_perp(o, xi)
    chi = np.empty(d)
    for j in range(1, d):
        oj = induced_form(o, j)
        v = wedge_coordinates(perp.basis, j)
        w = wedge_coordinates(eta.basis, j)
        cross = oj.pair(v, w)
        chi[j - 1] = 0.5 * np.log(abs(cross * cross) / abs(oj.quad(v) * oj.quad(w)))
    chi[d - 1] = 0.0
    return _value_from_chi(chi, chamber)


def cross_ratio(
    xi1: Flag, xi2: Flag, xi3: Flag, xi4: Flag, chamber: ChamberA | None = None
) -> CocycleValue:
    """Projective vector-valued cross-ratio of four flags.

    chi_j = log |t1(v4) t3(v2) / (t1(v2) t3(v4))| where t_k is the level-j
    annihilator functional of the k-th flag, realized as the determinant
    against its complementary columns; the ratio structure makes every
    choice of representative cancel.
    """
    d = xi1.dim
    chamber = _chamber_or_default(chamber, d)
    for a, b in ((xi1, xi2), (xi1, xi4), (xi2, xi3), (xi3, xi4)):
        if not transverse(a, b):
            raise ValueError("required transversality pair fails")
    chi = np.empty(d)
    for j in range(1, d):
        t1v4 = _annihilator_det(xi1, xi4, j)
        t1v2 = _annihilator_det(xi1, xi2, j)
        t3v2 = _annihilator_det(xi3, xi2, j)
        t3v4 = _annihilator_det(xi3, xi4, j)
        chi[j - 1] = np.log(abs(t1v4 * t3v2) / abs(t1v2 * t3v4))
    chi[d - 1] = 0.0
    return _value_from_chi(chi, chamber)


def _annihilator_det(hyper: Flag, point: Flag, j: int):
    d = hyper.dim
    block = np.concatenate([hyper.subspace(d - j), point.subspace(j)], axis=1)
    return np.linalg.det(block)


@dataclass(frozen=True)
class PhiCocycles:
    """Scalar cocycles obtained by pairing a functional with the twisted cocycle.

    The dual member composes with the chamber opposition; periods on axis
    flags recover the functional evaluated on the Jordan projection.
    """

    o: Form
    phi: np.ndarray
    chamber: ChamberA

    @staticmethod
    def of(o: Form, phi, chamber: ChamberA | None = None) -> "PhiCocycles":
        f = np.asarray(phi, dtype=float)
        f = f - f.mean()
        return PhiCocycles(o, f, _chamber_or_default(chamber, o.dim))

    def value(self, g: ScaledMatrix, xi: Flag) -> float:
        return busemann_o(self.o, g, xi, self.chamber).pair(self.phi)

    def dual_value(self, g: ScaledMatrix, xi: Flag) -> float:
        return iota_a(busemann_o(self.o, g, xi, self.chamber)).pair(self.phi)

    def period(self, g: ScaledMatrix) -> float:
        """phi of the Jordan projection, read in the chamber frame."""
        return float(np.dot(self.phi, jordan(g).in_chamber(self.chamber)))


# ---------------------------------------------------------------------------
# identity suites over seeded random generic data
# ---------------------------------------------------------------------------


def _random_matrix(rng, d: int, field: str = "R", spread: float = 1.0) -> ScaledMatrix:
    if field == "C":
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    else:
        a = rng.standard_normal((d, d))
    m = ScaledMatrix.of(a + spread * np.eye(d))
    if np.linalg.cond(m.entries) > 1e6:
        return _random_matrix(rng, d, field, spread)
    return m


def _random_generic_flag(rng, o: Form) -> Flag:
    from .flags import o_generic as generic_check

    d = o.dim
    while True:
        if o.field_tag == "C":
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        else:
            a = rng.standard_normal((d, d))
        try:
            f = Flag.of(a)
        except ValueError:
            continue
        if generic_check(o, f, degeneracy_rtol=1e-6).generic:
            return f


def _pair_is_generic(o: Form, g: ScaledMatrix, xi: Flag) -> bool:
    return o_generic(o, xi, 1e-6).generic and o_generic(o, xi.translate(g), 1e-6).generic


def identity_suite(o: Form, samples: int = 300, seed: int = 0, chamber: ChamberA | None = None) -> dict:
    """Max deviations of the six structural identities on random generic data.

    Families: cocycle law of the twisted cocycle, duality with the chamber
    opposition, the potential coboundary, the Gromov transformation rule,
    the Gromov/cross-ratio equality, and equivariance of the flag-to-point
    projection.  All inputs are drawn from a seeded generator and resampled
    until generic, so reports are reproducible.
    """
    from .flags import project_to_So

    rng = np.random.default_rng(seed)
    d = o.dim
    chamber = _chamber_or_default(chamber, d)
    dev = {k: 0.0 for k in (
        "cocycle", "duality", "coboundary", "gromov_transformation",
        "cross_ratio_equality", "projection_equivariance",
    )}
    done = 0
    while done < samples:
        g1 = _random_matrix(rng, d, o.field_tag)
        g2 = _random_matrix(rng, d, o.field_tag)
        xi = _random_generic_flag(rng, o)
        eta = _random_generic_flag(rng, o)
        g12 = g1 @ g2
        if not (_pair_is_generic(o, g2, xi) and _pair_is_generic(o, g12, xi)
                and _pair_is_generic(o, g1, xi.translate(g2))):
            continue
        if not (_pair_is_generic(o, g1, eta) and transverse(xi, eta)):
            continue
        done += 1

        lhs = busemann_o(o, g12, xi, chamber)
        rhs = busemann_o(o, g1, xi.translate(g2), chamber).coords + busemann_o(o, g2, xi, chamber).coords
        dev["cocycle"] = max(dev["cocycle"], float(np.max(np.abs(lhs.coords - rhs))))

        dev["duality"] = max(dev["duality"], duality_defect(o, g1, xi, chamber))

        v_move = potential(o, xi.translate(g1), chamber).coords - potential(o, xi, chamber).coords
        beta_diff = busemann_o(o, g1, xi, chamber).coords - busemann_tau(g1, xi, chamber).coords
        dev["coboundary"] = max(dev["coboundary"], float(np.max(np.abs(v_move - beta_diff))))

        if _pair_is_generic(o, g1, xi) and transverse(xi.translate(g1), eta.translate(g1)):
            lhs_g = gromov_product(o, xi.translate(g1), eta.translate(g1), chamber).coords
            rhs_g = (
                gromov_product(o, xi, eta, chamber).coords
                - iota_a(busemann_o(o, g1, xi, chamber)).coords
                - busemann_o(o, g1, eta, chamber).coords
            )
            dev["gromov_transformation"] = max(
                dev["gromov_transformation"], float(np.max(np.abs(lhs_g - rhs_g)))
            )

        gp = gromov_product(o, xi, eta, chamber).coords
        br = cross_ratio(flag_perp(o, eta), flag_perp(o, xi), xi, eta, chamber).coords
        dev["cross_ratio_equality"] = max(
            dev["cross_ratio_equality"], float(np.max(np.abs(gp + 0.5 * br)))
        )

        o_moved = o.translate(np.linalg.inv(g1.entries))
        lhs_p = project_to_So(o_moved, xi)
        moved = xi.translate(g1)
        rhs_raw = g1.entries.conj().T @ project_to_So(o, moved) @ g1.entries
        rhs_p = rhs_raw * (d / np.trace(rhs_raw).real)
        dev["projection_equivariance"] = max(
            dev["projection_equivariance"],
            float(np.max(np.abs(lhs_p - rhs_p)) / np.max(np.abs(lhs_p))),
        )
    return {"samples": done, "seed": seed, "max_deviations": dev}
