"""Free-group words, Schottky builders with certification, limit sampling.

Letters are nonzero integers: i stands for the i-th generator, -i for its
inverse.  The canonical alphabet order is (1, -1, 2, -2, ...); spheres are
enumerated lexicographically in this order, shortest first, and the
enumeration is partitionable by first letter for parallel runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import bulk
from .bulk import BulkContext, CapExceededError, sphere_size
from .flags import Flag, line_hyperplane_distance, o_generic
from .forms import Form
from .numerics import ScaledMatrix, compound, eigen, subspace_from_wedge, wedge_coordinates
from .projections import check_r_eps_loxodromic, is_loxodromic

__all__ = [
    "Word",
    "Representation",
    "SchottkyRejection",
    "enumerate_sphere",
    "sphere_words",
    "enumerate_conjugacy_reps",
    "build_schottky",
    "build_reducible_example",
    "anosov_gap_check",
    "sample_limit_set",
    "CapExceededError",
]

DEFAULT_WORD_CAP = 50_000_000


def reduce_letters(letters) -> tuple[int, ...]:
    out: list[int] = []
    for l in letters:
        if l == 0:
            raise ValueError("letters are nonzero integers")
        if out and out[-1] == -l:
            out.pop()
        else:
            out.append(l)
    return tuple(out)


@dataclass(frozen=True)
class Word:
    """A reduced word; multiplication re-reduces at the seam."""

    letters: tuple[int, ...]

    @staticmethod
    def of(letters) -> "Word":
        return Word(reduce_letters(letters))

    @property
    def length(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word.of(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple(-l for l in reversed(self.letters)))

    def cyclic_reduction(self) -> "Word":
        ls = list(self.letters)
        while len(ls) >= 2 and ls[0] == -ls[-1]:
            ls = ls[1:-1]
        return Word(tuple(ls))

    def minimal_rotation(self) -> "Word":
        """Lexicographically least rotation (alphabet-index order) of the cyclic reduction."""
        core = self.cyclic_reduction().letters
        if not core:
            return Word(())
        keyed = [tuple(bulk.letter_index(l) for l in core[i:] + core[:i]) for i in range(len(core))]
        best = min(range(len(core)), key=lambda i: keyed[i])
        return Word(core[best:] + core[:best])

    def __str__(self) -> str:
        if not self.letters:
            return "e"
        names = "abcdefgh"
        return ".".join(names[abs(l) - 1] + ("'" if l < 0 else "") for l in self.letters)


@dataclass
class Representation:
    """Generator images with inverses, a basepoint form and build metadata.

    Images are stored in the form's standard coordinates (the congruence is
    applied once at build time); flags returned to callers are mapped back
    to ambient coordinates.
    """

    rank: int
    form: Form
    images_std: list[np.ndarray]  # 2k matrices, order (g1, g1^-1, g2, ...)
    image_scales: np.ndarray
    metadata: dict = field(default_factory=dict)
    certificate: dict | None = None
    ambient_basis: np.ndarray | None = None

    @staticmethod
    def of(generators: list[ScaledMatrix], form: Form, metadata: dict | None = None) -> "Representation":
        t = form.standard_basis
        t_inv = np.linalg.inv(t)
        images, scales = [], []
        for g in generators:
            for m in (g, g.inv()):
                std = ScaledMatrix.of(t_inv @ m.entries @ t, m.log_scale)
                images.append(std.entries)
                scales.append(std.log_scale)
        return Representation(
            rank=len(generators),
            form=Form.standard(*form.signature, form.field_tag),
            images_std=images,
            image_scales=np.array(scales),
            metadata=dict(metadata or {}),
            ambient_basis=np.array(t),
        )

    @property
    def dim(self) -> int:
        return self.form.dim

    def letter_image(self, letter: int) -> ScaledMatrix:
        i = bulk.letter_index(letter)
        return ScaledMatrix(self.images_std[i], float(self.image_scales[i]))

    def image(self, word: Word | tuple) -> ScaledMatrix:
        letters = word.letters if isinstance(word, Word) else tuple(word)
        acc = ScaledMatrix.identity(self.dim, self.form.field_tag)
        for l in letters:
            acc = acc @ self.letter_image(l)
        return acc

    def bulk_context(self) -> BulkContext:
        return BulkContext.of(self.images_std, self.form.signature[0])


def sphere_words(k: int, length: int):
    """All reduced words of the given length, canonical order."""
    if length == 0:
        yield Word(())
        return
    alphabet = [bulk.index_letter(i) for i in range(2 * k)]

    def rec(prefix: list[int]):
        if len(prefix) == length:
            yield Word(tuple(prefix))
            return
        for l in alphabet:
            if prefix and l == -prefix[-1]:
                continue
            prefix.append(l)
            yield from rec(prefix)
            prefix.pop()

    yield from rec([])


def enumerate_sphere(rep: Representation, length: int, cap: int = DEFAULT_WORD_CAP,
                     prefix: tuple[int, ...] = ()):
    """Stream (word, image) over the sphere, matrices built incrementally.

    Deterministic order; refuses upfront when the sphere exceeds the cap.
    Passing a reduced ``prefix`` restricts to that subtree, which is how
    parallel traversals partition the sphere.
    """
    n = sphere_size(rep.rank, length)
    if n > cap:
        raise CapExceededError(cap, n)
    if length == 0:
        yield Word(()), ScaledMatrix.identity(rep.dim, rep.form.field_tag)
        return
    prefix = tuple(prefix)
    if reduce_letters(prefix) != prefix or len(prefix) > length:
        raise ValueError("prefix must be a reduced word no longer than the sphere")
    alphabet = [bulk.index_letter(i) for i in range(2 * rep.rank)]

    def rec(stack: list[int], mat: ScaledMatrix):
        if len(stack) == length:
            yield Word(tuple(stack)), mat
            return
        for l in alphabet:
            if stack and l == -stack[-1]:
                continue
            stack.append(l)
            yield from rec(stack, mat @ rep.letter_image(l))
            stack.pop()

    start = ScaledMatrix.identity(rep.dim, rep.form.field_tag)
    for l in prefix:
        start = start @ rep.letter_image(l)
    yield from rec(list(prefix), start)


def enumerate_conjugacy_reps(k: int, length_max: int):
    """One cyclically reduced representative per conjugacy class, length <= max.

    Representatives are the lexicographically minimal rotations; a word and
    its inverse are kept distinct.
    """
    for length in range(1, length_max + 1):
        for w in sphere_words(k, length):
            if w.length < 2:
                yield w
                continue
            if w.letters[0] == -w.letters[-1]:
                continue
            if w.minimal_rotation() == w:
                yield w


@dataclass(frozen=True)
class SchottkyRejection:
    reasons: tuple[str, ...]

    def __bool__(self) -> bool:
        return False


def _fixed_flag_pair(g: ScaledMatrix, tol: float):
    eig = eigen(g)
    if np.min(-np.diff(eig.log_moduli)) <= tol:
        raise ValueError("generator image is not loxodromic")
    vecs = eig.vectors
    if g.field == "R":
        lead = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(g.dim)]
        vecs = np.real(vecs * np.exp(-1j * np.angle(lead))[None, :])
    return Flag.of(vecs), Flag.of(vecs[:, ::-1])


def build_schottky(
    generators: list[ScaledMatrix],
    o: Form,
    power: int = 1,
    metadata: dict | None = None,
    loxodromy_tol: float = 1e-6,
):
    """Certified ping-pong representation from loxodromic generators.

    Images are the given power of the generators.  Certification checks, on
    every exterior-power level: each image's fixed flags are generic for the
    form and pairwise separated across letters, and each image contracts the
    complement of an eps-ball around its repelling hyperplane into an
    eps-ball around its attracting line, with eps one sixth of the smallest
    separation (the slack the ping-pong geometry needs).  Failures produce a
    rejection report naming the pair and level.
    """
    reasons: list[str] = []
    t = o.standard_basis
    t_inv = np.linalg.inv(t)
    std_gens = [ScaledMatrix.of(t_inv @ g.entries @ t, g.log_scale) for g in generators]
    o_std = Form.standard(*o.signature, o.field_tag)
    images = [g.power(power) for g in std_gens]
    k = len(generators)
    d = o.dim

    flags_plus: list[Flag] = []
    flags_minus: list[Flag] = []
    for i, g in enumerate(images):
        if not is_loxodromic(g, loxodromy_tol):
            reasons.append(f"generator {i} image not loxodromic")
            continue
        fp, fm = _fixed_flag_pair(g, loxodromy_tol)
        flags_plus.append(fp)
        flags_minus.append(fm)
        for name, f in (("attractor", fp), ("repellor", fm)):
            if not o_generic(o_std, f).generic:
                reasons.append(f"generator {i} {name} flag not generic for the form")
    if reasons:
        return SchottkyRejection(tuple(reasons))

    # letter fixed data: letter 2i is g_i^power, 2i+1 its inverse
    plus_of = {2 * i: flags_plus[i] for i in range(k)}
    plus_of.update({2 * i + 1: flags_minus[i] for i in range(k)})
    minus_of = {2 * i: flags_minus[i] for i in range(k)}
    minus_of.update({2 * i + 1: flags_plus[i] for i in range(k)})

    sep = np.inf
    for s in range(2 * k):
        for tl in range(2 * k):
            if tl == (s ^ 1):
                continue
            for j in range(1, d):
                line = wedge_coordinates(plus_of[s].basis, j)
                dual = wedge_coordinates(minus_of[tl].basis, d - j)
                theta = _annihilator_covector(dual, d, j)
                dist = line_hyperplane_distance(line, theta)
                if dist < 1e-12:
                    reasons.append(f"letters {s},{tl} share fixed data at level {j}")
                sep = min(sep, dist)
    for i, f in enumerate(flags_plus + flags_minus):
        for j in range(1, d):
            from .forms import induced_form

            oj = induced_form(o_std, j)
            v = wedge_coordinates(f.basis, j)
            sep = min(sep, line_hyperplane_distance(v, v, oj.gram))
    if reasons:
        return SchottkyRejection(tuple(reasons))

    eps = sep / 6.0
    for i, g in enumerate(images):
        if not check_r_eps_loxodromic(g, eps, eps, loxodromy_tol):
            reasons.append(f"generator {i} image fails ({eps:.3g},{eps:.3g})-contraction")
    if reasons:
        return SchottkyRejection(tuple(reasons))

    meta = dict(metadata or {})
    meta.update({"power": power, "kind": meta.get("kind", "schottky")})
    rep = Representation.of([g.power(power) for g in std_gens], o_std, meta)
    rep.certificate = {"r": eps, "eps": eps, "separation": float(sep), "power": power}
    return rep


def _annihilator_covector(dual_wedge: np.ndarray, d: int, j: int) -> np.ndarray:
    from .projections import _hodge_dual

    return _hodge_dual(dual_wedge, d, j)


def sl2_irreducible(a: np.ndarray, n: int) -> np.ndarray:
    """Image of a 2x2 matrix under the dimension-n irreducible (symmetric power)."""
    if n == 1:
        return np.eye(1, dtype=a.dtype)
    from math import comb as binom

    m = n - 1
    out = np.zeros((n, n), dtype=np.float64 if not np.iscomplexobj(a) else np.complex128)
    (p, q), (r, s) = a
    # basis e1^{m-i} e2^i; column i expands (a e1)^{m-i} (a e2)^i
    for i in range(n):
        coeff = np.zeros(n, dtype=out.dtype)
        for t in range(m - i + 1):
            c1 = binom(m - i, t) * p ** (m - i - t) * r**t
            for u in range(i + 1):
                c2 = binom(i, u) * q ** (i - u) * s**u
                coeff[t + u] += c1 * c2
        out[:, i] = coeff
    return out


def build_reducible_example(
    p: int,
    q: int,
    sl2_generators: list[np.ndarray],
    power: int = 1,
    metadata: dict | None = None,
):
    """Block representation: dim-p and dim-q irreducibles of an SL2 pair.

    Needs p and q of different parity so the two weight ladders interleave;
    the block splitting is orthogonal for the standard form, definite on
    each factor, which forces every limit flag to be generic.  The result is
    flagged non-Zariski-dense.  Certification runs as for any Schottky input.
    """
    if (p - q) % 2 == 0:
        raise ValueError("block construction needs p, q of different parity")
    d = p + q
    gens = []
    for a in sl2_generators:
        a = np.asarray(a, dtype=np.float64)
        if abs(np.linalg.det(a) - 1.0) > 1e-10:
            raise ValueError("SL2 generators must have determinant one")
        if abs(np.trace(a)) <= 2.0:
            raise ValueError("SL2 generator is not loxodromic (|trace| <= 2)")
        block = np.zeros((d, d))
        block[:p, :p] = sl2_irreducible(a, p)
        block[p:, p:] = sl2_irreducible(a, q)
        gens.append(ScaledMatrix.of(block))
    o = Form.standard(p, q)
    meta = dict(metadata or {})
    meta.update({"kind": "reducible-block", "zariski_dense": False})
    return build_schottky(gens, o, power=power, metadata=meta)


def anosov_gap_check(rep: Representation, length_max: int, threads: int = 1,
                     cap: int = DEFAULT_WORD_CAP, chunk: int = bulk.DEFAULT_CHUNK):
    """Fit the linear lower envelope of the per-shell minimal simple-root gap.

    Returns (c, c_prime, shell_minima): the least-squares line through the
    per-shell minima.  A positive fitted slope is evidence consistent with
    the word-length gap bound; finite length can only ever test a necessary
    condition, which the CLI report states explicitly.
    """
    ctx = rep.bulk_context()
    [col] = bulk.run_bulk(ctx, length_max, [(ShellMinGapCollector, {})],
                          threads=threads, chunk=chunk, cap=cap)
    shells = sorted(col.minima)
    ys = np.array([col.minima[s] for s in shells], dtype=float)
    xs = np.array(shells, dtype=float)
    a = np.vstack([xs, np.ones_like(xs)]).T
    slope, intercept = np.linalg.lstsq(a, ys, rcond=None)[0]
    return float(slope), float(-intercept), {s: float(col.minima[s]) for s in shells}


class ShellMinGapCollector:
    """Per-shell minimum of the smallest simple-root value of the Cartan vector."""

    def __init__(self):
        self.minima: dict[int, float] = {}

    def update(self, shell):
        m = float(np.min(shell.min_root_gap()))
        cur = self.minima.get(shell.length)
        self.minima[shell.length] = m if cur is None else min(cur, m)

    def merge(self, other: "ShellMinGapCollector"):
        for s, v in other.minima.items():
            cur = self.minima.get(s)
            self.minima[s] = v if cur is None else min(cur, v)


def flag_from_compound_tops(vectors: list[np.ndarray], d: int) -> Flag:
    """Assemble a full flag from per-level top wedge vectors."""
    cols = np.zeros((d, d), dtype=np.float64)
    q_prev = np.zeros((d, 0))
    for j in range(1, d):
        sub = subspace_from_wedge(vectors[j - 1], d, j)
        resid = sub - q_prev @ (q_prev.conj().T @ sub)
        u, s, _ = np.linalg.svd(resid, full_matrices=False)
        cols[:, j - 1] = np.real(u[:, 0]) if not np.iscomplexobj(u) else u[:, 0]
        q_prev, _ = np.linalg.qr(cols[:, :j])
    resid = np.eye(d) - q_prev @ q_prev.conj().T
    u, _, _ = np.linalg.svd(resid)
    cols[:, d - 1] = u[:, 0]
    return Flag.of(cols)


def singular_flag(rep: Representation, word: Word) -> Flag:
    """Cartan attractor of the word's image, read off exterior powers."""
    d = rep.dim
    comps = _word_compounds(rep, word)
    tops = []
    for j in range(1, d):
        m = comps[j - 1]
        u, _, _ = np.linalg.svd(m)
        tops.append(u[:, 0])
    return flag_from_compound_tops(tops, d)


def attracting_flag(rep: Representation, word: Word) -> Flag:
    """Attracting fixed flag of the word's image, read off exterior powers."""
    d = rep.dim
    comps = _word_compounds(rep, word)
    tops = []
    for j in range(1, d):
        vals, vecs = np.linalg.eig(comps[j - 1])
        top = int(np.argmax(np.abs(vals)))
        v = vecs[:, top]
        lead = v[int(np.argmax(np.abs(v)))]
        tops.append(np.real(v * np.exp(-1j * np.angle(lead))))
    return flag_from_compound_tops(tops, d)


def _word_compounds(rep: Representation, word: Word) -> list[np.ndarray]:
    d = rep.dim
    out = []
    for j in range(1, d):
        acc = ScaledMatrix.identity(int(round(_comb(d, j))), rep.form.field_tag)
        for l in word.letters:
            acc = acc @ compound(rep.letter_image(l), j).as_scaled()
        out.append(acc.entries)
    return out


def _comb(n, r):
    from math import comb as c

    return c(n, r)


def sample_limit_set(rep: Representation, length: int, count: int, loxodromy_tol: float = 1e-6):
    """Singular flags of evenly spaced words at the given length.

    Returns (flags, signatures, reports): each flag classified by its orbit
    signature; non-generic samples are reported, never silently dropped.
    Attracting fixed flags of the cyclically reduced samples serve as a
    cross-check that the sampled flags approximate the limit set.
    """
    n = sphere_size(rep.rank, length)
    stride = max(1, n // max(1, count))
    flags, signatures, reports = [], [], []
    o = rep.form
    for i, w in enumerate(sphere_words(rep.rank, length)):
        if i % stride != 0 or len(flags) >= count:
            continue
        f = singular_flag(rep, w)
        rep_g = o_generic(o, f)
        if not rep_g.generic:
            reports.append((w, f"non-generic sample at level {rep_g.failed_level}"))
            continue
        flags.append(f)
        signatures.append(rep_g.signature)
    return flags, signatures, reports


# ---------------------------------------------------------------------------
# reference construction recipes
# ---------------------------------------------------------------------------


def sl2_schottky_pair(spread: float = 1.2, angle: float = 0.9) -> list[np.ndarray]:
    """A hyperbolic SL2 pair with crossed axes: diag boost and its rotation."""
    boost = np.diag([np.exp(spread), np.exp(-spread)])
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return [boost, rot @ boost @ rot.T]


def reducible_rep(p: int = 2, q: int = 1, spread: float = 1.2, angle: float = 0.9,
                  power: int = 3, metadata: dict | None = None):
    """Block Schottky pair: the single-orbit reference representation."""
    meta = dict(metadata or {})
    meta.setdefault("recipe", f"reducible-{p}{q}")
    return build_reducible_example(p, q, sl2_schottky_pair(spread, angle), power, meta)


def two_orbit_rep(exponents=(1.3, 0.0, -1.3), exponents2=(1.45, 0.1, -1.55),
                  power: int = 5, boost: float = 0.8, rot: float = 1.1,
                  metadata: dict | None = None):
    """Diagonalizable pair whose fixed flags meet two open orbits.

    Both generators have coordinate-type attracting flags of signature
    (+,+,-) and repelling flags of signature (-,+,+); conjugating the second
    by an isometry of the form (a boost in the (1,3)-plane composed with a
    rotation in the (1,2)-plane) keeps the signs while separating the fixed
    flags, so the limit set meets exactly these two orbits.
    """
    from scipy.linalg import expm

    o = Form.standard(2, 1)
    g1 = ScaledMatrix.of(np.diag(np.exp(np.asarray(exponents, dtype=float))))
    e_boost = np.array([[0, 0, 1.0], [0, 0, 0], [1, 0, 0]])
    e_rot = np.array([[0, -1.0, 0], [1, 0, 0], [0, 0, 0]])
    h = expm(boost * e_boost + rot * e_rot)
    core = np.diag(np.exp(np.asarray(exponents2, dtype=float)))
    g2 = ScaledMatrix.of(h @ core @ np.linalg.inv(h))
    meta = dict(metadata or {})
    meta.setdefault("recipe", "two-orbit-diagonal")
    return build_schottky([g1, g2], o, power=power, metadata=meta)


def single_orbit_rep(exponents=(1.3, -1.3, 0.0), exponents2=(1.45, -1.55, 0.1),
                     power: int = 5, boost: float = 0.8, rot: float = 1.1,
                     metadata: dict | None = None):
    """Irreducible-looking pair with all fixed flags in one open orbit.

    The eigenvalue assigned to the negative line sits in the middle of the
    spectrum, so attracting and repelling flags alike carry the palindromic
    signature (+,-,+); the limit set then meets a single open orbit while
    the group looks Zariski dense (density is assumed, never verified).
    """
    from scipy.linalg import expm

    o = Form.standard(2, 1)
    g1 = ScaledMatrix.of(np.diag(np.exp(np.asarray(exponents, dtype=float))))
    e_boost = np.array([[0, 0, 1.0], [0, 0, 0], [1, 0, 0]])
    e_rot = np.array([[0, -1.0, 0], [1, 0, 0], [0, 0, 0]])
    h = expm(boost * e_boost + rot * e_rot)
    core = np.diag(np.exp(np.asarray(exponents2, dtype=float)))
    g2 = ScaledMatrix.of(h @ core @ np.linalg.inv(h))
    meta = dict(metadata or {})
    meta.setdefault("recipe", "single-orbit-diagonal")
    return build_schottky([g1, g2], o, power=power, metadata=meta)


def rotation_control_rep(seed: int = 5, metadata: dict | None = None) -> Representation:
    """Compact control group: generators are sampled rotations (never Anosov)."""
    rng = np.random.default_rng(seed)
    gens = []
    for _ in range(2):
        a = rng.standard_normal((3, 3))
        q, _ = np.linalg.qr(a)
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        gens.append(ScaledMatrix.of(q))
    meta = dict(metadata or {})
    meta.update({"recipe": "rotation-control", "seed": seed, "kind": "control"})
    return Representation.of(gens, Form.standard(2, 1), meta)


RECIPES = {
    "reducible-21": lambda params: reducible_rep(**params),
    "two-orbit": lambda params: two_orbit_rep(**params),
    "single-orbit": lambda params: single_orbit_rep(**params),
    "rotation-control": lambda params: rotation_control_rep(**params),
}


def representation_from_config(cfg: dict):
    """Build (and certify, when applicable) a representation from a config dict.

    Either ``recipe`` + ``params`` or explicit ``generators`` (list of d x d
    row-major matrices) with ``form`` and ``power`` must be supplied.
    """
    if "recipe" in cfg:
        name = cfg["recipe"]
        if name not in RECIPES:
            raise ValueError(f"unknown recipe {name!r}; known: {sorted(RECIPES)}")
        return RECIPES[name](dict(cfg.get("params", {})))
    if "generators" not in cfg:
        raise ValueError("config needs either 'recipe' or 'generators'")
    gens = [ScaledMatrix.of(np.array(g, dtype=np.float64)) for g in cfg["generators"]]
    form = Form.from_json(json.dumps(cfg["form"])) if "form" in cfg else Form.standard(2, 1)
    power = int(cfg.get("power", 1))
    return build_schottky(gens, form, power=power, metadata={"recipe": "explicit"})

