import numpy as np
import pytest

from pqcartan import bulk
from pqcartan.bulk import ShellData, ball_size, run_bulk, sphere_size, word_rank
from pqcartan.freegroup import enumerate_sphere, reducible_rep, sphere_words, two_orbit_rep
from pqcartan.pq_cartan import pq_project
from pqcartan.projections import cartan, jordan


class GrabAll:
    """Test collector: concatenates selected per-word data in canonical order."""

    def __init__(self, length_max):
        self.length_max = length_max
        self.rows = []

    def update(self, shell: ShellData):
        if shell.length > self.length_max:
            return
        bo, signs, gaps = shell.bo_data()
        lam, lam_ok = shell.jordan_coords()
        self.rows.append(
            (
                shell.length,
                shell.ranks(),
                shell.inverse_ranks(),
                shell.cartan_coords(),
                bo,
                shell.bo_valid_mask(),
                lam,
                shell.attractor_signs(),
            )
        )

    def merge(self, other):
        self.rows.extend(other.rows)


def collect(rep, length):
    ctx = rep.bulk_context()
    [col] = run_bulk(ctx, length, [(GrabAll, {"length_max": length})])
    by_shell = {}
    for row in col.rows:
        by_shell.setdefault(row[0], []).append(row)
    out = {}
    for length_, rows in by_shell.items():
        ranks = np.concatenate([r[1] for r in rows])
        order = np.argsort(ranks)
        out[length_] = {
            "ranks": ranks[order],
            "inv_ranks": np.concatenate([r[2] for r in rows])[order],
            "at": np.concatenate([r[3] for r in rows])[order],
            "bo": np.concatenate([r[4] for r in rows])[order],
            "valid": np.concatenate([r[5] for r in rows])[order],
            "lam": np.concatenate([r[6] for r in rows])[order],
            "usigns": np.concatenate([r[7] for r in rows])[order],
        }
    return out


def test_sizes():
    assert sphere_size(2, 0) == 1
    assert sphere_size(2, 3) == 36
    assert ball_size(2, 3) == 1 + 4 + 12 + 36


def test_ranks_and_inverses():
    words = list(sphere_words(2, 4))
    for i, w in enumerate(words):
        assert word_rank(w.letters, 2) == i
        inv_rank = word_rank(w.inverse().letters, 2)
        assert words[inv_rank] == w.inverse()


def moderate_reps():
    """Uncertified, moderate-spread versions: dense reference stays accurate."""
    from pqcartan.forms import Form
    from pqcartan.freegroup import Representation, sl2_irreducible, sl2_schottky_pair
    from pqcartan.numerics import ScaledMatrix

    gens = []
    for a in sl2_schottky_pair():
        block = np.zeros((3, 3))
        block[:2, :2] = sl2_irreducible(a, 2)
        block[2, 2] = 1.0
        gens.append(ScaledMatrix.of(block))
    red = Representation.of(gens, Form.standard(2, 1))
    two = two_orbit_rep(power=1)
    if not isinstance(two, Representation):
        two = Representation.of(
            [ScaledMatrix.of(np.diag(np.exp([1.3, 0.0, -1.3])))], Form.standard(2, 1)
        )
    return [red, two]


@pytest.mark.parametrize("idx", [0, 1])
def test_bulk_matches_wordwise(idx):
    rep = moderate_reps()[idx]
    length = 4
    data = collect(rep, length)
    o = rep.form
    for w, mat in enumerate_sphere(rep, length):
        if w.length == 0:
            continue
        shell = data[w.length]
        i = word_rank(w.letters, rep.rank)
        assert shell["ranks"][i] == i
        at_ref = cartan(mat).coords
        assert np.max(np.abs(shell["at"][i] - at_ref)) < 1e-6
        lam_ref = jordan(mat).coords
        assert np.max(np.abs(shell["lam"][i] - lam_ref)) < 1e-6
        r = pq_project(o, mat)
        assert shell["valid"][i]
        assert np.max(np.abs(shell["bo"][i] - r.b_o.coords)) < 1e-6


def test_bulk_long_words_match_high_precision():
    import mpmath

    mpmath.mp.dps = 80
    rep = reducible_rep(power=4)
    length = 8
    data = collect_at = None
    ctx = rep.bulk_context()
    [col] = run_bulk(ctx, length, [(GrabAll, {"length_max": length})])
    rows = [r for r in col.rows if r[0] == length]
    ranks = np.concatenate([r[1] for r in rows])
    order = np.argsort(ranks)
    at = np.concatenate([r[3] for r in rows])[order]
    bo = np.concatenate([r[4] for r in rows])[order]
    lam = np.concatenate([r[6] for r in rows])[order]
    words = list(sphere_words(2, length))
    stride = len(words) // 5
    jmat = mpmath.diag([1, 1, -1])
    for i in range(0, len(words), stride):
        w = words[i]
        exact = mpmath.eye(3)
        for l in w.letters:
            exact = exact * mpmath.matrix(rep.letter_image(l).true_matrix().tolist())
        # Cartan reference: log singular values (eigenvalues of M^T M)
        sv = mpmath.mp.eig(exact.T * exact, left=False, right=False)
        logs = sorted([float(mpmath.log(abs(v))) / 2 for v in sv], reverse=True)
        at_ref = np.array(logs) - np.mean(logs)
        assert np.max(np.abs(at[i] - at_ref)) < 1e-8
        # twisted square reference
        s = jmat * exact.T * jmat * exact
        vals, vecs = mpmath.mp.eig(s)
        idx2 = sorted(range(3), key=lambda t: -abs(vals[t]))
        halves = np.array([float(mpmath.log(abs(vals[t]))) for t in idx2]) / 2
        halves -= halves.mean()
        signs = []
        for t in idx2:
            v = np.array([complex(vecs[r, t]) for r in range(3)])
            v = np.real(v / np.exp(1j * np.angle(v[np.argmax(np.abs(v))])))
            signs.append(1 if v[0] ** 2 + v[1] ** 2 - v[2] ** 2 > 0 else -1)
        slots = np.empty(3)
        pos = [h for h, s_ in zip(halves, signs) if s_ > 0]
        neg = [h for h, s_ in zip(halves, signs) if s_ < 0]
        slots[: len(pos)] = pos
        slots[len(pos) :] = neg
        assert np.max(np.abs(bo[i] - slots)) < 1e-8
        # Jordan reference
        mv = mpmath.mp.eig(exact, left=False, right=False)
        jl = sorted([float(mpmath.log(abs(v))) for v in mv], reverse=True)
        lam_ref = np.array(jl) - np.mean(jl)
        assert np.max(np.abs(lam[i] - lam_ref)) < 1e-8


def test_bulk_attractor_signs_match_flags():
    from pqcartan.flags import o_generic
    from pqcartan.freegroup import singular_flag

    rep = two_orbit_rep()
    data = collect(rep, 3)
    for w in sphere_words(2, 3):
        i = word_rank(w.letters, 2)
        sig = o_generic(rep.form, singular_flag(rep, w)).signature.signs
        assert tuple(int(s) for s in data[3]["usigns"][i]) == sig


def test_thread_partitions_identical():
    rep = reducible_rep(power=4)
    seq = collect(rep, 4)
    ctx = rep.bulk_context()
    [col] = run_bulk(ctx, 4, [(GrabAll, {"length_max": 4})], threads=4)
    by_shell = {}
    for row in col.rows:
        by_shell.setdefault(row[0], []).append(row)
    for length_, rows in by_shell.items():
        ranks = np.concatenate([r[1] for r in rows])
        order = np.argsort(ranks)
        bo = np.concatenate([r[4] for r in rows])[order]
        assert bo.tobytes() == seq[length_]["bo"].tobytes()


def test_cap_refusal():
    rep = reducible_rep(power=4)
    with pytest.raises(bulk.CapExceededError):
        run_bulk(rep.bulk_context(), 10, [(GrabAll, {"length_max": 10})], cap=100)


def test_chunking_does_not_change_results():
    rep = reducible_rep(power=4)
    ctx = rep.bulk_context()
    [a] = run_bulk(ctx, 4, [(GrabAll, {"length_max": 4})], chunk=7)
    [b] = run_bulk(ctx, 4, [(GrabAll, {"length_max": 4})], chunk=100000)
    bo_a = np.concatenate([r[4] for r in a.rows if r[0] == 4])
    bo_b = np.concatenate([r[4] for r in b.rows if r[0] == 4])
    assert bo_a.tobytes() == bo_b.tobytes()
