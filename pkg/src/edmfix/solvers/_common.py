"""Data types and building blocks shared by the single-entry solvers."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import (
    DEFAULT_TOL,
    _check_index_set,
    _decide,
    _is_good,
    check_symmetric,
    classify_windows,
    embedding_dimension,
    full_rank_factor,
    kappa,
    kappa_dagger,
    project_block,
)
from ..exceptions import (
    BlockNotGoodError,
    EDMError,
    HardCaseNeeded,
    NoCorruptionFound,
    SolverError,
)
from ..facial import exposing_from_gram, facial_from_exposing, sum_exposing

__all__ = [
    "Method",
    "NoisyInstance",
    "Correction",
    "SolveReport",
    "ValidationResult",
    "split_indices",
    "complete_from_faces",
    "locate_in_small_block",
    "locate_from_config",
    "trilaterate",
    "refine_value",
    "validate_solution",
]


class Method(enum.Enum):
    BIEV = "biev"
    MBFV = "mbfv"
    SBGT = "sbgt"
    HARD = "hard"


@dataclass
class NoisyInstance:
    """A distance matrix with (at most) one corrupted off-diagonal entry.

    Parameters
    ----------
    D : ndarray of shape (n, n)
        Observed symmetric hollow matrix.
    d : int
        Embedding dimension of the uncorrupted matrix.
    truth : tuple (i, j, alpha), optional
        Planted corruption with 0-based ``i < j``: ``D[i, j] = D0[i, j] + alpha``.
    seed : int, optional
        Generator seed, kept for provenance only.
    info : dict, optional
        Free-form generator metadata (for example the indices placed on a flat).
    """

    D: np.ndarray
    d: int
    truth: Optional[tuple] = None
    seed: Optional[int] = None
    info: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        self.D = check_symmetric(self.D)
        if np.any(np.diag(self.D) != 0):
            raise EDMError("D must be hollow")
        if int(self.d) < 1:
            raise EDMError("embedding dimension must be positive")
        self.d = int(self.d)
        if self.truth is not None:
            i, j, a = self.truth
            i, j = int(i), int(j)
            if not 0 <= i < j < self.n:
                raise EDMError("truth indices must satisfy 0 <= i < j < n")
            if a == 0:
                raise EDMError("planted noise must be nonzero")
            self.truth = (i, j, float(a))

    @property
    def n(self):
        return self.D.shape[0]

    def clean_matrix(self):
        """Uncorrupted matrix implied by ``truth``."""
        if self.truth is None:
            raise EDMError("instance has no recorded truth")
        i, j, a = self.truth
        D0 = self.D.copy()
        D0[i, j] -= a
        D0[j, i] -= a
        return D0


@dataclass(frozen=True)
class Correction:
    """One single-entry fix: ``D[i, j]`` should be ``corrected_value``.

    Indices are 0-based with ``i < j``. ``interval`` is set instead of a
    point value when a whole range of values keeps the matrix valid.
    """

    i: int
    j: int
    alpha_hat: float
    corrected_value: float
    interval: Optional[tuple] = None

    def to_dict(self, one_based=True):
        off = 1 if one_based else 0
        out = {
            "i": self.i + off,
            "j": self.j + off,
            "alpha_hat": self.alpha_hat,
            "corrected_value": self.corrected_value,
        }
        if self.interval is not None:
            out["interval"] = list(self.interval)
        return out


class SolveReport:
    """Outcome of one solve.

    Attributes
    ----------
    correction : Correction
    rel_error : float or None
        ``||recovered - D0||_F / ||D0||_F`` when the truth is known.
    elapsed : float
        Seconds spent in the solver.
    method : Method
    diagnostics : dict
        Solver trace, block classifications and, with truth, ``pair_correct``
        and ``alpha_rel_error``.
    """

    def __init__(self, correction, observed, truth, elapsed, method, diagnostics=None):
        self.correction = correction
        self._observed = observed
        self._truth = truth
        self._rel_error = None
        self.elapsed = elapsed
        self.method = method
        self.diagnostics = dict(diagnostics or {})
        self._recovered = None

    @property
    def recovered(self):
        """Observed matrix with the corrected entry put back (built on first access)."""
        if self._recovered is None:
            R = np.array(self._observed, dtype=float)
            c = self.correction
            R[c.i, c.j] = R[c.j, c.i] = c.corrected_value
            self._recovered = R
        return self._recovered

    @property
    def rel_error(self):
        if self._truth is None:
            return None
        if self._rel_error is None:
            self._rel_error = _frobenius_rel_error(self._observed, self._truth, self.correction)
        return self._rel_error

    @property
    def alpha_rel_error(self):
        return self.diagnostics.get("alpha_rel_error")

    def to_dict(self, one_based=True):
        out = self.correction.to_dict(one_based)
        out.update(
            method=self.method.value,
            time_s=self.elapsed,
            rel_error=self.rel_error,
        )
        return out

    def __repr__(self):
        return (
            f"SolveReport(correction={self.correction!r}, rel_error={self.rel_error!r}, "
            f"elapsed={self.elapsed:.4g}, method={self.method})"
        )


@dataclass
class ValidationResult:
    checks: dict
    messages: list

    @property
    def passed(self):
        return all(self.checks.values())


def _make_correction(D, i, j, value):
    i, j = (int(i), int(j)) if i < j else (int(j), int(i))
    return Correction(i=i, j=j, alpha_hat=float(D[i, j] - value), corrected_value=float(value))


def _frobenius_rel_error(D, truth, correction):
    """``||recovered - D0||_F / ||D0||_F`` touching only the entries that differ."""
    ti, tj, ta = truth
    i, j = correction.i, correction.j
    sq = float(np.einsum("ij,ij->", D, D))
    sq += 2.0 * ((D[ti, tj] - ta) ** 2 - D[ti, tj] ** 2)
    if (ti, tj) == (i, j):
        num = 2.0 * (correction.corrected_value - (D[ti, tj] - ta)) ** 2
    else:
        num = 2.0 * ta**2 + 2.0 * (correction.corrected_value - D[i, j]) ** 2
    return float(np.sqrt(num / max(sq, np.finfo(float).tiny)))


def build_report(inst, correction, method, elapsed, diagnostics=None):
    """Assemble a :class:`SolveReport` and fill the error fields when truth is known."""
    diag = dict(diagnostics or {})
    if inst.truth is not None:
        ti, tj, ta = inst.truth
        diag["pair_correct"] = (ti, tj) == (correction.i, correction.j)
        diag["alpha_rel_error"] = float(abs(correction.alpha_hat - ta) / abs(ta))
    return SolveReport(correction, inst.D, inst.truth, elapsed, method, diag)


def split_indices(n, d):
    """Two overlapping halves of ``range(n)`` (0-based, inclusive ranges).

    Raises
    ------
    EDMError
        When ``n < 2d + 4``; the caller should switch to small-block search.
    """
    if n < 2 * d + 4:
        raise EDMError(f"n={n} is below the bisection cutoff 2d+4={2 * d + 4}")
    hi = -(-(n + d + 2) // 2)
    lo = (n - d - 2) // 2 - 1
    return np.arange(0, hi), np.arange(lo, n)


def _svec_rows(X):
    """Rows ``sqrt2 * svec(x x^T)``-style for ``<R, x x^T>`` with ``R`` symmetric."""
    d = X.shape[1]
    iu = np.triu_indices(d)
    w = np.where(iu[0] == iu[1], 1.0, 2.0)
    return X[:, iu[0]] * X[:, iu[1]] * w, iu


def _least_squares_gram(V, D, blocks, d, tol):
    """Solve ``<R, (v_a - v_b)(v_a - v_b)^T> = D_ab`` over all in-block pairs."""
    t = d * (d + 1) // 2
    AtA = np.zeros((t, t))
    Atb = np.zeros(t)
    iu = None
    for alpha in blocks:
        a, b = np.triu_indices(alpha.size, 1)
        for lo in range(0, a.size, 200_000):
            ra, rb = alpha[a[lo : lo + 200_000]], alpha[b[lo : lo + 200_000]]
            A, iu = _svec_rows(V[ra] - V[rb])
            AtA += A.T @ A
            Atb += A.T @ D[ra, rb]
    r = np.linalg.solve(AtA, Atb)
    R = np.zeros((d, d))
    R[iu] = r
    R = R + R.T - np.diag(np.diag(R))
    lam, U = np.linalg.eigh(R)
    decision = _decide(lam, tol)
    if not decision.is_psd:
        raise BlockNotGoodError("least-squares Gram core is not PSD")
    return U * np.sqrt(np.clip(lam, 0.0, None))


def _centered_rank_ok(X, d, tol):
    Xc = X - X.mean(axis=0, keepdims=True)
    s = np.linalg.svd(Xc, compute_uv=False)
    return s.size >= d and s[d - 1] > tol.threshold(s[0]) * X.shape[0]


def _direct_q(V, D, alpha, d, tol):
    W, _ = full_rank_factor(kappa_dagger(project_block(D, alpha)), d, tol)
    V1 = V[alpha]
    if not _centered_rank_ok(V1, d, tol):
        raise EDMError("centered anchor rows of V are rank deficient")
    JV1 = V1 - V1.mean(axis=0, keepdims=True)
    Q = np.linalg.lstsq(JV1, W, rcond=None)[0]
    return V @ Q


def complete_config(D, blocks, d, strategy="directq", tol=DEFAULT_TOL):
    """Configuration realizing every in-block distance of ``D``.

    See :func:`complete_from_faces`; this returns points instead of distances.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    blocks = [_check_index_set(b, n) for b in blocks]
    covered = np.zeros(n, dtype=bool)
    for b in blocks:
        covered[b] = True
    if not covered.all():
        raise EDMError("blocks must cover every index")
    exposers = []
    for b in blocks:
        exposers.append((b, exposing_from_gram(kappa_dagger(project_block(D, b)), d, tol)))
    Z = sum_exposing(exposers, n)
    V = facial_from_exposing(Z, tol, dim=d)
    if strategy == "directq":
        last = None
        for b in sorted(blocks, key=len, reverse=True):
            try:
                return _direct_q(V, D, b, d, tol)
            except EDMError as exc:
                last = exc
        raise SolverError(f"no block gives a full-rank anchor: {last}")
    if strategy in ("lsq", "leastsquares"):
        return V @ _least_squares_gram(V, D, blocks, d, tol)
    raise ValueError(f"unknown strategy {strategy!r}")


def complete_from_faces(D, blocks, d, strategy="directq", tol=DEFAULT_TOL):
    """Rank-``d`` EDM agreeing with ``D`` on every pair inside some block.

    Parameters
    ----------
    D : ndarray of shape (n, n)
        Entries outside the blocks are ignored.
    blocks : list of sequences of int
        Good blocks covering ``range(n)``.
    strategy : {"directq", "lsq"}
        ``"directq"`` factors one block's Gram matrix and solves for the
        ``d x d`` transform ``Q``; ``"lsq"`` fits the ``d x d`` Gram core to all
        in-block distances.

    Returns
    -------
    ndarray of shape (n, n)
    """
    P = complete_config(D, blocks, d, strategy, tol)
    return kappa(P @ P.T)


def _predicted_rows(Pc, s, rows):
    return s[rows][:, None] + s[None, :] - 2.0 * (Pc[rows] @ Pc.T)


def locate_from_config(D, P, tol=DEFAULT_TOL, rng=None):
    """Find the single entry where ``D`` disagrees with the EDM of ``P``.

    Uses row-sum residuals to nominate the pair and confirms it on the two
    full rows plus a random probe; falls back to a chunked dense comparison.

    Returns
    -------
    (i, j, value) with ``i < j`` and ``value`` the entry predicted by ``P``.

    Raises
    ------
    NoCorruptionFound
        Every entry agrees.
    SolverError
        More than one pair disagrees.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    Pc = P - P.mean(axis=0, keepdims=True)
    s = np.einsum("ij,ij->i", Pc, Pc)
    thr = tol.diff_threshold(D)
    rng = np.random.default_rng(0) if rng is None else rng
    x = rng.standard_normal(n)
    # One pass over D gives both the row sums and the probe product.
    Dy = D @ np.column_stack([np.ones(n), x])
    r = Dy[:, 0] - (n * s + s.sum())
    order = np.argsort(-np.abs(r))
    if n >= 2 and abs(r[order[1]]) > thr:
        a, b = sorted(int(x) for x in order[:2])
        rows = _predicted_rows(Pc, s, np.array([a, b]))
        diff = D[[a, b]] - rows
        bad_a = np.flatnonzero(np.abs(diff[0]) > thr)
        bad_b = np.flatnonzero(np.abs(diff[1]) > thr)
        if list(bad_a) == [b] and list(bad_b) == [a]:
            Kx = s * x.sum() + s.dot(x) - 2.0 * (Pc @ (Pc.T @ x))
            resid = Dy[:, 1] - Kx
            alpha = diff[0, b]
            resid[a] -= alpha * x[b]
            resid[b] -= alpha * x[a]
            if np.max(np.abs(resid)) <= thr * np.abs(x).sum():
                return a, b, float(rows[0, b])
    return _dense_scan(D, Pc, s, thr)


def _dense_scan(D, Pc, s, thr):
    n = D.shape[0]
    found = []
    step = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, n, step):
        rows = np.arange(lo, min(n, lo + step))
        diff = np.abs(D[rows] - _predicted_rows(Pc, s, rows))
        ri, cj = np.nonzero(diff > thr)
        for a, b in zip(rows[ri], cj):
            if a < b:
                found.append((int(a), int(b)))
        if len(found) > 1:
            break
    if not found:
        raise NoCorruptionFound("completion reproduces every entry")
    if len(found) > 1:
        # A unique completion would differ in one entry only; the blocks are not rigid.
        raise HardCaseNeeded(f"completion disagrees with D in more than one entry: {found[:5]}")
    a, b = found[0]
    return a, b, float(s[a] + s[b] - 2.0 * Pc[a].dot(Pc[b]))


def trilaterate(D, anchor, targets, d, tol=DEFAULT_TOL):
    """Coordinates of ``targets`` from their distances to a rank-``d`` anchor.

    The anchor points are placed by factoring their Gram matrix; each target
    is then solved by linear least squares against all anchor distances.

    Returns
    -------
    X_anchor : ndarray of shape (len(anchor), d)
    X_targets : ndarray of shape (len(targets), d)
    """
    D = np.asarray(D, dtype=float)
    anchor = np.asarray(anchor, dtype=int)
    targets = np.asarray(targets, dtype=int)
    X, _ = full_rank_factor(kappa_dagger(D[np.ix_(anchor, anchor)]), d, tol)
    X = X - X.mean(axis=0, keepdims=True)
    sx = np.einsum("ij,ij->i", X, X)
    B = D[np.ix_(targets, anchor)]
    B = B - B.mean(axis=1, keepdims=True) - (sx - sx.mean())[None, :]
    # -2 X x_t = b_t for every target at once.
    Y = np.linalg.lstsq(-2.0 * X, B.T, rcond=None)[0].T
    return X, Y


def _anchor_conditioning(D, alpha, d, tol):
    lam = np.linalg.eigvalsh(kappa_dagger(project_block(D, alpha)))
    decision = _decide(lam, tol)
    if not _is_good(decision, d):
        return np.inf
    top = lam[-d:]
    return float(top[-1] / top[0])


def greedy_anchor(D, candidates, d, tol=DEFAULT_TOL, size=None):
    """Pick points from ``candidates`` that raise the affine rank until it reaches ``d``.

    Returns ``None`` if the candidates span fewer than ``d`` dimensions.
    Extra points (up to ``size``) are appended afterwards.
    """
    chosen = []
    for k in candidates:
        trial = chosen + [int(k)]
        if len(trial) == 1:
            chosen = trial
            continue
        G = kappa_dagger(project_block(D, trial))
        decision = embedding_dimension(G, tol)
        if decision.is_psd and decision.numeric_rank == len(trial) - 1:
            chosen = trial
            if len(chosen) == d + 1:
                break
    if len(chosen) < d + 1:
        return None
    if size is not None:
        for k in candidates:
            if len(chosen) >= size:
                break
            if int(k) not in chosen:
                chosen.append(int(k))
    return np.array(chosen)


def choose_clean_anchor(D, exclude, d, tol=DEFAULT_TOL, n_trials=8, rng=None, full_limit=400):
    """Best conditioned Good block of clean points avoiding ``exclude``.

    Candidates are a few blocks of ``2d + 2`` clean points and, for small
    instances, the set of all clean points.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    clean = np.setdiff1d(np.arange(n), np.asarray(list(exclude), dtype=int))
    if clean.size < d + 1:
        raise SolverError("not enough clean points for an anchor")
    size = min(clean.size, 2 * d + 2)
    rng = np.random.default_rng(12345) if rng is None else rng
    best, best_cond = None, np.inf
    trials = [clean[:size]]
    for _ in range(n_trials - 1):
        if clean.size > size:
            trials.append(np.sort(rng.choice(clean, size=size, replace=False)))
    if clean.size <= full_limit:
        trials.append(clean)
    for alpha in trials:
        c = _anchor_conditioning(D, alpha, d, tol)
        if c < best_cond:
            best, best_cond = alpha, c
    if best is None:
        best = greedy_anchor(D, clean, d, tol, size=size)
        if best is None:
            raise SolverError("no clean anchor of full affine rank")
    return best


def refine_value(D, i, j, d, tol=DEFAULT_TOL, anchor=None):
    """Distance ``i``-``j`` implied by all other entries, through a clean anchor."""
    if anchor is None:
        anchor = choose_clean_anchor(D, (i, j), d, tol)
    _, Y = trilaterate(D, anchor, [i, j], d, tol)
    return float(np.sum((Y[0] - Y[1]) ** 2))


def _pick_outside(outside, d, shift):
    outside = np.asarray(outside, dtype=int)
    if outside.size < d:
        raise HardCaseNeeded("not enough clean indices outside the block")
    k = (shift * d) % max(1, outside.size - d + 1)
    return outside[k : k + d]


def _locate_within(D, I, d, tol):
    """Corrupted pair of ``I`` using only points of ``I``.

    For a wrong pair ``(a, b)`` some endpoint ``c`` of the true pair lies
    outside it, and the window ``{a, b}`` plus ``d`` points avoiding ``c`` is
    clean. The true pair is the only one whose windows are all Bad.
    """
    I = np.sort(np.asarray(I, dtype=int))
    if I.size < d + 3:
        raise HardCaseNeeded("block too small to test pairs against its own points")
    rows, owner = [], []
    for t, (a, b) in enumerate(itertools.combinations(I.tolist(), 2)):
        rest = I[(I != a) & (I != b)]
        for c in rest:
            rows.append(np.concatenate([[a, b], rest[rest != c][:d]]))
            owner.append(t)
    good, _, _ = classify_windows(D, np.array(rows), d, tol)
    owner = np.array(owner)
    pairs = list(itertools.combinations(I.tolist(), 2))
    all_bad = [t for t in range(len(pairs)) if not good[owner == t].any()]
    if len(all_bad) != 1:
        raise HardCaseNeeded(f"{len(all_bad)} pairs are Bad in every window")
    a, b = pairs[all_bad[0]]
    return int(a), int(b)


def locate_in_small_block(D, I, d, outside, tol=DEFAULT_TOL, attempts=3):
    """Find the corrupted pair inside a small Bad block ``I``.

    Every pair ``(a, b)`` of ``I`` is tested with ``d`` clean points from
    ``outside``; the window ``{a, b} + outside`` has order ``d + 2`` and is Bad
    exactly when it holds the corrupted entry. With fewer than ``d`` outside
    points the pairs are tested against the other points of ``I`` instead.

    Raises
    ------
    HardCaseNeeded
        When no attempt isolates a unique Bad window.
    """
    D = np.asarray(D, dtype=float)
    I = np.asarray(I, dtype=int)
    pairs = np.array(list(itertools.combinations(sorted(I.tolist()), 2)), dtype=int)
    if pairs.size == 0:
        raise HardCaseNeeded("block has fewer than two indices")
    if np.asarray(outside).size < d:
        return _locate_within(D, np.union1d(I, outside), d, tol)
    outcomes = []
    for shift in range(attempts):
        O = _pick_outside(outside, d, shift)
        idx = np.hstack([pairs, np.broadcast_to(O, (pairs.shape[0], d))])
        good, _, _ = classify_windows(D, idx, d, tol)
        bad = np.flatnonzero(~good)
        outcomes.append(len(bad))
        if bad.size == 1:
            a, b = pairs[bad[0]]
            return int(a), int(b)
        if np.asarray(outside).size <= d:
            break
    raise HardCaseNeeded(f"small-block search found {outcomes} Bad windows")


def validate_solution(inst, report, tol=DEFAULT_TOL):
    """Check a report's recovered matrix against the instance.

    The rank test certifies the recovered matrix by realizing it from a
    clean anchor and comparing every entry, which costs ``O(n^2 d)``.
    """
    R = np.asarray(report.recovered, dtype=float)
    D = inst.D
    d = inst.d
    thr = tol.diff_threshold(D)
    checks, messages = {}, []
    checks["hollow"] = bool(np.all(np.diag(R) == 0))
    checks["nonnegative"] = bool(R.min() >= -thr)
    checks["rank_d"] = _certify_rank(R, d, tol, thr)
    diff = np.abs(R - D)
    iu = np.triu_indices_from(diff, 1)
    changed = np.count_nonzero(diff[iu] > thr)
    checks["single_entry"] = changed == 1
    if changed != 1:
        messages.append(f"recovered differs from input in {changed} entries, not exactly one")
    if inst.truth is not None:
        ti, tj, ta = inst.truth
        c = report.correction
        want = D[ti, tj] - ta
        ok = (c.i, c.j) == (ti, tj) and abs(c.corrected_value - want) <= 1e-6 * max(
            1.0, float(np.max(np.abs(D)))
        )
        checks["truth"] = bool(ok)
        if not ok:
            messages.append(
                f"truth ({ti}, {tj}) -> {want!r}, got ({c.i}, {c.j}) -> {c.corrected_value!r}"
            )
    for name, ok in checks.items():
        if not ok and name in ("hollow", "nonnegative", "rank_d"):
            messages.append(f"check {name} failed")
    return ValidationResult(checks=checks, messages=messages)


def _certify_rank(R, d, tol, thr):
    n = R.shape[0]
    if n <= 600:
        decision = embedding_dimension(kappa_dagger(R), tol)
        return bool(_is_good(decision, d))
    anchor = greedy_anchor(R, np.arange(n), d, tol, size=2 * d + 2)
    if anchor is None:
        return False
    X, Y = trilaterate(R, anchor, np.arange(n), d, tol)
    s = np.einsum("ij,ij->i", Y, Y)
    step = max(1, 2_000_000 // n)
    for lo in range(0, n, step):
        rows = np.arange(lo, min(n, lo + step))
        if np.max(np.abs(R[rows] - _predicted_rows(Y, s, rows))) > thr:
            return False
    return True
