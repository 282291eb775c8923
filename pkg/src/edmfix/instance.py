"""Instance generation, JSON storage and the exhaustive pencil oracle."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import PencilEvaluator
from .core import DEFAULT_TOL, gram_from_config, kappa
from .exceptions import EDMError
from .solvers._common import Correction, NoisyInstance, _make_correction

__all__ = [
    "GenSpec",
    "generate",
    "sample_config",
    "brute_force_oracle",
    "save_instance",
    "load_instance",
    "instance_to_dict",
    "instance_from_dict",
]


@dataclass(frozen=True)
class GenSpec:
    """Parameters of a random instance.

    Parameters
    ----------
    n, d : int
        Number of points and embedding dimension.
    seed : int
    noise_min_abs : float
        Noise is redrawn until its magnitude reaches this value.
    hard : tuple (m, k), optional
        Place ``m`` points (at random positions) on a random affine flat of
        dimension ``k < d``.
    nonnegative : bool
        Also redraw the noise until the observed entry is nonnegative.
    bias_off_manifold : bool
        In hard mode, draw the corrupted pair from points off the flat when
        at least two exist.
    """

    n: int
    d: int
    seed: int = 0
    noise_min_abs: float = 0.01
    hard: Optional[tuple] = None
    nonnegative: bool = False
    bias_off_manifold: bool = False

    def validate(self):
        if self.d < 1 or self.n < self.d + 2:
            raise EDMError("need d >= 1 and n >= d + 2")
        if not self.noise_min_abs > 0:
            raise EDMError("noise_min_abs must be positive")
        if self.hard is not None:
            m, k = self.hard
            if not 0 <= k <= self.d - 1:
                raise EDMError("flat dimension must lie in [0, d-1]")
            if not 0 < m <= self.n:
                raise EDMError("number of points on the flat must lie in [1, n]")
        return self


def sample_config(spec, rng):
    """Point configuration for ``spec`` (centered), plus the indices on the flat."""
    n, d = spec.n, spec.d
    P = rng.standard_normal((n, d))
    flat = np.array([], dtype=int)
    if spec.hard is not None:
        m, k = spec.hard
        flat = np.sort(rng.choice(n, size=m, replace=False))
        base = rng.standard_normal(d)
        B, _ = np.linalg.qr(rng.standard_normal((d, max(k, 1))))
        B = B[:, :k]
        P[flat] = base + rng.standard_normal((m, k)) @ B.T
    return P - P.mean(axis=0), flat


def generate(spec):
    """Random instance with one corrupted entry; deterministic given the seed.

    Returns
    -------
    NoisyInstance
        ``info`` holds the configuration and the indices placed on the flat.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    P, flat = sample_config(spec, rng)
    D0 = kappa(gram_from_config(P))
    pool = np.arange(spec.n)
    if spec.hard is not None and spec.bias_off_manifold:
        off = np.setdiff1d(pool, flat)
        if off.size >= 2:
            pool = off
    i, j = np.sort(rng.choice(pool, size=2, replace=False))
    while True:
        alpha = float(rng.standard_normal())
        if abs(alpha) < spec.noise_min_abs:
            continue
        if spec.nonnegative and D0[i, j] + alpha < 0:
            continue
        break
    D = D0.copy()
    D[i, j] += alpha
    D[j, i] += alpha
    info = {"config": P, "flat": flat}
    return NoisyInstance(D=D, d=spec.d, truth=(int(i), int(j), alpha), seed=spec.seed, info=info)


def brute_force_oracle(D, d, tol=DEFAULT_TOL):
    """Every single-entry change that yields an EDM of embedding dimension ``d``.

    Each pair is checked exactly: the admissible values of one entry are the
    roots of a small matrix pencil, so no completion heuristics are involved.
    Pairs admitting a whole interval are returned with ``interval`` set.
    """
    ev = PencilEvaluator(D, d, tol)
    out = []
    for a, b in itertools.combinations(range(ev.n), 2):
        vals, iv = ev.values(a, b)
        out.extend(_make_correction(ev.D, a, b, v) for v in vals)
        if iv is not None:
            out.append(
                Correction(i=a, j=b, alpha_hat=float("nan"), corrected_value=float("nan"), interval=iv)
            )
    return out


def instance_to_dict(inst):
    out = {"n": inst.n, "d": inst.d, "D": inst.D.ravel().tolist()}
    if inst.truth is not None:
        i, j, a = inst.truth
        out["truth"] = {"i": i + 1, "j": j + 1, "alpha": a}
    if inst.seed is not None:
        out["seed"] = int(inst.seed)
    return out


def instance_from_dict(obj):
    try:
        n, d = int(obj["n"]), int(obj["d"])
        flat = np.asarray(obj["D"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise EDMError(f"malformed instance: {exc}") from exc
    if flat.size != n * n:
        raise EDMError(f"D has {flat.size} entries, expected n*n = {n * n}")
    truth = None
    if obj.get("truth") is not None:
        t = obj["truth"]
        truth = (int(t["i"]) - 1, int(t["j"]) - 1, float(t["alpha"]))
    return NoisyInstance(D=flat.reshape(n, n), d=d, truth=truth, seed=obj.get("seed"))


def save_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh)


def load_instance(path):
    """Read an instance file (indices 1-based on disk, 0-based in memory)."""
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EDMError(f"malformed instance file: {exc}") from exc
    return instance_from_dict(obj)
