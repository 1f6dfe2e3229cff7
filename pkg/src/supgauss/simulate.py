"""Monte Carlo engine: suprema of empirical processes and their Gaussian analogues.

Replications are driven by counter-based RNG streams so that results are
byte-identical for a given master seed regardless of execution order or
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .funcclass import DiscreteMeasure, DiscretizedClass

_MASK64 = (1 << 64) - 1
# Replication indices live in the low 48 bits of the second key word; the
# salt occupies the high 16 bits so differently-salted policies never collide.
_SALT_SHIFT = 48
_INDEX_MASK = (1 << _SALT_SHIFT) - 1


class CovarianceError(RuntimeError):
    """Raised when a covariance matrix cannot be factorized within the ridge ladder."""


@dataclass(frozen=True)
class RngPolicy:
    """Counter-based stream derivation from a single 64-bit master seed.

    ``stream_of(r)`` keys a Philox generator on ``(master_seed, salt<<48 | r)``,
    so distinct replication indices give statistically independent streams and
    the same ``(seed, salt, index)`` always reproduces the identical stream.
    """

    master_seed: int
    salt: int = 0

    def stream_of(self, index: int) -> np.random.Generator:
        if index < 0 or index > _INDEX_MASK:
            raise ValueError("stream index out of range")
        key = np.array(
            [self.master_seed & _MASK64, ((self.salt << _SALT_SHIFT) | index) & _MASK64],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def with_salt(self, salt: int) -> "RngPolicy":
        """Derive an independent policy for a separate purpose (same seed)."""
        return RngPolicy(self.master_seed, salt)


@dataclass(frozen=True)
class SupSample:
    """Sorted replications of a supremum statistic with RNG provenance."""

    values: np.ndarray
    statistic_id: str
    seed: int
    salt: int = 0
    n: int = 0  # underlying sample size; 0 for Gaussian analogues

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float))
        if values.size < 1:
            raise ValueError("SupSample requires at least one replication")
        object.__setattr__(self, "values", values)

    @property
    def R(self) -> int:
        return self.values.size

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("statistic_id,seed,n,R\n")
            fh.write(f"{self.statistic_id},{self.seed},{self.n},{self.R}\n")
            fh.write("value\n")
            for v in self.values:
                fh.write(repr(float(v)) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SupSample":
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        meta = lines[1].split(",")
        values = np.array([float(v) for v in lines[3:]])
        return cls(values=values, statistic_id=meta[0], seed=int(meta[1]), n=int(meta[2]))


@dataclass(frozen=True)
class CovarianceModel:
    """An N x N covariance with a lower-triangular factor enabling exact sampling."""

    sigma: np.ndarray
    factor: np.ndarray
    repair_shift: float = 0.0

    RIDGE_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)

    @classmethod
    def from_matrix(cls, sigma: np.ndarray) -> "CovarianceModel":
        """Factorize, adding the minimal ridge from the ladder that succeeds."""
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(np.abs(sigma).max(), 1.0)
        if np.abs(sigma - sigma.T).max() > 1e-10 * scale:
            raise ValueError("covariance is not symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        for shift in cls.RIDGE_LADDER:
            try:
                factor = np.linalg.cholesky(sigma + shift * np.eye(sigma.shape[0]))
            except np.linalg.LinAlgError:
                continue
            return cls(sigma=sigma, factor=factor, repair_shift=shift)
        raise CovarianceError("covariance badly conditioned")

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def scaled(self, c: float) -> "CovarianceModel":
        """Covariance of the process scaled by c (factor scales exactly by |c|)."""
        a = abs(float(c))
        return CovarianceModel(self.sigma * a * a, self.factor * a, self.repair_shift * a * a)


def _run_replications(worker, R: int, threads: int) -> np.ndarray:
    """Fill results[r] = worker(r) for r in range(R), merging by index."""
    out = np.empty(R)
    if threads <= 1:
        for r in range(R):
            out[r] = worker(r)
        return out
    chunk = max(1, R // (8 * threads))
    blocks = [(s, min(s + chunk, R)) for s in range(0, R, chunk)]

    def run_block(block):
        s, e = block
        return s, [worker(r) for r in range(s, e)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for s, vals in pool.map(run_block, blocks):
            out[s : s + len(vals)] = vals
    return out


def empirical_sup_sample(
    cls: DiscretizedClass,
    sampler,
    n: int,
    R: int,
    rng: RngPolicy,
    centering: str = "analytic_means",
    means: np.ndarray | None = None,
    statistic_id: str = "empirical_sup",
    threads: int = 1,
) -> SupSample:
    """Sample sup_j n^{-1/2} sum_i (f_j(X_i) - P f_j) over R replications.

    ``sampler(gen, n)`` draws an i.i.d. batch from P using the supplied
    generator.  With ``centering="analytic_means"`` the population means are
    taken from ``means`` (zeros for a centered class); ``"plugin"`` estimates
    them from an auxiliary independent draw of the same size, adding
    nuisance-estimation noise to the statistic.
    """
    if n < 3:
        raise ValueError("sample size must be at least 3")
    if centering not in ("analytic_means", "plugin"):
        raise ValueError(f"unknown centering mode: {centering}")
    if centering == "analytic_means":
        if means is None:
            if not cls.centered:
                raise ValueError("analytic_means centering requires means for a non-centered class")
            means = np.zeros(cls.size)
        means = np.asarray(means, dtype=float)
    root_n = math.sqrt(n)
    # Plugin centering estimates the means from an auxiliary draw on a
    # salted stream; reusing the replication's own sample would recenter
    # every column to exactly zero.
    aux = rng.with_salt(rng.salt + 1) if centering == "plugin" else None
    colsum = cls.column_sums if cls.column_sums is not None else (lambda b: cls.evaluate(b).sum(axis=0))

    def one(r: int) -> float:
        gen = rng.stream_of(r)
        batch = sampler(gen, n)
        col = colsum(batch)
        if centering == "plugin":
            m = colsum(sampler(aux.stream_of(r), n)) / n
        else:
            m = means
        return float(np.max(col / root_n - root_n * m))

    values = _run_replications(one, R, threads)
    return SupSample(values=values, statistic_id=statistic_id, seed=rng.master_seed, salt=rng.salt, n=n)


def gaussian_covariance(
    cls: DiscretizedClass,
    measure,
    method: str = "quadrature",
    reps: int = 10_000,
    rng: RngPolicy | None = None,
    sampler=None,
) -> CovarianceModel:
    """Covariance P(f_j f_k) - P f_j P f_k of the Gaussian analogue.

    ``method="quadrature"`` expects ``measure`` to be a :class:`DiscreteMeasure`
    (e.g. a quadrature rule); ``method="monte_carlo"`` estimates the moments
    from ``reps`` draws of ``sampler``.
    """
    if method == "quadrature":
        if not isinstance(measure, DiscreteMeasure):
            raise ValueError("quadrature method requires a DiscreteMeasure")
        vals = cls.evaluate(measure.points)
        w = measure.weights
        mean = w @ vals
        sigma = (vals * w[:, None]).T @ vals - np.outer(mean, mean)
    elif method == "monte_carlo":
        if sampler is None or rng is None:
            raise ValueError("monte_carlo method requires sampler and rng")
        batch = sampler(rng.stream_of(0), reps)
        vals = cls.evaluate(batch)
        mean = vals.mean(axis=0)
        centered = vals - mean
        sigma = centered.T @ centered / reps
    else:
        raise ValueError(f"unknown covariance method: {method}")
    return CovarianceModel.from_matrix(sigma)


def gaussian_sup_sample(
    cov: CovarianceModel,
    R: int,
    rng: RngPolicy,
    absolute: bool = False,
    statistic_id: str = "gaussian_sup",
    threads: int = 1,
) -> SupSample:
    """Sample max_j (L xi)_j, xi standard normal, over R replications.

    With ``absolute=True`` the statistic is max_j |(L xi)_j|, i.e. the supremum
    over the class closed under negation.
    """
    L = cov.factor
    dim = cov.dim

    def one(r: int) -> float:
        xi = rng.stream_of(r).standard_normal(dim)
        y = L @ xi
        return float(np.abs(y).max() if absolute else y.max())

    values = _run_replications(one, R, threads)
    return SupSample(values=values, statistic_id=statistic_id, seed=rng.master_seed, salt=rng.salt, n=0)


def ks_distance(a: SupSample, b: SupSample) -> tuple[float, float]:
    """Two-sample Kolmogorov distance and a distribution-free confidence radius.

    The radius is sqrt(log(2/0.05) / (2 min(R_a, R_b))).
    """
    xa, xb = a.values, b.values
    grid = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, grid, side="right") / xa.size
    fb = np.searchsorted(xb, grid, side="right") / xb.size
    estimate = float(np.abs(fa - fb).max())
    conf = math.sqrt(math.log(2 / 0.05) / (2 * min(xa.size, xb.size)))
    return estimate, conf


def quantile_coupling(a: SupSample, b: SupSample, delta: float) -> float:
    """Exceedance fraction of the rank-aligned (monotone) coupling.

    Pairs order statistics of the two samples and returns the fraction of
    pairs differing by more than ``delta``; an upper bound on the minimal
    coupling exceedance for laws on the line.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    xa, xb = a.values, b.values
    if xa.size == xb.size:
        paired = xb
    else:
        u = (np.arange(xa.size) + 0.5) / xa.size
        idx = np.minimum((u * xb.size).astype(int), xb.size - 1)
        paired = xb[idx]
    return float(np.mean(np.abs(xa - paired) > delta))


def levy_concentration(a: SupSample, epsilon: float) -> float:
    """Largest fraction of the sample within [x-eps, x+eps], centers at sample points."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    v = a.values
    hi = np.searchsorted(v, v + epsilon, side="right")
    lo = np.searchsorted(v, v - epsilon, side="left")
    return float((hi - lo).max() / v.size)


def sup_quantile(a: SupSample, alpha: float) -> float:
    """Empirical (1-alpha)-quantile, higher-interpolation convention."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    return float(np.quantile(a.values, 1 - alpha, method="higher"))
