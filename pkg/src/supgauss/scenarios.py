"""Kernel (local) and series empirical-process scenarios with exact Gaussian analogues.

A scenario describes the data law, the localization (bandwidth or basis
order), the evaluation grid, and the normalization.  Builders discretize the
induced function family on the grid and compute the matching Gaussian-analogue
covariance by quadrature, so the analogue law is exact up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import eval_legendre, ndtr, ndtri

from .funcclass import DiscretizedClass
from .simulate import CovarianceModel, RngPolicy, empirical_sup_sample, gaussian_sup_sample, ks_distance

# ---------------------------------------------------------------------------
# quadrature

@lru_cache(maxsize=8)
def _leggauss(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)

def gauss_legendre_rule(lo: float, hi: float, nodes: int = 256):
    """Gauss-Legendre nodes and weights on [lo, hi]."""
    x, w = _leggauss(nodes)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class Epanechnikov:
    """k(u) = 0.75 (1 - u^2) on [-1, 1]; unit integral, compact support."""

    name: str = "epanechnikov"
    window: float = 1.0  # support radius
    sup: float = 0.75

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


@dataclass(frozen=True)
class GaussianKernel:
    """Standard normal density kernel; unbounded support."""

    name: str = "gaussian"
    window: float = math.inf
    sup: float = 1.0 / math.sqrt(2.0 * math.pi)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


KERNELS = {"epanechnikov": Epanechnikov(), "gaussian": GaussianKernel()}


# ---------------------------------------------------------------------------
# data laws (1-d, with evaluable densities so quadrature centering is exact)

@dataclass(frozen=True)
class Uniform01:
    name: str = "uniform"
    support: tuple = (0.0, 1.0)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return ((t >= 0) & (t <= 1)).astype(float)

    def sample(self, gen, n):
        return gen.random(n)


@dataclass(frozen=True)
class BetaLaw:
    a: float = 2.0
    b: float = 2.0
    name: str = "beta"
    support: tuple = (0.0, 1.0)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        from scipy.special import betaln

        inside = (t > 0) & (t < 1)
        out = np.zeros_like(t)
        tt = np.clip(t, 1e-300, 1 - 1e-16)
        out[inside] = np.exp(
            (self.a - 1) * np.log(tt[inside]) + (self.b - 1) * np.log1p(-tt[inside]) - betaln(self.a, self.b)
        )
        return out

    def sample(self, gen, n):
        return gen.beta(self.a, self.b, size=n)


@dataclass(frozen=True)
class TruncNorm:
    mu: float = 0.5
    sd: float = 0.25
    lo: float = 0.0
    hi: float = 1.0
    name: str = "truncnorm"

    @property
    def support(self):
        return (self.lo, self.hi)

    def _bounds(self):
        za = (self.lo - self.mu) / self.sd
        zb = (self.hi - self.mu) / self.sd
        return ndtr(za), ndtr(zb)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        fa, fb = self._bounds()
        z = (t - self.mu) / self.sd
        phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        out = phi / (self.sd * (fb - fa))
        return np.where((t >= self.lo) & (t <= self.hi), out, 0.0)

    def sample(self, gen, n):
        fa, fb = self._bounds()
        u = gen.random(n)
        return self.mu + self.sd * ndtri(fa + u * (fb - fa))


DATA_LAWS = {
    "uniform": lambda **kw: Uniform01(),
    "beta": lambda a=2.0, b=2.0, **kw: BetaLaw(a, b),
    "truncnorm": lambda mu=0.5, sd=0.25, lo=0.0, hi=1.0, **kw: TruncNorm(mu, sd, lo, hi),
}


# ---------------------------------------------------------------------------
# g-families for kernel statistics

@dataclass(frozen=True)
class DensityFamily:
    """g = 1: the statistic estimates the design density."""

    x_law: object
    kind: str = "density"

    @property
    def g_count(self):
        return 1

    @property
    def g_bound(self):
        return 1.0

    def sample(self, gen, n):
        return self.x_law.sample(gen, n)

    def g_values(self, batch):
        x = np.asarray(batch, dtype=float)
        return np.ones((x.size, 1)), x

    def g_mean(self, t):
        return np.ones((np.asarray(t).size, 1))

    def g_cross(self, t):
        return np.ones((np.asarray(t).size, 1, 1))


@dataclass(frozen=True)
class RegressionFamily:
    """g(y) = y under Y = m(X) + sd(X) * N(0,1)."""

    x_law: object
    mean_fn: callable
    sd_fn: callable
    kind: str = "regression"

    @property
    def g_count(self):
        return 1

    def sample(self, gen, n):
        x = self.x_law.sample(gen, n)
        y = self.mean_fn(x) + self.sd_fn(x) * gen.standard_normal(n)
        return (y, x)

    def g_values(self, batch):
        y, x = batch
        return np.asarray(y, dtype=float)[:, None], np.asarray(x, dtype=float)

    def g_mean(self, t):
        return np.asarray(self.mean_fn(t), dtype=float)[:, None]

    def g_cross(self, t):
        m = np.asarray(self.mean_fn(t), dtype=float)
        s = np.asarray(self.sd_fn(t), dtype=float)
        return (m * m + s * s)[:, None, None]


@dataclass(frozen=True)
class CondCdfFamily:
    """g_y = 1(Y <= y) over a y-grid, Y = m(X) + sd(X) * N(0,1)."""

    x_law: object
    mean_fn: callable
    sd_fn: callable
    y_grid: np.ndarray
    kind: str = "cond_cdf"

    @property
    def g_count(self):
        return len(self.y_grid)

    @property
    def g_bound(self):
        return 1.0

    def sample(self, gen, n):
        x = self.x_law.sample(gen, n)
        y = self.mean_fn(x) + self.sd_fn(x) * gen.standard_normal(n)
        return (y, x)

    def g_values(self, batch):
        y, x = batch
        y = np.asarray(y, dtype=float)
        g = (y[:, None] <= np.asarray(self.y_grid)[None, :]).astype(float)
        return g, np.asarray(x, dtype=float)

    def _cdf(self, t, y):
        m = np.asarray(self.mean_fn(t), dtype=float)
        s = np.asarray(self.sd_fn(t), dtype=float)
        return ndtr((y - m) / s)

    def g_mean(self, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([self._cdf(t, y) for y in self.y_grid])

    def g_cross(self, t):
        t = np.asarray(t, dtype=float)
        y = np.asarray(self.y_grid, dtype=float)
        ymin = np.minimum(y[:, None], y[None, :])
        out = np.empty((t.size, y.size, y.size))
        for l in range(y.size):
            for m in range(y.size):
                out[:, l, m] = self._cdf(t, ymin[l, m])
        return out


# ---------------------------------------------------------------------------
# kernel scenario

@dataclass(frozen=True)
class KernelScenario:
    """Localized empirical-process experiment description."""

    kernel: object
    bandwidth_rule: callable
    x_grid: np.ndarray
    family: object
    normalization: str = "studentized"
    dimension: int = 1
    quad_nodes: int = 256
    name: str = "kernel"

    def __post_init__(self):
        if self.dimension != 1:
            raise ValueError("built-in kernel scenarios are one-dimensional")
        if self.normalization not in ("unit", "studentized"):
            raise ValueError("normalization must be 'unit' or 'studentized'")
        if len(self.x_grid) == 0:
            raise ValueError("x_grid must be nonempty")


def kernel_density_scenario(
    data_law="beta",
    law_params: dict | None = None,
    kernel: str = "epanechnikov",
    grid_points: int = 64,
    grid_lo: float = 0.1,
    grid_hi: float = 0.9,
    bandwidth_power: float = 0.2,
    bandwidth_scale: float = 1.0,
    normalization: str = "studentized",
) -> KernelScenario:
    """Built-in density-family scenario: h_n = scale * n^{-power}."""
    law = DATA_LAWS[data_law](**(law_params or {}))
    return KernelScenario(
        kernel=KERNELS[kernel],
        bandwidth_rule=lambda n: bandwidth_scale * float(n) ** (-bandwidth_power),
        x_grid=np.linspace(grid_lo, grid_hi, grid_points),
        family=DensityFamily(law),
        normalization=normalization,
    )


@dataclass(frozen=True)
class KernelDesign:
    """Quadrature-computed design of a kernel scenario at one sample size."""

    scenario: KernelScenario
    n: int
    h: float
    means: np.ndarray  # (Nx, L) uncentered kernel moments E[g k]
    variances: np.ndarray  # (Nx, L) Var of the h^{-d/2}-scaled statistic
    c: np.ndarray  # (Nx, L) normalizing constants
    cls: DiscretizedClass
    cov: CovarianceModel

    @property
    def sigma_hat_sd(self) -> np.ndarray:
        """Standard deviation of the raw estimator S_n(x, g) itself."""
        return np.sqrt(self.variances.reshape(-1) / (self.n * self.h**self.scenario.dimension))

    @property
    def estimator_mean(self) -> np.ndarray:
        """E[S_n(x, g)] = h^{-d} E[g k]."""
        return self.means.reshape(-1) / self.h**self.scenario.dimension


def _pair_windows(xg, h, window, support):
    lo_s, hi_s = support
    nx = xg.size
    lo = np.empty((nx, nx))
    hi = np.empty((nx, nx))
    if math.isinf(window):
        lo[:] = lo_s
        hi[:] = hi_s
    else:
        lo[:] = np.maximum(np.maximum.outer(xg, xg) - window * h, lo_s)
        hi[:] = np.minimum(np.minimum.outer(xg, xg) + window * h, hi_s)
    return lo, hi


def design_kernel(scn: KernelScenario, n: int) -> KernelDesign:
    """Discretize the localized family on the grid; covariance by quadrature."""
    if n < 3:
        raise ValueError("sample size must be at least 3")
    h = float(scn.bandwidth_rule(n))
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    kern = scn.kernel
    law = scn.family.x_law
    xg = np.asarray(scn.x_grid, dtype=float)
    nx, L = xg.size, scn.family.g_count
    base_x, base_w = _leggauss(scn.quad_nodes)

    def integrate(lo, hi, f):
        if hi <= lo:
            return 0.0
        half = 0.5 * (hi - lo)
        t = lo + half * (base_x + 1.0)
        return float(half * (base_w @ f(t)))

    # first moments E[g_l(Y) k((X - x_j)/h)]
    means = np.zeros((nx, L))
    lo_s, hi_s = law.support
    for j, x in enumerate(xg):
        lo = lo_s if math.isinf(kern.window) else max(x - kern.window * h, lo_s)
        hi = hi_s if math.isinf(kern.window) else min(x + kern.window * h, hi_s)
        if hi <= lo:
            continue
        half = 0.5 * (hi - lo)
        t = lo + half * (base_x + 1.0)
        kv = kern((t - x) / h) * law.density(t)
        means[j] = half * (base_w[None, :] @ (kv[:, None] * scn.family.g_mean(t)))

    # raw second moments E[g_l g_m k_j k_k] for every grid pair
    raw = np.zeros((nx, L, nx, L))
    lo_p, hi_p = _pair_windows(xg, h, kern.window, law.support)
    for j in range(nx):
        for k in range(j, nx):
            lo, hi = lo_p[j, k], hi_p[j, k]
            if hi <= lo:
                continue
            half = 0.5 * (hi - lo)
            t = lo + half * (base_x + 1.0)
            kk = kern((t - xg[j]) / h) * kern((t - xg[k]) / h) * law.density(t)
            cross = scn.family.g_cross(t)  # (nt, L, L)
            block = half * np.einsum("t,tlm->lm", base_w * kk, cross)
            raw[j, :, k, :] = block
            raw[k, :, j, :] = block.T

    hd = h**scn.dimension
    variances = np.empty((nx, L))
    for j in range(nx):
        variances[j] = (np.einsum("ll->l", raw[j, :, j, :]) - means[j] ** 2) / hd
    if scn.normalization == "studentized":
        if np.any(variances <= 1e-14):
            bad = xg[np.where(variances.min(axis=1) <= 1e-14)[0][0]]
            raise ValueError(f"zero variance at grid point {bad}: studentization undefined")
        c = 1.0 / np.sqrt(variances)
    else:
        c = np.ones((nx, L))

    # covariance of the Gaussian analogue on the flattened (x, g) grid
    flat_c = c.reshape(-1)
    flat_m = means.reshape(-1)
    raw_flat = raw.reshape(nx * L, nx * L)
    sigma = np.outer(flat_c, flat_c) * (raw_flat - np.outer(flat_m, flat_m)) / hd
    cov = CovarianceModel.from_matrix(sigma)

    scale = flat_c / math.sqrt(hd)
    family = scn.family
    g_sup = getattr(family, "g_bound", None)

    def evaluate(batch):
        g, x = family.g_values(batch)
        u = (x[:, None] - xg[None, :]) / h
        kv = kern(u)  # (n, nx)
        prod = kv[:, :, None] * g[:, None, :]  # (n, nx, L)
        return (prod.reshape(x.size, -1) - flat_m[None, :]) * scale[None, :]

    if math.isinf(kern.window):
        column_sums = None
    else:
        # compact support: sum kernel values over the sorted window of each
        # grid point instead of materializing the (n, nx * L) matrix
        def column_sums(batch):
            g, x = family.g_values(batch)
            order = np.argsort(x, kind="stable")
            xs = x[order]
            gs = g[order]
            out = np.empty(nx * L)
            for j, xj in enumerate(xg):
                lo = np.searchsorted(xs, xj - kern.window * h, side="left")
                hi = np.searchsorted(xs, xj + kern.window * h, side="right")
                kv = kern((xs[lo:hi] - xj) / h)
                out[j * L : (j + 1) * L] = kv @ gs[lo:hi]
            return (out - x.size * flat_m) * scale

    if g_sup is not None:
        env_const = float(np.max(flat_c * (kern.sup * g_sup + np.abs(flat_m))) / math.sqrt(hd))

        def envelope(batch):
            _, x = family.g_values(batch)
            return np.full(x.size, env_const)

    else:

        def envelope(batch):
            g, x = family.g_values(batch)
            gmax = np.abs(g).max(axis=1)
            bound = np.max(flat_c) * (kern.sup * gmax + np.abs(flat_m).max()) / math.sqrt(hd)
            return bound

    cls = DiscretizedClass(
        evaluate=evaluate, envelope=envelope, size=nx * L, centered=True, column_sums=column_sums
    )
    return KernelDesign(scenario=scn, n=n, h=h, means=means, variances=variances, c=c, cls=cls, cov=cov)


def build_kernel_class(scn: KernelScenario, n: int):
    """Discretized localized family plus its Gaussian-analogue covariance."""
    design = design_kernel(scn, n)
    return design.cls, design.cov


# ---------------------------------------------------------------------------
# series bases

def fourier_trig_basis(K: int):
    """1, sqrt2 cos(2 pi x), sqrt2 sin(2 pi x), sqrt2 cos(4 pi x), ... (orthonormal under U[0,1])."""
    if K < 1:
        raise ValueError("basis order must be at least 1")

    def psi(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, K))
        out[:, 0] = 1.0
        for c in range(1, K):
            freq = (c + 1) // 2
            arg = 2.0 * math.pi * freq * x
            out[:, c] = math.sqrt(2.0) * (np.cos(arg) if c % 2 == 1 else np.sin(arg))
        return out

    return psi


def legendre_basis(K: int):
    """Shifted Legendre polynomials, orthonormal under U[0,1]."""
    if K < 1:
        raise ValueError("basis order must be at least 1")

    def psi(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = 2.0 * x - 1.0
        return np.column_stack([math.sqrt(2 * k + 1) * eval_legendre(k, z) for k in range(K)])

    return psi


def bspline_basis(K: int):
    """K B-spline basis functions on a clamped uniform knot vector over [0,1]."""
    if K < 1:
        raise ValueError("basis order must be at least 1")
    deg = min(3, K - 1)
    interior = np.linspace(0, 1, K - deg + 1)[1:-1]
    knots = np.concatenate([np.zeros(deg + 1), interior, np.ones(deg + 1)])

    def psi(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xc = np.clip(x, 0.0, 1.0 - 1e-12)
        return BSpline.design_matrix(xc, knots, deg).toarray()

    return psi


BASES = {"fourier_trig": fourier_trig_basis, "legendre": legendre_basis, "bspline": bspline_basis}


# ---------------------------------------------------------------------------
# series scenario

@dataclass(frozen=True)
class SeriesScenario:
    """Projection-type empirical-process experiment description."""

    basis: str
    K_rule: callable
    x_grid: np.ndarray
    noise_model: str = "mean"  # "mean" (E[eta|X]=0) or "quantile" (check transform)
    noise_sd_fn: callable = None
    tau_grid: np.ndarray | None = None
    x_law: object = field(default_factory=Uniform01)
    quad_nodes: int = 256
    name: str = "series"

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis: {self.basis}")
        if self.noise_model not in ("mean", "quantile"):
            raise ValueError("noise_model must be 'mean' or 'quantile'")
        if self.noise_model == "quantile" and self.tau_grid is None:
            object.__setattr__(self, "tau_grid", np.array([0.25, 0.5, 0.75]))
        if self.noise_sd_fn is None:
            object.__setattr__(self, "noise_sd_fn", lambda x: np.ones_like(np.asarray(x, dtype=float)))
        if len(self.x_grid) == 0:
            raise ValueError("x_grid must be nonempty")


def series_mean_scenario(
    basis: str = "fourier_trig",
    k_power: float = 1.0 / 3.0,
    k_scale: float = 1.0,
    grid_points: int = 64,
    grid_lo: float = 0.0,
    grid_hi: float = 1.0,
) -> SeriesScenario:
    """Built-in homoskedastic mean-regression scenario: K_n = ceil(scale * n^{power})."""
    return SeriesScenario(
        basis=basis,
        K_rule=lambda n: max(1, math.ceil(k_scale * float(n) ** k_power)),
        x_grid=np.linspace(grid_lo, grid_hi, grid_points),
        noise_model="mean",
    )


@dataclass(frozen=True)
class SeriesDesign:
    scenario: SeriesScenario
    n: int
    K: int
    psi: callable
    alpha: np.ndarray  # (N_index, K) linear functionals
    Omega: np.ndarray  # (K, K) noise second-moment matrix
    cov: CovarianceModel
    cls: DiscretizedClass
    sampler: callable
    tau_of_col: np.ndarray | None = None  # quantile scenarios: tau index per column


def _spd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def design_series(scn: SeriesScenario, n: int) -> SeriesDesign:
    """Series design: alpha functionals, noise matrix, grid covariance (rank <= K)."""
    if n < 3:
        raise ValueError("sample size must be at least 3")
    K = int(scn.K_rule(n))
    if K < 1:
        raise ValueError("basis order must be at least 1")
    psi = BASES[scn.basis](K)
    lo, hi = scn.x_law.support
    tq, wq = gauss_legendre_rule(lo, hi, scn.quad_nodes)
    dens = scn.x_law.density(tq)
    Pq = psi(tq)  # (nodes, K)
    gram = (Pq * (wq * dens)[:, None]).T @ Pq  # E[psi psi^T]
    xg = np.asarray(scn.x_grid, dtype=float)
    Pg = psi(xg)  # (nx, K)

    if scn.noise_model == "mean":
        sd2 = np.asarray(scn.noise_sd_fn(tq), dtype=float) ** 2
        Omega = (Pq * (wq * dens * sd2)[:, None]).T @ Pq  # E[sd^2(X) psi psi^T]
        A1 = np.linalg.inv(gram)
        A2 = _spd_sqrt(Omega) @ A1
        denom = np.linalg.norm(Pg @ A2.T, axis=1)
        numer = Pg @ A1.T
        alpha = _safe_normalize(numer, denom)
        sigma = alpha @ Omega @ alpha.T
        tau_of_col = None
        g_of_eta = None
    else:
        taus = np.asarray(scn.tau_grid, dtype=float)
        # built-in check-function design: eta ~ U(0,1), conditional density 1
        A1 = np.linalg.inv(gram)
        A2 = _spd_sqrt(gram) @ A1
        denom = np.linalg.norm(Pg @ A2.T, axis=1)
        numer = Pg @ A1.T
        base_alpha = _safe_normalize(numer, denom)  # (nx, K)
        nx = xg.size
        alpha = np.empty((nx * taus.size, K))
        tau_of_col = np.empty(nx * taus.size, dtype=int)
        for l, tau in enumerate(taus):
            scale = 1.0 / math.sqrt(tau * (1.0 - tau))
            alpha[l::taus.size] = base_alpha * scale
            tau_of_col[l::taus.size] = l
        Omega = gram
        cross_tau = np.minimum.outer(taus, taus) - np.outer(taus, taus)
        inner = alpha @ gram @ alpha.T
        sigma = inner * cross_tau[np.ix_(tau_of_col, tau_of_col)]

    cov = CovarianceModel.from_matrix(sigma)
    proj_sup = float(np.abs(alpha).sum(axis=1).max())

    if scn.noise_model == "mean":

        def evaluate(batch):
            eta, x = batch
            proj = psi(np.asarray(x, dtype=float)) @ alpha.T  # (n, N)
            return np.asarray(eta, dtype=float)[:, None] * proj

        def column_sums(batch):
            eta, x = batch
            w = np.asarray(eta, dtype=float) @ psi(np.asarray(x, dtype=float))  # (K,)
            return alpha @ w

        def envelope(batch):
            eta, x = batch
            row_sup = np.abs(psi(np.asarray(x, dtype=float))).max(axis=1)
            return np.abs(np.asarray(eta, dtype=float)) * row_sup * proj_sup

        def sampler(gen, m):
            x = scn.x_law.sample(gen, m)
            eta = scn.noise_sd_fn(x) * gen.standard_normal(m)
            return (eta, x)

    else:
        taus = np.asarray(scn.tau_grid, dtype=float)

        def evaluate(batch):
            eta, x = batch
            eta = np.asarray(eta, dtype=float)
            proj = psi(np.asarray(x, dtype=float)) @ alpha.T  # (n, N)
            g = taus[None, :] - (eta[:, None] <= taus[None, :])  # (n, n_tau)
            return g[:, tau_of_col] * proj

        def column_sums(batch):
            eta, x = batch
            eta = np.asarray(eta, dtype=float)
            P = psi(np.asarray(x, dtype=float))
            g = taus[None, :] - (eta[:, None] <= taus[None, :])
            W = g.T @ P  # (n_tau, K)
            return np.einsum("ck,ck->c", W[tau_of_col], alpha)

        def envelope(batch):
            eta, x = batch
            row_sup = np.abs(psi(np.asarray(x, dtype=float))).max(axis=1)
            return row_sup * proj_sup

        def sampler(gen, m):
            x = scn.x_law.sample(gen, m)
            eta = gen.random(m)
            return (eta, x)

    cls = DiscretizedClass(
        evaluate=evaluate, envelope=envelope, size=alpha.shape[0], centered=True, column_sums=column_sums
    )
    return SeriesDesign(
        scenario=scn, n=n, K=K, psi=psi, alpha=alpha, Omega=Omega, cov=cov, cls=cls,
        sampler=sampler, tau_of_col=tau_of_col,
    )


def _safe_normalize(numer: np.ndarray, denom: np.ndarray) -> np.ndarray:
    """Row-normalize, mapping 0/0 to 0 with a warning."""
    import warnings

    out = np.zeros_like(numer)
    ok = denom > 0
    if not np.all(ok):
        warnings.warn("zero normalizer at some grid points; applying the 0/0 = 0 convention")
    out[ok] = numer[ok] / denom[ok, None]
    return out


def build_series_class(scn: SeriesScenario, n: int):
    """(alpha functionals, noise matrix, grid CovarianceModel) for the series process."""
    design = design_series(scn, n)
    return design.alpha, design.Omega, design.cov


def series_linear_statistic(scn: SeriesScenario, n: int, rng: RngPolicy) -> float:
    """One draw of sup over the grid of alpha(x)^T [n^{-1/2} sum g(eta_i) psi(X_i)]."""
    design = design_series(scn, n)
    gen = rng.stream_of(0)
    batch = design.sampler(gen, n)
    vals = design.cls.evaluate(batch)
    return float(vals.sum(axis=0).max() / math.sqrt(n))


def xi_n(scn: SeriesScenario, K: int, grid_points: int = 2001) -> float:
    """sup_x |psi^K(x)| v 1 over a dense evaluation grid."""
    if K < 1:
        raise ValueError("basis order must be at least 1")
    psi = BASES[scn.basis](K)
    if grid_points < 1000:
        raise ValueError("dense grid needs at least 1000 points")
    x = np.linspace(0.0, 1.0, grid_points)
    norms = np.linalg.norm(psi(x), axis=1)
    return max(float(norms.max()), 1.0)


# ---------------------------------------------------------------------------
# rate experiments

@dataclass(frozen=True)
class RateRow:
    n: int
    ks: float
    ks_conf: float
    predicted_rate: float


@dataclass(frozen=True)
class RateTable:
    rows: list
    slope_fit: float

    def as_rows(self):
        return [
            {
                "n": r.n,
                "ks": r.ks,
                "ks_conf": r.ks_conf,
                "predicted_rate": r.predicted_rate,
                "slope_fit": self.slope_fit,
            }
            for r in self.rows
        ]


def rate_experiment(scenario, n_list, R: int, rng: RngPolicy, threads: int = 1) -> RateTable:
    """Kolmogorov distance between the empirical and Gaussian sup laws along n.

    For each n the empirical supremum and its exact Gaussian analogue are
    both sampled R times (on disjoint salted streams) and compared by the
    two-sample Kolmogorov distance; the predicted-rate column carries the
    theory decay shape for the scenario type.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing with at least 3 entries")
    if any(n < 3 for n in n_list):
        raise ValueError("sample sizes must be at least 3")
    rows = []
    for i, n in enumerate(n_list):
        emp_rng = rng.with_salt(rng.salt + 4 * i + 1)
        gau_rng = rng.with_salt(rng.salt + 4 * i + 3)
        if isinstance(scenario, KernelScenario):
            design = design_kernel(scenario, n)
            sampler = scenario.family.sample
            predicted = (n * design.h**scenario.dimension) ** (-1.0 / 6.0) * math.log(n)
        elif isinstance(scenario, SeriesScenario):
            design = design_series(scenario, n)
            sampler = design.sampler
            predicted = n ** (-1.0 / 6.0) * xi_n(scenario, design.K) ** (1.0 / 3.0) * math.log(n)
        else:
            raise TypeError("scenario must be a KernelScenario or SeriesScenario")
        emp = empirical_sup_sample(
            design.cls, sampler, n, R, emp_rng, statistic_id=f"{scenario.name}_emp_n{n}", threads=threads
        )
        gau = gaussian_sup_sample(design.cov, R, gau_rng, statistic_id=f"{scenario.name}_gauss_n{n}", threads=threads)
        ks, conf = ks_distance(emp, gau)
        rows.append(RateRow(n=n, ks=ks, ks_conf=conf, predicted_rate=predicted))
    logn = np.log([r.n for r in rows])
    logks = np.log([max(r.ks, 1e-12) for r in rows])
    slope = float(np.polyfit(logn, logks, 1)[0])
    return RateTable(rows=rows, slope_fit=slope)
