"""Closed-form coupling and empirical-process bounds with traceable reports.

Every universal constant left free by the underlying inequalities is an
explicit parameter (default 1.0) echoed in the report, so each number a
report carries traces back to a formula plus the constants used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .simulate import RngPolicy


@dataclass(frozen=True)
class Provenance:
    """Where a moment input came from: analytic value or seeded MC estimate."""

    kind: str  # "analytic" or "monte_carlo"
    seed: int | None = None
    reps: int | None = None

    def __post_init__(self):
        if self.kind not in ("analytic", "monte_carlo"):
            raise ValueError("provenance kind must be 'analytic' or 'monte_carlo'")
        if self.kind == "monte_carlo" and (self.seed is None or self.reps is None):
            raise ValueError("monte_carlo provenance requires seed and reps")


ANALYTIC = Provenance("analytic")


@dataclass(frozen=True)
class MomentInputs:
    """Moment summaries feeding the supremum coupling budget.

    ``H_profile(eps)`` is log(N(eps) v n) for the covering of the class at
    radius eps * ||F||_{P,2}; ``phi_profile(eps)`` bounds the expected sup of
    the process over eps-close pairs; ``tail_fn(u)`` is
    P[(F/kappa)^3 1(F/kappa > u)].
    """

    n: int
    p_or_N: int
    sigma: float
    b: float  # envelope scale ||F||_{P,2} (and >= sigma)
    q: float
    M_norms: dict
    kappa: float
    EG_FF: float
    H_profile: callable
    phi_profile: callable
    tail_fn: callable
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("sample size must be at least 3")
        if self.sigma > self.b:
            raise ValueError("sigma cannot exceed the envelope scale b")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if 2 in self.M_norms and self.q in self.M_norms:
            if self.M_norms[2] > self.M_norms[self.q] + 1e-12:
                raise ValueError("||M||_2 cannot exceed ||M||_q for q >= 2")
        logn = math.log(self.n)
        probe = np.linspace(0.05, 1.0, 8)
        vals = np.array([self.H_profile(e) for e in probe])
        if np.any(vals < logn - 1e-9):
            raise ValueError("H_profile must be at least log n")
        if np.any(np.diff(vals) > 1e-9):
            raise ValueError("H_profile must be non-increasing in epsilon")


@dataclass(frozen=True)
class CouplingBudget:
    """Named components of the coupling error budget and its probability bound."""

    terms: dict
    delta_n_tail: float
    prob_bound_raw: float
    constants_used: dict

    @property
    def delta_n(self) -> float:
        return sum(self.terms.values())

    @property
    def prob_bound(self) -> float:
        return min(max(self.prob_bound_raw, 0.0), 1.0)

    @property
    def threshold(self) -> float:
        """The coupling threshold K(q) * Delta_n implied by the budget."""
        return self.constants_used["K_q"] * self.delta_n

    def as_dict(self) -> dict:
        out = dict(self.terms)
        out.update(
            delta_n=self.delta_n,
            delta_n_tail=self.delta_n_tail,
            threshold=self.threshold,
            prob_bound_raw=self.prob_bound_raw,
            prob_bound=self.prob_bound,
            constants_used=dict(self.constants_used),
        )
        return out


def coupling_budget(
    inputs: MomentInputs,
    epsilon: float,
    gamma: float,
    K_q: float = 1.0,
    c_const: float = 1.0,
    C_log: float = 1.0,
) -> CouplingBudget:
    """Six-term coupling error budget for a supremum statistic.

    Returns the additive budget

        phi + gamma^{-1/q} eps b + n^{-1/2} gamma^{-1/q} ||M||_q
        + n^{-1/2} gamma^{-2/q} ||M||_2
        + n^{-1/4} gamma^{-1/2} EG_FF^{1/2} H^{1/2}
        + n^{-1/6} gamma^{-1/3} kappa H^{2/3}

    together with the tail correction delta_n and the probability bound
    gamma (1 + delta_n) + C_log log(n)/n.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must be in (0, 1]")
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    if inputs.q < 3:
        raise ValueError("the coupling budget requires q >= 3")
    n, q = inputs.n, inputs.q
    H = float(inputs.H_profile(epsilon))
    Mq = float(inputs.M_norms.get(q, inputs.M_norms.get("q", 0.0)))
    M2 = float(inputs.M_norms.get(2, 0.0))
    terms = {
        "phi": float(inputs.phi_profile(epsilon)),
        "eps_term": gamma ** (-1.0 / q) * epsilon * inputs.b,
        "Mq_term": n**-0.5 * gamma ** (-1.0 / q) * Mq,
        "M2_term": n**-0.5 * gamma ** (-2.0 / q) * M2,
        "FF_term": n**-0.25 * gamma**-0.5 * math.sqrt(inputs.EG_FF) * math.sqrt(H),
        "kappa_term": n ** (-1.0 / 6.0) * gamma ** (-1.0 / 3.0) * inputs.kappa * H ** (2.0 / 3.0),
    }
    tail_arg = c_const * gamma ** (-1.0 / 3.0) * n ** (1.0 / 3.0) * H ** (-1.0 / 3.0)
    delta_n_tail = 0.25 * float(inputs.tail_fn(tail_arg))
    prob_raw = gamma * (1.0 + delta_n_tail) + C_log * math.log(n) / n
    return CouplingBudget(
        terms=terms,
        delta_n_tail=delta_n_tail,
        prob_bound_raw=prob_raw,
        constants_used={"K_q": K_q, "c_const": c_const, "C_log": C_log},
    )


@dataclass(frozen=True)
class VcBudget:
    """Three-term coupling budget specialized to VC type classes."""

    terms: dict
    K_n: float
    prob_bound_raw: float
    constants_used: dict

    @property
    def total(self) -> float:
        return sum(self.terms.values())

    @property
    def prob_bound(self) -> float:
        return min(max(self.prob_bound_raw, 0.0), 1.0)


def vc_class_budget(
    n: int,
    gamma: float,
    q: float,
    b: float,
    sigma: float,
    A: float,
    v: float,
    c_const: float = 1.0,
    C_prob: float = 1.0,
) -> VcBudget:
    """Coupling budget b K_n / (g^{1/2} n^{1/2-1/q}) + (b s)^{1/2} K_n^{3/4} /
    (g^{1/2} n^{1/4}) + (b s^2 K_n^2)^{1/3} / (g^{1/3} n^{1/6}) for VC classes,
    with K_n = c v (log n v log(A b / sigma)); 1/q reads as 0 at q = inf."""
    if sigma > b:
        raise ValueError("sigma cannot exceed b")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    if not (4 <= q):
        raise ValueError("q must be in [4, inf]")
    if A * b / sigma < math.e:
        raise ValueError("A b / sigma must be at least e")
    if n < 3:
        raise ValueError("sample size must be at least 3")
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    K_n = c_const * v * max(math.log(n), math.log(A * b / sigma))
    terms = {
        "envelope_term": b * K_n / (gamma**0.5 * n ** (0.5 - inv_q)),
        "mixed_term": math.sqrt(b * sigma) * K_n**0.75 / (gamma**0.5 * n**0.25),
        "variance_term": (b * sigma**2 * K_n**2) ** (1.0 / 3.0) / (gamma ** (1.0 / 3.0) * n ** (1.0 / 6.0)),
    }
    prob_raw = C_prob * (gamma + math.log(n) / n)
    return VcBudget(
        terms=terms,
        K_n=K_n,
        prob_bound_raw=prob_raw,
        constants_used={"c_const": c_const, "C_prob": C_prob},
    )


@dataclass(frozen=True)
class SteinCouplingTerms:
    """Moment terms B1..B4 and the two coupling probability bounds they imply."""

    B1: float
    B2: float
    B3: float
    B4: float
    beta: float
    delta: float
    p: int
    n: int
    prob_raw_thm: float
    prob_raw_cor: float
    provenance: Provenance = ANALYTIC

    def __post_init__(self):
        for name in ("B1", "B2", "B3", "B4"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and nonnegative")

    @property
    def threshold_thm41(self) -> float:
        """Coupling threshold 2 beta^{-1} log p + 3 delta for the smooth-max bound."""
        return 2.0 * math.log(max(self.p, 1)) / self.beta + 3.0 * self.delta

    @property
    def threshold_cor41(self) -> float:
        """Coupling threshold 16 delta for the applied bound."""
        return 16.0 * self.delta

    @property
    def prob_bound_thm41(self) -> float:
        return min(max(self.prob_raw_thm, 0.0), 1.0)

    @property
    def prob_bound_cor41(self) -> float:
        return min(max(self.prob_raw_cor, 0.0), 1.0)


@dataclass(frozen=True)
class AnalyticVectorMoments:
    """Analytic moment summaries for n independent p-vectors.

    ``b3_tail(thr)`` and ``b4_tail(thr)`` return
    sum_i E[max_j |X_ij|^3 1(max_j |X_ij| > thr)].
    """

    B1: float
    B2: float
    b3_tail: callable
    b4_tail: callable | None = None

    def tail(self, thr: float) -> float:
        return float(self.b3_tail(thr))

    def tail4(self, thr: float) -> float:
        fn = self.b4_tail if self.b4_tail is not None else self.b3_tail
        return float(fn(thr))


@dataclass(frozen=True)
class SampleVectorMoments:
    """Monte Carlo moment estimates from a raw-sample generator.

    ``generator(gen, n, p)`` draws an (n, p) matrix of the independent rows.
    The second-moment matrix E[X_i X_i^T], assumed row-homogeneous, may be
    supplied analytically; otherwise it is estimated from a pooled pilot draw.
    """

    generator: callable
    rng: RngPolicy
    reps: int = 2000
    second_moment: np.ndarray | None = None


def _mc_vector_terms(moments: SampleVectorMoments, n: int, p: int, thr3: float, thr4: float):
    gen_pilot = moments.rng.with_salt(moments.rng.salt + 7)
    if moments.second_moment is None:
        pilot = moments.generator(gen_pilot.stream_of(0), n, p)
        second = pilot.T @ pilot / n
        for r in range(1, 8):
            batch = moments.generator(gen_pilot.stream_of(r), n, p)
            second += batch.T @ batch / n
        second /= 8.0
    else:
        second = np.asarray(moments.second_moment, dtype=float)
    b1 = b2 = b3 = b4 = 0.0
    for r in range(moments.reps):
        x = moments.generator(moments.rng.stream_of(r), n, p)
        v = x.T @ x - n * second
        b1 += np.abs(v).max()
        cube = np.abs(x) ** 3
        b2 += cube.sum(axis=0).max()
        row_max = np.abs(x).max(axis=1)
        row_cube_max = cube.max(axis=1)
        b3 += row_cube_max[row_max > thr3].sum()
        b4 += row_cube_max[row_max > thr4].sum()
    reps = moments.reps
    return b1 / reps, b2 / reps, b3 / reps, b4 / reps


def stein_coupling_terms(
    vectors_moments,
    delta: float,
    n: int,
    p: int,
    beta: float | None = None,
    c_const: float = 1.0,
) -> SteinCouplingTerms:
    """Coupling terms for the maximum of a sum of independent p-vectors.

    B1 is the expected max entry deviation of the empirical second-moment
    matrix, B2 the expected max column sum of |X|^3, and B3/B4 truncated
    third-moment tails at thresholds beta^{-1}/2 and delta / log(p v n).
    Returns both the smooth-max coupling bound
    (eps + C beta delta^{-1} (B1 + beta (B2 + B3))) / (1 - eps) and the
    applied bound delta^{-2} (B1 + delta^{-1} (B2 + B4) log(p v n)) log(p v n)
    + log(n)/n, each scaled by the exposed constant.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if max(p, n) < 3:
        raise ValueError("max(p, n) must be at least 3")
    L = math.log(max(p, n))
    if beta is None:
        beta = 2.0 * L / delta
    thr3 = 0.5 / beta
    thr4 = delta / L
    prov = ANALYTIC
    if isinstance(vectors_moments, AnalyticVectorMoments):
        B1 = vectors_moments.B1
        B2 = vectors_moments.B2
        B3 = vectors_moments.tail(thr3)
        B4 = vectors_moments.tail4(thr4)
    elif isinstance(vectors_moments, SampleVectorMoments):
        B1, B2, B3, B4 = _mc_vector_terms(vectors_moments, n, p, thr3, thr4)
        prov = Provenance("monte_carlo", seed=vectors_moments.rng.master_seed, reps=vectors_moments.reps)
    else:
        raise TypeError("vectors_moments must be AnalyticVectorMoments or SampleVectorMoments")
    from .smoothmax import epsilon_beta_delta

    eps = epsilon_beta_delta(beta, delta)
    prob_thm = (eps + c_const * (beta / delta) * (B1 + beta * (B2 + B3))) / (1.0 - eps)
    prob_cor = c_const * ((B1 + (B2 + B4) * L / delta) * L / delta**2 + math.log(n) / n)
    return SteinCouplingTerms(
        B1=B1, B2=B2, B3=B3, B4=B4,
        beta=beta, delta=delta, p=p, n=n,
        prob_raw_thm=prob_thm, prob_raw_cor=prob_cor,
        provenance=prov,
    )


def yurinskii_bound(p: int, delta: float, sum_third_moments: float) -> float:
    """Whole-vector coupling bound B0 (1 + |log(1/B0)| / p), B0 = p delta^{-3} sum E|X_i|^3."""
    if p < 1 or delta <= 0 or sum_third_moments <= 0:
        raise ValueError("inputs must be positive")
    B0 = p * delta**-3 * sum_third_moments
    return B0 * (1.0 + abs(math.log(1.0 / B0)) / p)


def deviation_bound(
    EGn: float,
    sigma: float,
    M2: float,
    Mq: float,
    t: float,
    alpha: float,
    q: float,
    n: int,
    K_q: float = 1.0,
) -> float:
    """Level-(1 - t^{-q/2}) deviation bound for the supremum of an empirical process:

        (1 + alpha) E||G_n|| + K_q [ (sigma + n^{-1/2} ||M||_q) sqrt(t)
                                     + alpha^{-1} n^{-1/2} ||M||_2 t ].
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    root_n = math.sqrt(n)
    return (1.0 + alpha) * EGn + K_q * ((sigma + Mq / root_n) * math.sqrt(t) + M2 * t / (alpha * root_n))


def maximal_bound(J_delta: float, F_P2: float, M2: float, delta: float, n: int) -> float:
    """Constant-free maximal-inequality shape J(d) ||F||_{P,2} + ||M||_2 J^2(d) / (d^2 sqrt n)."""
    if not 0 < delta <= 1:
        raise ValueError("delta must be in (0, 1]")
    return J_delta * F_P2 + M2 * J_delta**2 / (delta**2 * math.sqrt(n))


def vc_maximal_bound(sigma: float, F_P2: float, M2: float, A: float, v: float, n: int) -> float:
    """VC specialization sqrt(v s^2 log(A ||F|| / s)) + v ||M||_2 log(A ||F|| / s) / sqrt n."""
    if sigma <= 0 or F_P2 < sigma:
        raise ValueError("requires 0 < sigma <= ||F||_{P,2}")
    logterm = math.log(A * F_P2 / sigma)
    if logterm <= 0:
        raise ValueError("A ||F||_{P,2} / sigma must exceed 1")
    return math.sqrt(v * sigma**2 * logterm) + v * M2 * logterm / math.sqrt(n)


def kolmogorov_conversion(
    r1: float,
    r2: float,
    E_Ztilde: float,
    sigma_low: float,
    C_sigma: float = 1.0,
) -> float:
    """Kolmogorov-distance bound C_s r1 (E[Z~] + sqrt(1 v log(s_low / r1))) + r2."""
    if r1 <= 0 or not 0 <= r2 <= 1:
        raise ValueError("requires r1 > 0 and r2 in [0, 1]")
    return C_sigma * r1 * (E_Ztilde + math.sqrt(max(1.0, math.log(sigma_low / r1)))) + r2


@dataclass(frozen=True)
class CrossoverRow:
    n: int
    p: int
    cor_bound: float
    yurinskii: float


def crossover_sweep(n_list, delta: float, b: float = 1.0, c_const: float = 1.0):
    """Compare the maxima-coupling and whole-vector coupling bounds along a
    growth profile p_n = ceil(exp(n^{0.2})) with coordinates |X_ij| <= b / sqrt(n).

    Moment profile for bounded coordinates: B1 = b^2 sqrt(log(1 + p) / n),
    B2 = b^3 / sqrt(n), B4 thresholds at b / sqrt(n), and
    sum_i E|X_i|^3 <= b^3 p^{3/2} / sqrt(n).  Returns the per-n rows and the
    first n (if any) where the whole-vector bound exceeds the maxima bound.
    """
    rows = []
    for n in n_list:
        if n < 3:
            raise ValueError("sample sizes must be at least 3")
        p = math.ceil(math.exp(n**0.2))
        coord = b / math.sqrt(n)
        moments = AnalyticVectorMoments(
            B1=b * b * math.sqrt(math.log1p(p) / n),
            B2=b**3 / math.sqrt(n),
            b3_tail=lambda thr, c=coord, n_=n, b_=b: (b_**3 / math.sqrt(n_)) if c > thr else 0.0,
        )
        terms = stein_coupling_terms(moments, delta=delta, n=n, p=p, c_const=c_const)
        yur = yurinskii_bound(p, delta, b**3 * p**1.5 / math.sqrt(n))
        rows.append(CrossoverRow(n=n, p=p, cor_bound=terms.prob_raw_cor, yurinskii=yur))
    crossover_n = None
    for row in rows:
        if row.yurinskii > row.cor_bound:
            crossover_n = row.n
            break
    return rows, crossover_n
