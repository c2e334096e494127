"""Key-rate analysis of the high-dimensional extended B92 protocol.

Pipeline for one set of observed statistics:

1. :func:`estimate_inner_products` turns the test-round statistics into the
   norms and real inner products of Eve's ancilla vectors that are pinned by
   observation, plus the constant ``K = x + y`` tying together the two
   inner products that are not.
2. :func:`build_entropy_terms` assembles the per-pair weights ``(n0, n1)`` and
   overlaps for the conditional-entropy bound at a candidate ``(x, y)``.
3. :func:`minimize_entropy` takes the worst case over ``x`` (with
   ``y = K - x``) inside the Cauchy-Schwarz boxes.
4. :func:`key_rate` subtracts ``H(A|B)`` from the minimised bound.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .channels import (
    ObservedStats,
    ProtocolConfig,
    amplitude_damping_kraus,
    depolarizing_stats,
    stats_from_channel,
)
from .errors import DegenerateStatistics, HDB92Error, InconsistentStats, InvalidArgument, NoSignChange
from .qcore import binary_entropy, binary_entropy_array, shannon_entropy

logger = logging.getLogger(__name__)

NORM_CLAMP = 1e-9
NORM_HARD = 1e-6
TERM_CUTOFF = 1e-12
CS_SLACK = 1e-9
GRID_POINTS = 1001
X_TOL = 1e-9
TIE_TOL = 1e-12
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class InnerProductEstimates:
    g_norm: float
    h_norm: float
    f_norm: np.ndarray
    re_eb_fb: np.ndarray
    K: float
    c_x: float
    c_y: float


@dataclass(frozen=True)
class EntropyTerm:
    """One ``(n0, n1, Re<v0|v1>)`` pair of the entropy bound.

    ``n0``/``n1`` are the squared norms of the bit-0 and bit-1 vectors.
    Overlaps that exceed Cauchy-Schwarz by more than 1e-9 are pulled back to
    the boundary.
    """

    n0: float
    n1: float
    re_ip: float

    def __post_init__(self):
        for name in ("n0", "n1"):
            v = getattr(self, name)
            if v < -NORM_HARD:
                raise InconsistentStats(f"entropy term has negative weight {name}={v}")
            object.__setattr__(self, name, max(float(v), 0.0))
        bound = math.sqrt(self.n0 * self.n1)
        if abs(self.re_ip) > bound + CS_SLACK:
            logger.debug("clamping overlap %r to Cauchy-Schwarz bound %r", self.re_ip, bound)
            object.__setattr__(self, "re_ip", math.copysign(bound, self.re_ip))
        else:
            object.__setattr__(self, "re_ip", float(self.re_ip))


class JointDistribution(NamedTuple):
    """Alice/Bob bit pairs on a conclusive key round; ``pab`` is ``Pr[A=a, B=b]``."""

    p00: float
    p01: float
    p10: float
    p11: float


class Minimum(NamedTuple):
    s_min: float
    x_star: float
    y_star: float
    projected: bool = False


@dataclass(frozen=True)
class KeyRateResult:
    s_ae_bound: float
    h_ab: float
    rate: float
    x_star: float
    y_star: float
    N: float
    joint: JointDistribution
    projected: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["joint"] = self.joint._asdict()
        return d


def _nonneg(value: float, name: str, hard: float) -> float:
    if value < -hard:
        raise InconsistentStats(f"{name}={value!r} is negative; statistics are not physical")
    if value < 0:
        if value < -NORM_CLAMP:
            logger.info("clamping %s=%r to 0", name, value)
        return 0.0
    return float(value)


def _hard_limit(stats: ObservedStats) -> float:
    # empirical statistics carry a looser tolerance; scale the hard floor with it
    return max(NORM_HARD, stats.tolerance)


def estimate_inner_products(stats: ObservedStats) -> InnerProductEstimates:
    """Norms and overlaps of Eve's vectors that the statistics pin down."""
    hard = _hard_limit(stats)
    p_ii, p_ij, p_ji, p_jj = stats.p_ii, stats.p_ij, stats.p_ji, stats.p_jj
    g = _nonneg(2 * p_ii + 2 * p_ij - 2 * stats.p_i_phi, "<g|g>", hard)
    h = _nonneg(4 * (stats.p_phi_i + stats.p_phi_j - stats.p_phi_phi), "<h|h>", hard)
    f = 2.0 * np.asarray(stats.p_phi, dtype=float)
    re = (stats.p_i + stats.p_phi - stats.p_i / 2 - stats.p_j / 2) / SQRT2
    K = (
        2 * stats.p_phi_phi
        - stats.p_phi_i
        - stats.p_phi_j
        - stats.p_i_phi
        + p_ii / 2
        + p_ij / 2
        - stats.p_j_phi
        + p_ji / 2
        + p_jj / 2
    )
    f.setflags(write=False)
    re.setflags(write=False)
    return InnerProductEstimates(
        g_norm=g,
        h_norm=h,
        f_norm=f,
        re_eb_fb=re,
        K=float(K),
        c_x=math.sqrt(p_ii * p_jj),
        c_y=math.sqrt(p_ij * p_ji),
    )


def _xy_base(stats: ObservedStats) -> float:
    # shared observable part of the overlaps in the i- and j-terms
    return stats.p_i_phi - stats.p_ii / 2 - stats.p_ij - stats.p_phi_j + stats.p_jj / 2


def _weights(stats: ObservedStats, est: InnerProductEstimates) -> list[float]:
    others = stats.cfg.others
    return [
        *(stats.p_i[others] + stats.p_phi[others]).tolist(),
        0.5 * stats.p_ij + est.h_norm / 8,
        est.g_norm / 4 + 0.5 * stats.p_phi_j,
    ]


def normalizer(stats: ObservedStats, est: InnerProductEstimates | None = None) -> float:
    """Trace ``N`` of the unnormalised Alice-Eve state on a conclusive round."""
    if est is None:
        est = estimate_inner_products(stats)
    return math.fsum(_weights(stats, est))


def build_entropy_terms(
    stats: ObservedStats, est: InnerProductEstimates, x: float, y: float
) -> tuple[list[EntropyTerm], float]:
    """Entropy terms at ``x = Re<e_i^i|e_j^j>`` and ``y = Re<e_j^i|e_i^j>``.

    Order: one term per ``b`` outside ``{i, j}`` (ascending), then the
    i-term, then the j-term.
    """
    others = stats.cfg.others
    terms = [
        EntropyTerm(float(stats.p_i[b]), float(stats.p_phi[b]), float(est.re_eb_fb[b]))
        for b in others
    ]
    base = _xy_base(stats)
    terms.append(EntropyTerm(0.5 * stats.p_ij, est.h_norm / 8, (base + y) / 4))
    terms.append(EntropyTerm(est.g_norm / 4, 0.5 * stats.p_phi_j, (base + x) / 4))
    return terms, normalizer(stats, est)


def term_values(n0, n1, re_ip) -> np.ndarray:
    """``(n0 + n1) * S`` for arrays of terms, with the zero-weight branch."""
    n0 = np.asarray(n0, dtype=float)
    n1 = np.asarray(n1, dtype=float)
    re_ip = np.asarray(re_ip, dtype=float)
    tot = n0 + n1
    active = (n0 > TERM_CUTOFF) & (n1 > TERM_CUTOFF)
    safe = np.where(active, tot, 1.0)
    bound = np.sqrt(np.clip(n0 * n1, 0.0, None))
    r = np.clip(re_ip, -bound, bound)
    lam = 0.5 + np.sqrt(np.clip((n0 - n1) ** 2 + 4 * r * r, 0.0, None)) / (2 * safe)
    lam = np.clip(lam, 0.5, 1.0)
    s = binary_entropy_array(n0 / safe) - binary_entropy_array(lam)
    return np.where(active, tot * s, 0.0)


def entropy_bound(terms: Sequence[EntropyTerm], N: float) -> float:
    """Lower bound on ``S(A|E)`` from a list of entropy terms."""
    if not N > 0:
        raise DegenerateStatistics(f"normalizer N={N} is not positive")
    if not terms:
        return 0.0
    arr = np.array([(t.n0, t.n1, t.re_ip) for t in terms], dtype=float)
    return math.fsum((term_values(arr[:, 0], arr[:, 1], arr[:, 2]) / N).tolist())


class BoundObjective:
    """The entropy bound as a function of the unobservable pair ``(x, y)``.

    Only the i- and j-terms depend on ``(x, y)``; everything else is summed
    once at construction. When all ``b``-terms coincide (depolarizing
    statistics), a single term is evaluated and scaled by the count; the
    result is bit-identical to the per-term sum.
    """

    def __init__(self, stats: ObservedStats, est: InnerProductEstimates, fast: bool = True):
        self.N = normalizer(stats, est)
        if not self.N > 0:
            raise DegenerateStatistics(f"normalizer N={self.N} is not positive")
        others = stats.cfg.others
        n0 = stats.p_i[others]
        n1 = stats.p_phi[others]
        re = est.re_eb_fb[others]
        self.symmetric = bool(
            others.size
            and np.all(n0 == n0[0])
            and np.all(n1 == n1[0])
            and np.all(re == re[0])
        )
        if fast and self.symmetric:
            one = float(term_values(n0[0], n1[0], re[0])) / self.N
            self.b_sum = others.size * one
        else:
            self.b_sum = math.fsum((term_values(n0, n1, re) / self.N).tolist())
        self.base = _xy_base(stats)
        self.i_weights = (0.5 * stats.p_ij, est.h_norm / 8)
        self.j_weights = (est.g_norm / 4, 0.5 * stats.p_phi_j)

    def __call__(self, x, y):
        ti = term_values(*self.i_weights, (self.base + np.asarray(y)) / 4) / self.N
        tj = term_values(*self.j_weights, (self.base + np.asarray(x)) / 4) / self.N
        out = self.b_sum + ti + tj
        return float(out) if out.ndim == 0 else out


def feasible_interval(est: InnerProductEstimates) -> tuple[float, float]:
    """Range of ``x`` with ``|x| <= c_x`` and ``|K - x| <= c_y``; may be empty."""
    return max(-est.c_x, est.K - est.c_y), min(est.c_x, est.K + est.c_y)


def _golden(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def minimize_entropy(
    stats: ObservedStats,
    est: InnerProductEstimates,
    grid_points: int = GRID_POINTS,
    xtol: float = X_TOL,
    objective: BoundObjective | None = None,
) -> Minimum:
    """Worst-case entropy bound over ``x`` in the feasible interval, ``y = K - x``.

    A uniform grid locates the best bracket (the objective is not known to be
    convex), then golden-section search refines it. Ties go to the smallest
    ``x``. If no ``x`` satisfies both Cauchy-Schwarz boxes, ``K`` is projected
    onto the nearest corner ``(+-c_x, +-c_y)`` and ``projected`` is set.
    """
    obj = objective if objective is not None else BoundObjective(stats, est)
    lo, hi = feasible_interval(est)
    if lo > hi:
        if lo - hi <= CS_SLACK:
            lo = hi = 0.5 * (lo + hi)
        else:
            sign = 1.0 if est.K > 0 else -1.0
            x, y = sign * est.c_x, sign * est.c_y
            logger.warning(
                "empty feasible interval (K=%r, c_x=%r, c_y=%r); projecting to x=%r, y=%r",
                est.K, est.c_x, est.c_y, x, y,
            )
            return Minimum(obj(x, y), x, y, True)
    if hi - lo <= xtol:
        x = lo
        return Minimum(obj(x, est.K - x), x, est.K - x)

    xs = np.linspace(lo, hi, grid_points)
    vals = obj(xs, est.K - xs)
    # values within TIE_TOL of the minimum count as ties; take the first
    k = int(np.flatnonzero(vals <= np.min(vals) + TIE_TOL)[0])
    best_x, best = float(xs[k]), float(vals[k])
    a, b = float(xs[max(k - 1, 0)]), float(xs[min(k + 1, grid_points - 1)])
    xg = _golden(lambda t: obj(t, est.K - t), a, b, xtol)
    vg = obj(xg, est.K - xg)
    if vg < best - TIE_TOL:
        best_x, best = xg, vg
    return Minimum(best, best_x, est.K - best_x)


def joint_distribution(stats: ObservedStats, N: float | None = None) -> JointDistribution:
    if N is None:
        N = normalizer(stats)
    if not N > 0:
        raise DegenerateStatistics(f"normalizer N={N} is not positive")
    others = stats.cfg.others
    si = math.fsum(stats.p_i[others].tolist())
    sphi = math.fsum(stats.p_phi[others].tolist())
    raw = (
        si + stats.p_ii + stats.p_ij - stats.p_i_phi,
        si + stats.p_ij,
        sphi + stats.p_phi_i + stats.p_phi_j - stats.p_phi_phi,
        sphi + stats.p_phi_j,
    )
    out = []
    for name, v in zip(JointDistribution._fields, raw):
        p = v / (2 * N)
        if p < -NORM_CLAMP:
            raise InconsistentStats(f"{name}={p!r} is negative")
        out.append(max(p, 0.0))
    return JointDistribution(*out)


def conditional_shannon(joint: Sequence[float]) -> float:
    """``H(A|B)`` for the 2x2 joint ``(p00, p01, p10, p11)``."""
    p00, p01, p10, p11 = joint
    return shannon_entropy(joint) - shannon_entropy((p00 + p10, p01 + p11))


def key_rate(stats: ObservedStats) -> KeyRateResult:
    """Devetak-Winter rate ``min S(A|E) - H(A|B)``; may be negative."""
    est = estimate_inner_products(stats)
    obj = BoundObjective(stats, est)
    m = minimize_entropy(stats, est, objective=obj)
    joint = joint_distribution(stats, obj.N)
    h_ab = conditional_shannon(joint)
    return KeyRateResult(
        s_ae_bound=m.s_min,
        h_ab=h_ab,
        rate=m.s_min - h_ab,
        x_star=m.x_star,
        y_star=m.y_star,
        N=obj.N,
        joint=joint,
        projected=m.projected,
    )


def bb84_rate(D: int, Q: float) -> float:
    """High-dimensional BB84 rate ``log D - 2 (H(Q) + Q log(D-1))`` on a
    depolarizing channel."""
    if int(D) != D or D < 2:
        raise InvalidArgument(f"dimension must be >= 2, got {D}")
    if not 0.0 <= Q <= 1.0:
        raise InvalidArgument(f"Q={Q} outside [0, 1]")
    return math.log2(D) - 2 * (binary_entropy(Q) + Q * math.log2(D - 1))


def noise_threshold(rate_fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6) -> float:
    """Bisect for the noise level where ``rate_fn`` crosses zero.

    Requires ``rate_fn(lo) > 0 >= rate_fn(hi)``. Returns the lower end of the
    final bracket, i.e. the largest probed noise level with a non-negative rate.
    """
    if not tol > 0:
        raise InvalidArgument(f"tolerance must be positive, got {tol}")
    r_lo, r_hi = rate_fn(lo), rate_fn(hi)
    if not (r_lo > 0 >= r_hi):
        raise NoSignChange(f"rate({lo})={r_lo:.6g}, rate({hi})={r_hi:.6g}: no sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate_fn(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


CHANNELS = ("depolarizing", "amplitude-damping")
PROTOCOLS = ("extb92", "bb84")


def channel_stats(channel: str, cfg: ProtocolConfig, q: float) -> ObservedStats:
    if channel == "depolarizing":
        return depolarizing_stats(cfg, q)
    if channel == "amplitude-damping":
        return stats_from_channel(amplitude_damping_kraus(cfg.D, q), cfg)
    raise InvalidArgument(f"unknown channel family {channel!r}")


def rate_curve(channel: str, cfg: ProtocolConfig, protocol: str = "extb92") -> Callable[[float], float]:
    """Noise parameter -> key rate for one channel family and protocol."""
    if protocol == "bb84":
        if channel != "depolarizing":
            raise InvalidArgument("the BB84 comparison rate is only defined for the depolarizing channel")
        return lambda q: bb84_rate(cfg.D, q)
    if protocol != "extb92":
        raise InvalidArgument(f"unknown protocol {protocol!r}")
    return lambda q: key_rate(channel_stats(channel, cfg, q)).rate


def noise_range(channel: str, D: int) -> tuple[float, float]:
    if channel == "depolarizing":
        return 0.0, (D - 1) / D
    if channel == "amplitude-damping":
        return 0.0, 1.0
    raise InvalidArgument(f"unknown channel family {channel!r}")


def threshold(
    channel: str, cfg: ProtocolConfig, protocol: str = "extb92", tol: float = 1e-6
) -> float:
    lo, hi = noise_range(channel, cfg.D)
    return noise_threshold(rate_curve(channel, cfg, protocol), lo, hi, tol)


@dataclass(frozen=True)
class SweepRow:
    dim: int
    q: float
    rate_extb92: float | None
    rate_bb84: float | None = None
    error: str | None = None


def _worker_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("QKD_THREADS")
        threads = int(env) if env else 1
    return max(1, threads)


def sweep(
    channel: str,
    dims: Sequence[int],
    qs: Sequence[float],
    compare_bb84: bool = False,
    i: int = 0,
    j: int = 1,
    threads: int | None = None,
) -> list[SweepRow]:
    """Rates on a ``(dim, q)`` grid, dim-major then ``q`` ascending.

    A failing point becomes a row with ``None`` rates and an ``error``
    message; the sweep itself never aborts.
    """
    if compare_bb84 and channel != "depolarizing":
        raise InvalidArgument("--compare-bb84 needs the depolarizing channel")
    points = [(int(d), float(q)) for d in sorted(dims) for q in sorted(qs)]

    def one(point):
        d, q = point
        try:
            cfg = ProtocolConfig(d, i, j)
            r = key_rate(channel_stats(channel, cfg, q)).rate
            rb = bb84_rate(d, q) if compare_bb84 else None
            return SweepRow(d, q, r, rb)
        except HDB92Error as exc:
            return SweepRow(d, q, None, None, f"{type(exc).__name__}: {exc}")

    workers = _worker_count(threads)
    if workers == 1 or len(points) < 2:
        return [one(p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, points))
