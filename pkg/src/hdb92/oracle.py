"""Brute-force check of the entropy bound against an explicit attack.

Any Kraus channel ``{E_k}`` is realised by the isometry
``|a>|chi> -> sum_b |b> (sum_k <b|E_k|a> |k>)``, so Eve's ancilla vectors are
``e_b^a[k] = <b|E_k|a>``. From them the Alice-Eve state on a conclusive key
round is built exactly and its conditional entropy computed by
diagonalisation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .channels import KrausSet, ObservedStats, ProtocolConfig, stats_from_channel
from .errors import DegenerateStatistics, InvalidArgument
from .keyrate import (
    BoundObjective,
    build_entropy_terms,
    entropy_bound,
    estimate_inner_products,
    minimize_entropy,
)
from .qcore import partial_trace_first, von_neumann_entropy

MAX_ANCILLA = 256
SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class EveVectors:
    """Eve's unnormalised ancilla vectors ``e[a][b]`` for ``a`` in ``(i, j)``.

    ``e`` has shape ``(2, D, ancilla_dim)``; row 0 belongs to ``|i>``, row 1
    to ``|j>``.
    """

    cfg: ProtocolConfig
    e: np.ndarray

    @property
    def ancilla_dim(self) -> int:
        return self.e.shape[2]

    @property
    def e_i(self) -> np.ndarray:
        return self.e[0]

    @property
    def e_j(self) -> np.ndarray:
        return self.e[1]

    @property
    def f(self) -> np.ndarray:
        return self.e[0] + self.e[1]

    @property
    def g(self) -> np.ndarray:
        return self.e_i[self.cfg.i] - self.e_i[self.cfg.j]

    @property
    def h(self) -> np.ndarray:
        f = self.f
        return f[self.cfg.i] - f[self.cfg.j]


def inner(u: np.ndarray, v: np.ndarray) -> complex:
    """``<u|v>``, conjugate-linear in the first argument."""
    return complex(np.vdot(u, v))


def eve_vectors(kraus: KrausSet, cfg: ProtocolConfig) -> EveVectors:
    if kraus.dim != cfg.D:
        raise InvalidArgument(f"channel dimension {kraus.dim} != protocol dimension {cfg.D}")
    if len(kraus) > MAX_ANCILLA:
        raise InvalidArgument(f"{len(kraus)} Kraus operators exceed the oracle limit of {MAX_ANCILLA}")
    ops = kraus.operators
    # ops[k, b, a] = <b|E_k|a>; reorder to (a, b, k)
    e = np.stack([ops[:, :, cfg.i].T, ops[:, :, cfg.j].T])
    e.setflags(write=False)
    return EveVectors(cfg, e)


def _gram(vectors_and_weights) -> np.ndarray:
    return sum(w * np.outer(v, v.conj()) for v, w in vectors_and_weights)


def exact_rho_ae(ev: EveVectors) -> tuple[np.ndarray, float]:
    """Normalised ``rho_AE`` on ``C^2 (x) ancilla`` and its normaliser ``N``."""
    cfg = ev.cfg
    others = cfg.others
    ei, f = ev.e_i, ev.f
    block0 = _gram(
        [(ei[b], 1.0) for b in others] + [(ei[cfg.j], 0.5), (ev.g, 0.25)]
    )
    block1 = _gram(
        [(f[b], 0.5) for b in others] + [(f[cfg.j], 0.25), (ev.h, 0.125)]
    )
    k = ev.ancilla_dim
    rho = np.zeros((2 * k, 2 * k), dtype=complex)
    rho[:k, :k] = block0
    rho[k:, k:] = block1
    N = float(np.real(np.trace(rho)))
    if N <= 1e-15:
        raise DegenerateStatistics(f"normalizer N={N} is not positive")
    return rho / N, N


def exact_conditional_entropy(rho_ae: np.ndarray, dim_a: int = 2) -> float:
    """``S(AE) - S(E)`` in bits."""
    return von_neumann_entropy(rho_ae) - von_neumann_entropy(partial_trace_first(rho_ae, dim_a))


def true_unobservables(ev: EveVectors) -> tuple[float, float]:
    """``x = Re<e_i^i|e_j^j>`` and ``y = Re<e_j^i|e_i^j>`` read off the attack."""
    i, j = ev.cfg.i, ev.cfg.j
    x = inner(ev.e_i[i], ev.e_j[j]).real
    y = inner(ev.e_i[j], ev.e_j[i]).real
    return x, y


def estimation_identities(ev: EveVectors, stats: ObservedStats) -> dict[str, tuple[float, float]]:
    """Each observable identity as ``name -> (value from vectors, value from stats)``."""
    cfg = ev.cfg
    i, j = cfg.i, cfg.j
    ei, ej, f = ev.e_i, ev.e_j, ev.f
    out: dict[str, tuple[float, float]] = {}
    for b in range(cfg.D):
        out[f"<e_b^i|e_b^i> = p_i[{b}]"] = (inner(ei[b], ei[b]).real, float(stats.p_i[b]))
        out[f"<e_b^j|e_b^j> = p_j[{b}]"] = (inner(ej[b], ej[b]).real, float(stats.p_j[b]))
        out[f"<f_b|f_b>/2 = p_phi[{b}]"] = (inner(f[b], f[b]).real / 2, float(stats.p_phi[b]))
        out[f"Re<e_b^i|e_b^j> [b={b}]"] = (
            inner(ei[b], ej[b]).real,
            float(stats.p_phi[b] - stats.p_i[b] / 2 - stats.p_j[b] / 2),
        )
    out["Re<e_i^i|e_j^i>"] = (
        inner(ei[i], ei[j]).real,
        stats.p_i_phi - stats.p_ii / 2 - stats.p_ij / 2,
    )
    out["Re<e_i^j|e_j^j>"] = (
        inner(ej[i], ej[j]).real,
        stats.p_j_phi - stats.p_ji / 2 - stats.p_jj / 2,
    )
    out["Re<f_i|f_j>"] = (
        inner(f[i], f[j]).real,
        2 * stats.p_phi_phi - stats.p_phi_i - stats.p_phi_j,
    )
    est = estimate_inner_products(stats)
    out["<g|g>"] = (inner(ev.g, ev.g).real, est.g_norm)
    out["<h|h>"] = (inner(ev.h, ev.h).real, est.h_norm)
    return out


@dataclass(frozen=True)
class BoundReport:
    exact: float
    bound_at_true: float
    bound_minimized: float
    x_true: float
    y_true: float
    K_from_stats: float
    N_exact: float
    N_stats: float
    pass_: bool

    @property
    def passed(self) -> bool:
        return self.pass_

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        return d


def verify_bound(kraus: KrausSet, cfg: ProtocolConfig) -> BoundReport:
    """Compare minimised bound <= bound at the true ``(x, y)`` <= exact entropy."""
    ev = eve_vectors(kraus, cfg)
    stats = stats_from_channel(kraus, cfg)
    est = estimate_inner_products(stats)
    rho, n_exact = exact_rho_ae(ev)
    exact = exact_conditional_entropy(rho)
    x, y = true_unobservables(ev)
    terms, n_stats = build_entropy_terms(stats, est, x, y)
    at_true = entropy_bound(terms, n_stats)
    m = minimize_entropy(stats, est, objective=BoundObjective(stats, est))
    ok = m.s_min <= at_true + SLACK and at_true <= exact + SLACK
    return BoundReport(exact, at_true, m.s_min, x, y, est.K, n_exact, n_stats, ok)


def random_kraus(dim: int, n_ops: int, rng: np.random.Generator) -> KrausSet:
    """Kraus set read off a Haar-random isometry ``C^dim -> C^dim (x) C^n_ops``."""
    z = rng.standard_normal((dim * n_ops, dim)) + 1j * rng.standard_normal((dim * n_ops, dim))
    q, r = np.linalg.qr(z)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return KrausSet(q.reshape(n_ops, dim, dim))


@dataclass(frozen=True)
class RandomCase:
    index: int
    dim: int
    n_ops: int
    cfg: ProtocolConfig
    report: BoundReport
    max_identity_error: float
    constraint_error: float

    @property
    def passed(self) -> bool:
        return self.report.pass_ and self.max_identity_error <= SLACK and self.constraint_error <= SLACK


def _random_case(index: int, seed: int, dims: tuple[int, ...]) -> RandomCase:
    rng = np.random.default_rng([seed, index])
    dim = int(dims[index % len(dims)])
    n_ops = int(rng.integers(2, 4))
    i, j = (int(v) for v in rng.choice(dim, size=2, replace=False))
    cfg = ProtocolConfig(dim, i, j)
    kraus = random_kraus(dim, n_ops, rng)
    report = verify_bound(kraus, cfg)
    ev = eve_vectors(kraus, cfg)
    stats = stats_from_channel(kraus, cfg)
    idents = estimation_identities(ev, stats)
    worst = max(abs(a - b) for a, b in idents.values())
    return RandomCase(
        index, dim, n_ops, cfg, report, worst,
        abs(report.x_true + report.y_true - report.K_from_stats),
    )


def random_suite(
    n: int, seed: int, dims: tuple[int, ...] = (2, 3, 4), threads: int = 1
) -> list[RandomCase]:
    """Run :func:`verify_bound` on ``n`` seeded random channels.

    Case ``k`` uses the generator seeded with ``(seed, k)`` and dimension
    ``dims[k % len(dims)]``, so results do not depend on ``threads``.
    """
    if n < 0:
        raise InvalidArgument("number of random channels must be non-negative")
    dims = tuple(dims)
    if threads <= 1:
        return [_random_case(k, seed, dims) for k in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda k: _random_case(k, seed, dims), range(n)))

