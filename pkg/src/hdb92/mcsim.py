"""Seeded Monte-Carlo run of the quantum stage of the protocol.

Each round: Alice picks key (probability ``key_round_prob``) or test; in a
key round she sends ``|i>`` for bit 0 and ``|phi>`` for bit 1, in a test round
one of ``|i>, |j>, |phi>`` uniformly. The state passes through the channel
and Bob measures Z or the two-outcome POVM ``{|phi><phi|, I - |phi><phi|}``
with equal probability. Key-round sifting: Z with an outcome other than
``i`` gives Bob bit 1, X with outcome ``not-phi`` gives bit 0, anything else
is inconclusive.

Randomness comes from numpy's Philox4x64 counter-based generator. Rounds are
grouped in fixed-size chunks; chunk ``c`` draws from the stream keyed by
``(seed, c)``, so the report does not depend on how many threads run the
chunks.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import KrausSet, ObservedStats, ProtocolConfig, stats_to_dict
from .errors import InsufficientSamples, InvalidArgument
from .keyrate import KeyRateResult, key_rate
from .qcore import apply_channel, ket, projector, superposition_phi

STATES = ("i", "j", "phi")
BASES = ("Z", "X")
CHUNK = 1 << 20

# cell name -> (state index, basis index)
CELLS = {
    "p_i": (0, 0),
    "p_j": (1, 0),
    "p_phi": (2, 0),
    "p_i_phi": (0, 1),
    "p_j_phi": (1, 1),
    "p_phi_phi": (2, 1),
}


@dataclass(frozen=True)
class SimConfig:
    cfg: ProtocolConfig
    kraus: KrausSet
    rounds: int
    key_round_prob: float = 0.5
    seed: int = 0
    chunk_size: int = CHUNK

    def __post_init__(self):
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise InvalidArgument(f"rounds must be a positive integer, got {self.rounds}")
        if not 0.0 < self.key_round_prob < 1.0:
            raise InvalidArgument(f"key_round_prob must lie in (0, 1), got {self.key_round_prob}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise InvalidArgument(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.chunk_size < 1:
            raise InvalidArgument("chunk_size must be positive")
        if self.kraus.dim != self.cfg.D:
            raise InvalidArgument(f"channel dimension {self.kraus.dim} != protocol dimension {self.cfg.D}")


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Outcome distributions for the three signal states after the channel."""

    z_cdf: np.ndarray  # (3, D) cumulative Z-outcome probabilities
    x_phi: np.ndarray  # (3,) probability of the phi outcome

    @classmethod
    def build(cls, cfg: ProtocolConfig, kraus: KrausSet) -> "ChannelModel":
        phi = superposition_phi(cfg)
        cdf, xp = [], []
        for psi in (ket(cfg.D, cfg.i), ket(cfg.D, cfg.j), phi):
            out = apply_channel(kraus, projector(psi))
            pz = np.clip(np.real(np.diag(out)), 0.0, None)
            c = np.cumsum(pz / pz.sum())
            c[-1] = 1.0
            cdf.append(c)
            xp.append(min(max(float(np.real(phi.conj() @ out @ phi)), 0.0), 1.0))
        return cls(np.array(cdf), np.array(xp))


@dataclass(frozen=True)
class RoundRecord:
    key_round: bool
    alice_bit: int | None
    state: str
    basis: str
    outcome: int | str  # Z outcome label, or "phi" / "not-phi"
    bob_bit: int | None


def _draw(rng: np.random.Generator, model: ChannelModel, n: int, kp: float) -> dict[str, np.ndarray]:
    is_key = rng.random(n) < kp
    bit = rng.integers(0, 2, n)
    test_state = rng.integers(0, 3, n)
    basis = rng.integers(0, 2, n)
    u = rng.random(n)

    state = np.where(is_key, np.where(bit == 0, 0, 2), test_state)
    z_out = np.empty(n, dtype=np.int64)
    for s in range(3):
        m = state == s
        z_out[m] = np.searchsorted(model.z_cdf[s], u[m], side="right")
    np.minimum(z_out, model.z_cdf.shape[1] - 1, out=z_out)
    x_phi = u < model.x_phi[state]
    return {"is_key": is_key, "bit": bit, "state": state, "basis": basis, "z_out": z_out, "x_phi": x_phi}


def _bob_bits(d: dict[str, np.ndarray], i: int) -> np.ndarray:
    """Bob's sifted bit per round: 0, 1, or -1 for inconclusive."""
    z = d["basis"] == 0
    bob = np.full(d["basis"].shape, -1, dtype=np.int64)
    bob[z & (d["z_out"] != i)] = 1
    bob[~z & ~d["x_phi"]] = 0
    return bob


def simulate_round(rng: np.random.Generator, sim: SimConfig, model: ChannelModel | None = None) -> RoundRecord:
    """One protocol round drawn from ``rng``."""
    if model is None:
        model = ChannelModel.build(sim.cfg, sim.kraus)
    d = _draw(rng, model, 1, sim.key_round_prob)
    is_key = bool(d["is_key"][0])
    basis = int(d["basis"][0])
    outcome: int | str = int(d["z_out"][0]) if basis == 0 else ("phi" if d["x_phi"][0] else "not-phi")
    bob = int(_bob_bits(d, sim.cfg.i)[0])
    return RoundRecord(
        key_round=is_key,
        alice_bit=int(d["bit"][0]) if is_key else None,
        state=STATES[int(d["state"][0])],
        basis=BASES[basis],
        outcome=outcome,
        bob_bit=bob if is_key and bob >= 0 else None,
    )


@dataclass
class _Tally:
    z_counts: np.ndarray
    x_counts: np.ndarray  # (3, 2): [phi outcomes, trials]
    key_pairs: np.ndarray  # (2, 2): [alice bit, bob bit]
    key_rounds: int = 0
    conclusive: int = 0

    @classmethod
    def empty(cls, D: int) -> "_Tally":
        return cls(np.zeros((3, D), np.int64), np.zeros((3, 2), np.int64), np.zeros((2, 2), np.int64))

    def __iadd__(self, other: "_Tally") -> "_Tally":
        self.z_counts += other.z_counts
        self.x_counts += other.x_counts
        self.key_pairs += other.key_pairs
        self.key_rounds += other.key_rounds
        self.conclusive += other.conclusive
        return self


def _run_chunk(sim: SimConfig, model: ChannelModel, index: int, n: int) -> _Tally:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([sim.seed, index])))
    d = _draw(rng, model, n, sim.key_round_prob)
    D = sim.cfg.D
    t = _Tally.empty(D)
    test = ~d["is_key"]
    tz = test & (d["basis"] == 0)
    t.z_counts += np.bincount(d["state"][tz] * D + d["z_out"][tz], minlength=3 * D).reshape(3, D)
    tx = test & (d["basis"] == 1)
    t.x_counts[:, 0] = np.bincount(d["state"][tx & d["x_phi"]], minlength=3)
    t.x_counts[:, 1] = np.bincount(d["state"][tx], minlength=3)
    bob = _bob_bits(d, sim.cfg.i)
    concl = d["is_key"] & (bob >= 0)
    t.key_pairs += np.bincount(d["bit"][concl] * 2 + bob[concl], minlength=4).reshape(2, 2)
    t.key_rounds = int(np.count_nonzero(d["is_key"]))
    t.conclusive = int(np.count_nonzero(concl))
    return t


@dataclass(frozen=True, eq=False)
class SimReport:
    config: SimConfig
    z_counts: np.ndarray
    x_counts: np.ndarray
    key_pairs: dict[str, int]
    conclusive_count: int
    inconclusive_count: int
    key_round_count: int
    test_round_count: int
    cell_trials: dict[str, int]
    no_data: list[str] = field(default_factory=list)
    empirical_stats: ObservedStats | None = None

    @property
    def conclusive_fraction(self) -> float:
        """Conclusive key rounds per key round."""
        return self.conclusive_count / self.key_round_count if self.key_round_count else math.nan

    @property
    def conclusive_rate(self) -> float:
        """Conclusive key rounds per protocol round."""
        return self.conclusive_count / self.config.rounds

    def to_dict(self) -> dict:
        c = self.config
        return {
            "dimension": c.cfg.D,
            "i": c.cfg.i,
            "j": c.cfg.j,
            "rounds": c.rounds,
            "key_round_prob": c.key_round_prob,
            "seed": c.seed,
            "prng": "Philox4x64-10",
            "key_round_count": self.key_round_count,
            "test_round_count": self.test_round_count,
            "conclusive_count": self.conclusive_count,
            "inconclusive_count": self.inconclusive_count,
            "key_pairs": dict(self.key_pairs),
            "cell_trials": dict(self.cell_trials),
            "no_data": list(self.no_data),
            "z_counts": self.z_counts.tolist(),
            "x_phi_counts": self.x_counts[:, 0].tolist(),
            "empirical_stats": stats_to_dict(self.empirical_stats) if self.empirical_stats else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("QKD_THREADS")
        threads = int(env) if env else 1
    return max(1, threads)


def run_simulation(sim: SimConfig, threads: int | None = None) -> SimReport:
    model = ChannelModel.build(sim.cfg, sim.kraus)
    sizes = [sim.chunk_size] * (sim.rounds // sim.chunk_size)
    if sim.rounds % sim.chunk_size:
        sizes.append(sim.rounds % sim.chunk_size)
    total = _Tally.empty(sim.cfg.D)
    workers = _threads(threads)
    if workers == 1 or len(sizes) == 1:
        for k, n in enumerate(sizes):
            total += _run_chunk(sim, model, k, n)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for t in pool.map(lambda kn: _run_chunk(sim, model, *kn), enumerate(sizes)):
                total += t

    trials = {}
    for name, (s, basis) in CELLS.items():
        trials[name] = int(total.z_counts[s].sum() if basis == 0 else total.x_counts[s, 1])
    no_data = [name for name, n in trials.items() if n == 0]
    stats = None
    if not no_data:
        rows = [total.z_counts[s] / total.z_counts[s].sum() for s in range(3)]
        xs = [total.x_counts[s, 0] / total.x_counts[s, 1] for s in range(3)]
        stats = ObservedStats(
            sim.cfg, *rows, *(float(v) for v in xs),
            tolerance=5.0 / math.sqrt(min(trials.values())),
        )
    kp = total.key_pairs
    return SimReport(
        config=sim,
        z_counts=total.z_counts,
        x_counts=total.x_counts,
        key_pairs={"n00": int(kp[0, 0]), "n01": int(kp[0, 1]), "n10": int(kp[1, 0]), "n11": int(kp[1, 1])},
        conclusive_count=total.conclusive,
        inconclusive_count=total.key_rounds - total.conclusive,
        key_round_count=total.key_rounds,
        test_round_count=sim.rounds - total.key_rounds,
        cell_trials=trials,
        no_data=no_data,
        empirical_stats=stats,
    )


def empirical_key_rate(report: SimReport) -> KeyRateResult:
    if report.no_data or report.empirical_stats is None:
        raise InsufficientSamples(f"no test-round data for: {', '.join(report.no_data)}")
    return key_rate(report.empirical_stats)


def conclusive_probability(stats: ObservedStats) -> float:
    """Probability that a key round is conclusive, ``(4 - p_i_phi - p_ii - p_phi_phi - p_phi_i) / 4``."""
    return (4.0 - stats.p_i_phi - stats.p_ii - stats.p_phi_phi - stats.p_phi_i) / 4.0
