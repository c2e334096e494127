"""Evaluation channels and the observable test-round statistics.

The statistics are the conditional probabilities Alice and Bob can read off
their test rounds:

========== ====================================================
``p_i[b]``     Bob sees ``|b>`` in Z given Alice sent ``|i>``
``p_j[b]``     Bob sees ``|b>`` in Z given Alice sent ``|j>``
``p_phi[b]``   Bob sees ``|b>`` in Z given Alice sent ``|phi>``
``p_i_phi``    Bob sees ``phi`` with POVM X given Alice sent ``|i>``
``p_j_phi``    same, Alice sent ``|j>``
``p_phi_phi``  same, Alice sent ``|phi>``
========== ====================================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgument, InvalidStats
from .qcore import (
    PROB_TOL,
    KrausSet,
    ProtocolConfig,
    apply_channel,
    ket,
    projector,
    superposition_phi,
    weyl_operators,
)

__all__ = [
    "KrausSet",
    "ObservedStats",
    "ProtocolConfig",
    "amplitude_damping_kraus",
    "depolarizing_kraus",
    "depolarizing_map",
    "depolarizing_stats",
    "dump_stats",
    "load_kraus",
    "load_stats",
    "stats_from_channel",
    "stats_from_dict",
    "stats_to_dict",
]


def _probability(value: float, name: str) -> float:
    v = float(value)
    if not math.isfinite(v) or v < -PROB_TOL or v > 1 + PROB_TOL:
        raise InvalidStats(f"{name}={value!r} is not a probability")
    return min(max(v, 0.0), 1.0)


def _row(values, name: str, dim: int, tol: float) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (dim,):
        raise InvalidStats(f"{name} must have length {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidStats(f"{name} contains non-finite entries")
    bad = np.flatnonzero((arr < -PROB_TOL) | (arr > 1 + PROB_TOL))
    if bad.size:
        raise InvalidStats(f"{name}[{bad[0]}]={arr[bad[0]]!r} is not a probability")
    total = float(np.sum(arr))
    if abs(total - 1.0) > tol:
        raise InvalidStats(f"{name} sums to {total!r}, not 1 (tolerance {tol})")
    arr = np.clip(arr, 0.0, 1.0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ObservedStats:
    """Validated test-round statistics for one protocol configuration.

    Entries within 1e-9 of [0, 1] are clamped; each Z-basis row must sum to 1
    within ``tolerance``.
    """

    cfg: ProtocolConfig
    p_i: np.ndarray
    p_j: np.ndarray
    p_phi: np.ndarray
    p_i_phi: float
    p_j_phi: float
    p_phi_phi: float
    tolerance: float = PROB_TOL

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidStats(f"tolerance must be positive, got {self.tolerance}")
        D = self.cfg.D
        for name in ("p_i", "p_j", "p_phi"):
            object.__setattr__(self, name, _row(getattr(self, name), name, D, self.tolerance))
        for name in ("p_i_phi", "p_j_phi", "p_phi_phi"):
            object.__setattr__(self, name, _probability(getattr(self, name), name))

    # shorthands used throughout the estimation formulas
    @property
    def p_ii(self) -> float:
        return float(self.p_i[self.cfg.i])

    @property
    def p_ij(self) -> float:
        return float(self.p_i[self.cfg.j])

    @property
    def p_ji(self) -> float:
        return float(self.p_j[self.cfg.i])

    @property
    def p_jj(self) -> float:
        return float(self.p_j[self.cfg.j])

    @property
    def p_phi_i(self) -> float:
        return float(self.p_phi[self.cfg.i])

    @property
    def p_phi_j(self) -> float:
        return float(self.p_phi[self.cfg.j])

    def __eq__(self, other):
        if not isinstance(other, ObservedStats):
            return NotImplemented
        return stats_to_dict(self) == stats_to_dict(other)


def _check_depolarizing(D: int, Q: float) -> None:
    if not 0.0 <= Q <= (D - 1) / D:
        raise InvalidArgument(f"depolarizing parameter Q={Q} outside [0, {(D - 1) / D}]")


def depolarizing_stats(cfg: ProtocolConfig, Q: float) -> ObservedStats:
    """Closed-form statistics of the depolarizing channel with parameter ``Q``."""
    D = cfg.D
    _check_depolarizing(D, Q)
    off = Q / (D - 1)
    half = 0.5 * (1.0 - D * Q / (D - 1)) + off
    p_i = np.full(D, off)
    p_i[cfg.i] = 1.0 - Q
    p_j = np.full(D, off)
    p_j[cfg.j] = 1.0 - Q
    p_phi = np.full(D, off)
    p_phi[[cfg.i, cfg.j]] = half
    return ObservedStats(cfg, p_i, p_j, p_phi, half, half, 1.0 - Q)


def depolarizing_map(rho: np.ndarray, Q: float) -> np.ndarray:
    """``(1 - D Q/(D-1)) rho + Q/(D-1) I`` applied directly."""
    D = rho.shape[0]
    _check_depolarizing(D, Q)
    return (1.0 - D * Q / (D - 1)) * rho + Q / (D - 1) * np.eye(D)


def depolarizing_kraus(dim: int, Q: float) -> KrausSet:
    """Weyl-twirl Kraus form of the depolarizing map.

    The identity carries weight ``sqrt(1 - Q'(d^2-1)/d^2)`` and every other
    Weyl operator ``sqrt(Q'/d^2)``, with ``Q' = d Q/(d-1)``. Zero-weight
    operators are kept so the operator count is always ``dim**2``.
    """
    if int(dim) != dim or dim < 2:
        raise InvalidArgument(f"dimension must be >= 2, got {dim}")
    _check_depolarizing(dim, Q)
    qq = dim * Q / (dim - 1)
    d2 = dim * dim
    w0 = math.sqrt(max(1.0 - qq * (d2 - 1) / d2, 0.0))
    w = math.sqrt(qq / d2)
    ops = weyl_operators(dim)
    return KrausSet(np.array([w0 * ops[0]] + [w * op for op in ops[1:]]))


def amplitude_damping_kraus(dim: int, p: float) -> KrausSet:
    """Amplitude damping towards ``|0>``: ``E_0 = diag(1, sqrt(1-p), ...)``
    and ``E_k = sqrt(p) |0><k|`` for ``k = 1 .. dim-1``."""
    if int(dim) != dim or dim < 2:
        raise InvalidArgument(f"dimension must be >= 2, got {dim}")
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"damping parameter p={p} outside [0, 1]")
    ops = np.zeros((dim, dim, dim), dtype=complex)
    ops[0] = np.diag([1.0] + [math.sqrt(1.0 - p)] * (dim - 1))
    for k in range(1, dim):
        ops[k, 0, k] = math.sqrt(p)
    return KrausSet(ops)


def stats_from_channel(kraus: KrausSet, cfg: ProtocolConfig) -> ObservedStats:
    """Born-rule statistics for Alice's three test states sent through ``kraus``."""
    if kraus.dim != cfg.D:
        raise InvalidArgument(f"channel dimension {kraus.dim} != protocol dimension {cfg.D}")
    phi = superposition_phi(cfg)
    rows, xs = [], []
    for psi in (ket(cfg.D, cfg.i), ket(cfg.D, cfg.j), phi):
        out = apply_channel(kraus, projector(psi))
        rows.append(np.real(np.diag(out)))
        xs.append(float(np.real(phi.conj() @ out @ phi)))
    return ObservedStats(cfg, rows[0], rows[1], rows[2], xs[0], xs[1], xs[2])


_STATS_KEYS = {"dimension", "i", "j", "p_i", "p_j", "p_phi", "p_i_phi", "p_j_phi", "p_phi_phi"}


def stats_to_dict(stats: ObservedStats) -> dict:
    d = {
        "dimension": stats.cfg.D,
        "i": stats.cfg.i,
        "j": stats.cfg.j,
        "p_i": [float(v) for v in stats.p_i],
        "p_j": [float(v) for v in stats.p_j],
        "p_phi": [float(v) for v in stats.p_phi],
        "p_i_phi": stats.p_i_phi,
        "p_j_phi": stats.p_j_phi,
        "p_phi_phi": stats.p_phi_phi,
    }
    if stats.tolerance != PROB_TOL:
        d["tolerance"] = stats.tolerance
    return d


def stats_from_dict(data: dict) -> ObservedStats:
    if not isinstance(data, dict):
        raise FormatError("stats document must be a JSON object")
    keys = set(data)
    unknown = keys - _STATS_KEYS - {"tolerance"}
    if unknown:
        raise FormatError(f"unknown keys in stats file: {sorted(unknown)}")
    missing = _STATS_KEYS - keys
    if missing:
        raise FormatError(f"missing keys in stats file: {sorted(missing)}")
    try:
        cfg = ProtocolConfig(int(data["dimension"]), int(data["i"]), int(data["j"]))
    except (TypeError, ValueError) as exc:
        raise InvalidStats(f"bad protocol parameters: {exc}") from exc
    try:
        tol = float(data.get("tolerance", PROB_TOL))
        rows = {k: np.asarray(data[k], dtype=float) for k in ("p_i", "p_j", "p_phi")}
        scalars = {k: float(data[k]) for k in ("p_i_phi", "p_j_phi", "p_phi_phi")}
    except (TypeError, ValueError) as exc:
        raise FormatError(f"non-numeric entry in stats file: {exc}") from exc
    return ObservedStats(cfg, tolerance=tol, **rows, **scalars)


def load_stats(path: str | Path) -> ObservedStats:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read stats file {path}: {exc}") from exc
    return stats_from_dict(data)


def dump_stats(stats: ObservedStats, path: str | Path) -> None:
    Path(path).write_text(json.dumps(stats_to_dict(stats), indent=2) + "\n", encoding="utf-8")


def load_kraus(path: str | Path) -> KrausSet:
    """Read ``{"dimension": d, "operators": [[[re, im], ...], ...]}``.

    Each operator is a list of ``d`` rows of ``d`` ``[re, im]`` pairs.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read Kraus file {path}: {exc}") from exc
    if not isinstance(data, dict) or set(data) != {"dimension", "operators"}:
        raise FormatError('Kraus file must contain exactly "dimension" and "operators"')
    try:
        dim = int(data["dimension"])
        arr = np.asarray(data["operators"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"malformed Kraus operators: {exc}") from exc
    if arr.ndim != 4 or arr.shape[1:] != (dim, dim, 2):
        raise FormatError(f"operators must have shape (k, {dim}, {dim}, 2), got {arr.shape}")
    return KrausSet(arr[..., 0] + 1j * arr[..., 1])
