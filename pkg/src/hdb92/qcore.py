"""Small dense linear-algebra and entropy toolkit for qudit states.

Matrices and state vectors are plain :class:`numpy.ndarray` objects. All
entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvalidChannel, InvalidState

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
EIG_CLAMP = 1e-10
PROB_TOL = 1e-9


@dataclass(frozen=True)
class ProtocolConfig:
    """Public protocol parameters: qudit dimension ``D`` and the indices ``i != j``.

    Alice encodes bit 0 as ``|i>`` and bit 1 as ``|phi> = (|i> + |j>)/sqrt(2)``.
    """

    D: int
    i: int = 0
    j: int = 1

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 2:
            raise InvalidArgument(f"dimension must be an integer >= 2, got {self.D}")
        for name in ("i", "j"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < self.D:
                raise InvalidArgument(f"{name}={v} is not a basis index for D={self.D}")
        if self.i == self.j:
            raise InvalidArgument(f"i and j must differ (both {self.i})")

    @property
    def others(self) -> np.ndarray:
        """Basis labels other than ``i`` and ``j``, ascending."""
        mask = np.ones(self.D, dtype=bool)
        mask[[self.i, self.j]] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Trace-preserving channel given by Kraus operators of shape (k, dim, dim)."""

    operators: np.ndarray

    def __post_init__(self):
        ops = np.array(self.operators, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2] or ops.shape[0] == 0:
            raise InvalidArgument(f"Kraus operators must have shape (k, d, d), got {ops.shape}")
        if not np.all(np.isfinite(ops)):
            raise InvalidArgument("Kraus operators contain NaN or Inf")
        completeness = np.einsum("kba,kbc->ac", ops.conj(), ops)
        dev = np.max(np.abs(completeness - np.eye(ops.shape[1])))
        if dev > TRACE_TOL:
            raise InvalidChannel(f"sum_k E_k^dag E_k deviates from identity by {dev:.3e}")
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def __len__(self) -> int:
        return self.operators.shape[0]


def ket(dim: int, index: int) -> np.ndarray:
    """Computational basis vector ``|index>`` in ``C^dim``."""
    if dim < 1 or not 0 <= index < dim:
        raise InvalidArgument(f"index {index} out of range for dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def superposition_phi(cfg: ProtocolConfig) -> np.ndarray:
    """The bit-1 signal state ``(|i> + |j>)/sqrt(2)``."""
    return (ket(cfg.D, cfg.i) + ket(cfg.D, cfg.j)) / math.sqrt(2)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.all(np.abs(m - m.conj().T) <= tol))


def apply_channel(kraus: KrausSet | Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Return ``sum_k E_k rho E_k^dag``.

    ``kraus`` may be a :class:`KrausSet` or a raw list of matrices, in which
    case trace preservation is checked here.
    """
    if not isinstance(kraus, KrausSet):
        kraus = KrausSet(np.asarray(kraus, dtype=complex))
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (kraus.dim, kraus.dim):
        raise InvalidArgument(f"state shape {rho.shape} does not match channel dimension {kraus.dim}")
    ops = kraus.operators
    out = np.einsum("kab,bc,kdc->ad", ops, rho, ops.conj())
    return 0.5 * (out + out.conj().T)


def eigenvalues_hermitian(m: np.ndarray) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, in descending order."""
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m):
        raise InvalidArgument("matrix is not Hermitian")
    # symmetrise so LAPACK sees exactly Hermitian input; eigvalsh is deterministic
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))[::-1].copy()


def _xlog2x_sum(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def von_neumann_entropy(rho: np.ndarray) -> float:
    """``-tr(rho log2 rho)`` computed from the spectrum."""
    lam = eigenvalues_hermitian(rho)
    if lam[-1] < -EIG_CLAMP:
        raise InvalidState(f"density operator has eigenvalue {lam[-1]:.3e}")
    tr = float(np.sum(lam))
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidState(f"density operator has trace {tr!r}")
    return _xlog2x_sum(np.clip(lam, 0.0, None))


def binary_entropy(p: float) -> float:
    """``H(p) = -p log2 p - (1-p) log2 (1-p)`` with ``H(0) = H(1) = 0``."""
    if not -1e-12 <= p <= 1 + 1e-12:
        raise InvalidArgument(f"binary entropy argument {p} outside [0, 1]")
    p = min(max(float(p), 0.0), 1.0)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_array(p: np.ndarray) -> np.ndarray:
    """Vectorised :func:`binary_entropy`; arguments are clipped to [0, 1]."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        t1 = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return t0 + t1


def prob_dist(weights: Sequence[float], tol: float = PROB_TOL) -> np.ndarray:
    """Validate a probability vector, clamping each weight into [0, 1].

    Weights may stray outside [0, 1] by at most 1e-9; the total must be 1
    within ``tol``.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if not np.all(np.isfinite(w)):
        raise InvalidArgument("probabilities must be finite")
    if w.size and (w.min() < -PROB_TOL or w.max() > 1 + PROB_TOL):
        raise InvalidArgument(f"probabilities outside [0, 1]: min {w.min()}, max {w.max()}")
    total = float(np.sum(w))
    if abs(total - 1.0) > tol:
        raise InvalidArgument(f"probabilities sum to {total!r}, not 1 (tolerance {tol})")
    return np.clip(w, 0.0, 1.0)


def shannon_entropy(dist: Sequence[float], tol: float = PROB_TOL) -> float:
    return _xlog2x_sum(prob_dist(dist, tol))


def weyl_operators(dim: int) -> list[np.ndarray]:
    """Generalised Pauli operators ``X^a Z^b``, ordered with ``a`` major.

    ``X|k> = |k+1 mod dim>`` and ``Z|k> = w^k |k>`` with ``w = exp(2 pi i / dim)``.
    The first element is the identity.
    """
    if int(dim) != dim or dim < 2:
        raise InvalidArgument(f"Weyl operators need dim >= 2, got {dim}")
    shift = np.roll(np.eye(dim, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    ops = []
    for a in range(dim):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(dim):
            ops.append(xa @ np.linalg.matrix_power(clock, b))
    return ops


def partial_trace_first(rho: np.ndarray, dim_a: int) -> np.ndarray:
    """Trace out the leading tensor factor of dimension ``dim_a``."""
    n = rho.shape[0]
    if n % dim_a:
        raise InvalidArgument(f"cannot split dimension {n} by {dim_a}")
    dim_b = n // dim_a
    return np.einsum("abad->bd", rho.reshape(dim_a, dim_b, dim_a, dim_b))
