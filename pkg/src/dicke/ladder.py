"""Problem definition for the collective-decay ladder.

An ensemble of N identical two-level emitters decaying through the shared
channel stays on the ladder of symmetric states |m>, m = 0..N.  The jump
m -> m-1 happens at rate gamma*h_m with h_m = m*(N+1-m), so everything any
solver needs is the integer ladder h_0..h_N, the bidiagonal rate generator
built from it, and the bookkeeping of which ladder values coincide (those
coincidences are what produce double poles / size-2 Jordan blocks
downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_EMITTERS = 4096


@dataclass(frozen=True)
class DickeLadder:
    """Immutable problem instance: emitter count, decay rate, h ladder."""

    n_emitters: int
    gamma: float
    h: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.n_emitters

    @property
    def h_max(self) -> int:
        return max(self.h)

    def h_array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)


@dataclass(frozen=True)
class Pole:
    """One distinct denominator root: ladder value, how often it occurs
    inside the consumed index range, and the lowest index attaining it."""

    value: int
    multiplicity: int
    index: int


@dataclass(frozen=True)
class PoleSet:
    target_m: int
    initial_m0: int
    poles: tuple[Pole, ...]

    def values(self) -> tuple[int, ...]:
        return tuple(p.value for p in self.poles)

    def total_multiplicity(self) -> int:
        return sum(p.multiplicity for p in self.poles)


@dataclass(frozen=True)
class RateMatrix:
    """Lower-bidiagonal generator in the top-down ordering: row/column i
    corresponds to state m = N - i, diagonal -h_m, subdiagonal feeds m-1."""

    n_emitters: int
    diagonal: tuple[int, ...]     # (-h_N, ..., -h_0)
    subdiagonal: tuple[int, ...]  # (h_N, ..., h_1)

    def to_dense(self, dtype=float) -> np.ndarray:
        dim = self.n_emitters + 1
        mat = np.zeros((dim, dim), dtype=dtype)
        mat[np.diag_indices(dim)] = self.diagonal
        mat[np.arange(1, dim), np.arange(dim - 1)] = self.subdiagonal
        return mat


def build_ladder(n_emitters: int, gamma: float,
                 max_emitters: int = DEFAULT_MAX_EMITTERS) -> DickeLadder:
    """Create the problem instance with exact integer h_m = m*(N+1-m)."""
    if not isinstance(n_emitters, (int, np.integer)) or n_emitters < 1:
        raise ValueError(f"n_emitters must be a positive integer, got {n_emitters!r}")
    if n_emitters > max_emitters:
        raise ValueError(f"n_emitters={n_emitters} exceeds the configured maximum {max_emitters}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    n = int(n_emitters)
    h = tuple(m * (n + 1 - m) for m in range(n + 1))
    return DickeLadder(n_emitters=n, gamma=float(gamma), h=h)


def classify_poles(ladder: DickeLadder, target_m: int, initial_m0: int) -> PoleSet:
    """Distinct ladder values among h_target..h_m0 with their occurrence
    count inside [target_m, m0] (the ladder structure caps the count at 2)."""
    n = ladder.n_emitters
    if not (0 <= target_m <= initial_m0 <= n):
        raise ValueError(
            f"need 0 <= target_m <= initial_m0 <= N, got m={target_m}, m0={initial_m0}, N={n}")
    first_index: dict[int, int] = {}
    counts: dict[int, int] = {}
    for k in range(target_m, initial_m0 + 1):
        v = ladder.h[k]
        counts[v] = counts.get(v, 0) + 1
        first_index.setdefault(v, k)
    poles = tuple(sorted(
        (Pole(value=v, multiplicity=c, index=first_index[v]) for v, c in counts.items()),
        key=lambda p: p.value))
    return PoleSet(target_m=target_m, initial_m0=initial_m0, poles=poles)


def build_rate_matrix(ladder: DickeLadder) -> RateMatrix:
    n = ladder.n_emitters
    diagonal = tuple(-ladder.h[m] for m in range(n, -1, -1))
    subdiagonal = tuple(ladder.h[m] for m in range(n, 0, -1))
    return RateMatrix(n_emitters=n, diagonal=diagonal, subdiagonal=subdiagonal)
