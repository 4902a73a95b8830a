"""Jump-unraveling Monte Carlo for the decay cascade.

Between jumps the collective state only loses norm, so a trajectory is
fully determined by its waiting times: each tau_m solves
exp(-g*h_m*tau_m) = p_m with p_m uniform on (0, 1).  That makes sampling
a handful of logarithms; the inter-jump state-vector integration is
exact, not approximated away.

Reproducibility contract: trajectory i of root seed s draws from the
generator seeded with (s, i), so estimates are bit-identical regardless
of scheduling or worker count (per-trajectory occupation counts are
integers and their sum is order-free).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ladder import DickeLadder
from .states import check_time_grid


@dataclass(frozen=True)
class TrajectoryRecord:
    """One unraveling: uniform draws, waiting times and jump instants,
    all ordered from the start state downward (index 0 is the first jump,
    out of m0)."""

    seed_index: int | None
    start_m: int
    draws: np.ndarray            # p_{m0}, ..., p_1 in (0, 1)
    waiting_times: np.ndarray    # tau_{m0}, ..., tau_1
    jump_times: np.ndarray       # t_{m0} < ... < t_1 (ascending)


def _draw_open_unit(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniforms on the open interval: exact zeros are redrawn (they would
    give an infinite waiting time)."""
    draws = rng.random(size)
    while True:
        zeros = draws == 0.0
        if not zeros.any():
            return draws
        draws[zeros] = rng.random(int(zeros.sum()))


def sample_trajectory(ladder: DickeLadder, initial_m0: int,
                      rng: np.random.Generator,
                      seed_index: int | None = None) -> TrajectoryRecord:
    """Draw the m0 waiting times of one cascade from the given stream."""
    n = ladder.n_emitters
    if not (0 <= initial_m0 <= n):
        raise ValueError(f"initial_m0 must lie in [0, N], got {initial_m0}")
    draws = _draw_open_unit(rng, initial_m0)
    rates = ladder.gamma * ladder.h_array()[initial_m0:0:-1]  # h_{m0}, ..., h_1
    waiting = -np.log(draws) / rates
    jumps = np.cumsum(waiting)
    return TrajectoryRecord(seed_index=seed_index, start_m=initial_m0,
                            draws=draws, waiting_times=waiting, jump_times=jumps)


def bin_trajectory(record: TrajectoryRecord, time_grid) -> np.ndarray:
    """Occupied state index per grid time.

    Right-continuous convention: at the jump instant the post-jump state
    is already occupied (a measure-zero choice fixed for determinism).
    """
    grid = check_time_grid(time_grid)
    n_jumped = np.searchsorted(record.jump_times, grid, side="right")
    return record.start_m - n_jumped


@dataclass(frozen=True)
class McEstimate:
    """Sample means with binomial standard errors over n_traj cascades.

    Each trajectory occupies exactly one state per grid time, so every
    column of `counts` sums to n_traj exactly.
    """

    n_emitters: int
    initial_m0: int
    times: np.ndarray
    counts: np.ndarray           # (N+1) x |grid| occupation counts, int64
    n_traj: int
    seed: int

    @property
    def populations(self) -> np.ndarray:
        return self.counts / self.n_traj

    @property
    def std_errors(self) -> np.ndarray:
        p = self.populations
        return np.sqrt(p * (1.0 - p) / self.n_traj)


def _count_chunk(ladder: DickeLadder, initial_m0: int, grid: np.ndarray,
                 root_seed: int, start: int, stop: int) -> np.ndarray:
    counts = np.zeros((ladder.n_emitters + 1, grid.size), dtype=np.int64)
    cols = np.arange(grid.size)
    for idx in range(start, stop):
        rng = np.random.default_rng((root_seed, idx))
        record = sample_trajectory(ladder, initial_m0, rng, seed_index=idx)
        states = bin_trajectory(record, grid)
        counts[states, cols] += 1
    return counts


def estimate(ladder: DickeLadder, initial_m0: int, time_grid, n_traj: int,
             root_seed: int, n_workers: int = 1) -> McEstimate:
    """Average the occupation indicators of n_traj trajectories."""
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if n_workers < 1:
        raise ValueError("n_workers must be at least 1")
    grid = check_time_grid(time_grid)
    if n_workers == 1:
        counts = _count_chunk(ladder, initial_m0, grid, root_seed, 0, n_traj)
    else:
        bounds = np.linspace(0, n_traj, n_workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_count_chunk, ladder, initial_m0, grid,
                                   root_seed, int(a), int(b))
                       for a, b in zip(bounds[:-1], bounds[1:])]
            partials = [f.result() for f in futures]
        counts = np.zeros((ladder.n_emitters + 1, grid.size), dtype=np.int64)
        for part in partials:  # fixed chunk order; integer sums are order-free anyway
            counts += part
    return McEstimate(n_emitters=ladder.n_emitters, initial_m0=initial_m0,
                      times=grid, counts=counts, n_traj=n_traj, seed=root_seed)
