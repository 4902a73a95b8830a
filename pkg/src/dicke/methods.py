"""Single entry point running any solver into a population table."""

from __future__ import annotations

import numpy as np

from .ladder import DickeLadder
from .oracles import (discrete_time_propagate, evaluate_series,
                      integrate_rate_equations, series_coefficients)
from .precision import PrecisionPolicy
from .residues import ResidueTerm, assemble_table, evaluate_distribution
from .states import DiagonalState, EvolutionTable, check_time_grid
from .trajectories import estimate

METHODS = ("residue", "jordan", "laplace", "series", "ode", "discrete", "mc")
EXACT_METHODS = ("residue", "jordan", "laplace", "series", "ode")


def solve_populations(ladder: DickeLadder, initial_m0: int | None = None,
                      times=None, method: str = "residue",
                      policy: PrecisionPolicy | None = None,
                      rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                      series_order: int = 80, series_tol: float = 1e-10,
                      delta_t: float | None = None,
                      n_traj: int = 100_000, seed: int = 0,
                      n_workers: int = 1) -> EvolutionTable:
    """Populations on a grid by the chosen method.

    `policy` steers the residue/laplace/jordan working precision;
    `rel_tol`/`abs_tol` the reference integrator; `series_order` and
    `series_tol` the certified power series; `delta_t` the first-order
    discrete chain; `n_traj`/`seed`/`n_workers` the Monte Carlo engine.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    grid = check_time_grid(times)
    n = ladder.n_emitters
    m0 = n if initial_m0 is None else int(initial_m0)
    if not (0 <= m0 <= n):
        raise ValueError(f"initial_m0 must lie in [0, N], got {m0}")
    policy = policy or PrecisionPolicy()

    if method == "residue":
        return evaluate_distribution(ladder, m0, policy, grid)

    if method == "laplace":
        from .spectral import invert_laplace
        rows: list[list[ResidueTerm] | None] = [
            invert_laplace(ladder, m, m0, policy) if m <= m0 else None
            for m in range(n + 1)]
        return assemble_table(ladder, m0, grid, rows, "laplace", policy)

    if method == "jordan":
        from .spectral import jordan_decompose, propagate
        decomp = jordan_decompose(ladder, policy)
        start = np.zeros(n + 1)
        start[m0] = 1.0
        initial = DiagonalState(populations=start, time=0.0)
        populations = np.empty((n + 1, grid.size))
        for j, t in enumerate(grid):
            populations[:, j] = propagate(decomp, ladder.gamma, float(t), initial).populations
        meta = {"method": "jordan", "bits": decomp.bits, "exact_entries": decomp.exact}
        return EvolutionTable(n_emitters=n, gamma=ladder.gamma, initial_m0=m0,
                              times=grid, populations=populations, method="jordan",
                              meta=meta)

    if method == "series":
        coeffs = series_coefficients(ladder, m0, series_order)
        populations = np.empty((n + 1, grid.size))
        worst_bound = 0.0
        for j, t in enumerate(grid):
            state, bound = evaluate_series(coeffs, ladder.gamma, float(t), tol=series_tol)
            populations[:, j] = state.populations
            worst_bound = max(worst_bound, bound)
        meta = {"method": "series", "order": series_order, "tail_bound": worst_bound}
        return EvolutionTable(n_emitters=n, gamma=ladder.gamma, initial_m0=m0,
                              times=grid, populations=populations, method="series",
                              meta=meta)

    if method == "ode":
        return integrate_rate_equations(ladder, m0, grid, rel_tol=rel_tol, abs_tol=abs_tol)

    if method == "discrete":
        dt = delta_t if delta_t is not None else 0.1 / (ladder.gamma * ladder.h_max)
        populations = np.empty((n + 1, grid.size))
        for j, t in enumerate(grid):
            steps = int(round(float(t) / dt))
            populations[:, j] = discrete_time_propagate(ladder, m0, dt, steps).populations
        meta = {"method": "discrete", "delta_t": dt}
        return EvolutionTable(n_emitters=n, gamma=ladder.gamma, initial_m0=m0,
                              times=grid, populations=populations, method="discrete",
                              meta=meta)

    mc = estimate(ladder, m0, grid, n_traj=n_traj, root_seed=seed, n_workers=n_workers)
    meta = {"method": "mc", "n_traj": n_traj, "seed": seed, "n_workers": n_workers}
    return EvolutionTable(n_emitters=n, gamma=ladder.gamma, initial_m0=m0,
                          times=grid, populations=mc.populations, method="mc",
                          meta=meta, std_errors=mc.std_errors)
