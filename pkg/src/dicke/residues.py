"""Closed-form populations as finite sums of (A + B*g*t) * exp(-h*g*t).

For a start state m0 and a target m <= m0 the population is the sum of
residues of

    (-1)^(m0-m) * (h_m0 ... h_{m+1}) * exp(-z*g*t) / ((z - h_m0)...(z - h_m))

over the distinct ladder values h_p with p in [m, m0].  A value occurring
twice in the range is a double pole and contributes the non-exponential
g*t * exp(-h*g*t) piece.  Coefficients are assembled in exact integer
arithmetic (pole gaps are integer differences of the h ladder; the
derivative at a double pole is expanded through the logarithmic derivative
of the denominator product, never differentiated numerically).  Only the
final evaluation rounds, at a precision chosen per `PrecisionPolicy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .ladder import DickeLadder, classify_poles
from .precision import (DOUBLE_BITS, PrecisionPolicy, fraction_to_float,
                        fraction_to_mpf, resolve_bits, rounding_defect)
from .states import EvolutionTable, check_time_grid

_ZERO = Fraction(0)


@dataclass(frozen=True)
class ResidueTerm:
    """One pole's contribution (const + linear*g*t) * exp(-pole*g*t).

    `const`/`linear` are exact rationals; `bits` is the mantissa width the
    policy resolved for evaluating the full sum (not part of equality:
    two derivations of the same expansion compare equal regardless of the
    precision they were requested at).
    """

    pole: int
    multiplicity: int
    const: Fraction
    linear: Fraction
    bits: int = field(default=DOUBLE_BITS, compare=False)


def _prefix_suffix_products(values: list[int]) -> list[int]:
    """For each k, the product of all entries except the k-th."""
    k = len(values)
    prefix = [1] * (k + 1)
    for i, v in enumerate(values):
        prefix[i + 1] = prefix[i] * v
    suffix = 1
    out = [0] * k
    for i in range(k - 1, -1, -1):
        out[i] = prefix[i] * suffix
        suffix *= values[i]
    return out


def exact_terms(ladder: DickeLadder, target_m: int, initial_m0: int
                ) -> list[tuple[int, int, Fraction, Fraction]]:
    """Exact (pole, multiplicity, const, linear) tuples, poles ascending."""
    h = ladder.h
    m, m0 = target_m, initial_m0
    pole_set = classify_poles(ladder, m, m0)
    sign = -1 if (m0 - m) % 2 else 1
    numerator = 1
    for k in range(m + 1, m0 + 1):
        numerator *= h[k]
    signed_num = sign * numerator

    out = []
    for pole in pole_set.poles:
        v = pole.value
        gaps = [v - h[k] for k in range(m, m0 + 1) if h[k] != v]
        den = 1
        for g in gaps:
            den *= g
        if pole.multiplicity == 1:
            out.append((v, 1, Fraction(signed_num, den), _ZERO))
        else:
            # double pole: with q(z) = signed_num / prod(z - h_k) over the
            # non-degenerate factors, the residue is [q'(v) - g*t*q(v)] *
            # exp(-v*g*t), and q'(v) = -q(v) * sum_k 1/(v - h_k).
            c = Fraction(signed_num, den)
            if gaps:
                except_k = _prefix_suffix_products(gaps)
                s_num = sum(except_k)
                s = Fraction(s_num, den)
            else:
                s = _ZERO
            out.append((v, 2, -c * s, -c))
    return out


def terms_t0_delta(target_m: int, initial_m0: int) -> int:
    return 1 if target_m == initial_m0 else 0


def residue_terms(ladder: DickeLadder, target_m: int, initial_m0: int,
                  policy: PrecisionPolicy | None = None) -> list[ResidueTerm]:
    """Term list for rho_m(t) from start state m0, with evaluation
    precision resolved by the t=0 reconstruction canary."""
    policy = policy or PrecisionPolicy()
    raw = exact_terms(ladder, target_m, initial_m0)
    delta = terms_t0_delta(target_m, initial_m0)
    bits, _ = resolve_bits([a for _, _, a, _ in raw], delta, policy)
    return [ResidueTerm(pole=v, multiplicity=mult, const=a, linear=b, bits=bits)
            for v, mult, a, b in raw]


def above_equator_closed_form(ladder: DickeLadder, target_m: int) -> list[ResidueTerm]:
    """All-simple-pole expansion for a fully inverted start, valid only in
    the upper half of the ladder where the consumed h values are distinct."""
    n = ladder.n_emitters
    if n % 2 == 0:
        valid = target_m >= n // 2 + 1
    else:
        valid = target_m >= (n + 1) // 2
    if not (0 <= target_m <= n) or not valid:
        raise ValueError(
            f"closed form only holds above the equator; m={target_m} is outside "
            f"its domain for N={n}")
    h = ladder.h
    sign = -1 if (n - target_m) % 2 else 1
    numerator = 1
    for k in range(target_m + 1, n + 1):
        numerator *= h[k]
    signed_num = sign * numerator
    out = []
    for j in range(target_m, n + 1):
        den = 1
        for jp in range(target_m, n + 1):
            if jp != j:
                den *= h[j] - h[jp]
        out.append(ResidueTerm(pole=h[j], multiplicity=1,
                               const=Fraction(signed_num, den), linear=_ZERO))
    out.sort(key=lambda t: t.pole)
    return out


def evaluate_population(terms: list[ResidueTerm], gamma: float, t: float) -> float:
    """Sum the expansion at one time; result downgraded to float64."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if not terms:
        return 0.0
    bits = max(term.bits for term in terms)
    gt = gamma * t
    if bits <= DOUBLE_BITS:
        return math.fsum(
            (fraction_to_float(term.const) + fraction_to_float(term.linear) * gt)
            * math.exp(-term.pole * gt)
            for term in terms)
    with mpmath.workprec(bits):
        gt_mp = mpmath.mpf(gamma) * mpmath.mpf(t)
        total = mpmath.mpf(0)
        for term in terms:
            expo = mpmath.exp(-term.pole * gt_mp)
            total += (fraction_to_mpf(term.const) + fraction_to_mpf(term.linear) * gt_mp) * expo
        return float(total)


def _row_eval_double(terms: list[ResidueTerm], gamma: float, grid: np.ndarray) -> np.ndarray:
    poles = np.array([t.pole for t in terms], dtype=float)
    consts = np.array([fraction_to_float(t.const) for t in terms])
    linears = np.array([fraction_to_float(t.linear) for t in terms])
    gt = gamma * grid
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        weights = consts[:, None] + linears[:, None] * gt[None, :]
        return (weights * np.exp(-poles[:, None] * gt[None, :])).sum(axis=0)


def assemble_table(ladder: DickeLadder, initial_m0: int, grid: np.ndarray,
                   rows_terms: list[list[ResidueTerm] | None], method: str,
                   policy: PrecisionPolicy) -> EvolutionTable:
    """Evaluate per-row term lists over a grid; mpf rows share one
    exp(-h*g*t) cache per time since all rows draw poles from the same
    ladder values."""
    n = ladder.n_emitters
    bits_per_row = np.array([max((t.bits for t in row), default=DOUBLE_BITS)
                             if row is not None else DOUBLE_BITS
                             for row in rows_terms], dtype=int)
    populations = np.zeros((n + 1, grid.size))
    mp_rows = [m for m in range(n + 1)
               if rows_terms[m] and bits_per_row[m] > DOUBLE_BITS]
    for m in range(n + 1):
        terms = rows_terms[m]
        if not terms or m in mp_rows:
            continue
        populations[m] = _row_eval_double(terms, ladder.gamma, grid)

    if mp_rows:
        work_bits = int(max(bits_per_row[m] for m in mp_rows))
        with mpmath.workprec(work_bits):
            converted = {
                m: [(t.pole, fraction_to_mpf(t.const), fraction_to_mpf(t.linear))
                    for t in rows_terms[m]]
                for m in mp_rows
            }
            for j, t in enumerate(grid):
                gt = mpmath.mpf(ladder.gamma) * mpmath.mpf(float(t))
                exp_cache: dict[int, mpmath.mpf] = {}
                for m in mp_rows:
                    total = mpmath.mpf(0)
                    for pole, const, linear in converted[m]:
                        expo = exp_cache.get(pole)
                        if expo is None:
                            expo = mpmath.exp(-pole * gt)
                            exp_cache[pole] = expo
                        total += (const + linear * gt) * expo
                    populations[m, j] = float(total)

    t0_defect = [rounding_defect([t.const for t in row], terms_t0_delta(m, initial_m0),
                                 int(bits_per_row[m])) if row else 0.0
                 for m, row in enumerate(rows_terms)]
    meta = {
        "method": method,
        "precision_mode": policy.mode,
        "bits": bits_per_row.tolist(),
        "t0_defect": t0_defect,
    }
    return EvolutionTable(n_emitters=n, gamma=ladder.gamma, initial_m0=initial_m0,
                          times=grid, populations=populations, method=method,
                          meta=meta)


def evaluate_distribution(ladder: DickeLadder, initial_m0: int,
                          policy: PrecisionPolicy | None = None,
                          time_grid=None) -> EvolutionTable:
    """Full (N+1) x |grid| population table from start state m0.

    Rows above m0 are exactly zero (decay only lowers the excitation
    number).  Per-row metadata records the resolved mantissa bits and the
    t=0 reconstruction defect.
    """
    policy = policy or PrecisionPolicy()
    grid = check_time_grid(time_grid)
    n = ladder.n_emitters
    if not (0 <= initial_m0 <= n):
        raise ValueError(f"initial_m0 must lie in [0, N], got {initial_m0}")

    rows_terms: list[list[ResidueTerm] | None] = []
    for m in range(n + 1):
        if m > initial_m0:
            rows_terms.append(None)
            continue
        raw = exact_terms(ladder, m, initial_m0)
        bits, _ = resolve_bits([a for _, _, a, _ in raw],
                               terms_t0_delta(m, initial_m0), policy)
        rows_terms.append([ResidueTerm(v, mult, a, b, bits) for v, mult, a, b in raw])
    return assemble_table(ladder, initial_m0, grid, rows_terms, "residue", policy)
