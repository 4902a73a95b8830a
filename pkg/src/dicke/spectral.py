"""Spectral solvers for the bidiagonal rate generator.

The generator H (top-down ordering, diagonal -h_N..-h_0) has at most
two-fold degenerate eigenvalues because of the ladder symmetry
h_m = h_{N+1-m}.  Each degenerate pair carries a size-2 Jordan block
(a second-order exceptional point), so the propagator picks up
g*t*exp(-h*g*t) pieces on top of plain exponentials.

Everything here uses closed-form entries: eigenvectors, generalized
eigenvectors, the column-permuted lower-triangular similarity matrix and
the block entries of its inverse are explicit products of integer ladder
gaps.  No generic eigensolver, Jordan algorithm or LU inversion is ever
run; candidate vectors are validated against their defining equations
instead of trusting the index windows.

The resolvent (z*1 - H)^{-1} is evaluated from its rational closed form,
and inverting its Laplace representation reproduces the residue expansion
through an independent code path (poles sit at z = -h_p here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .ladder import DickeLadder, classify_poles
from .precision import (DOUBLE_BITS, PrecisionPolicy, fraction_to_float,
                        fraction_to_mpf, resolve_bits)
from .residues import ResidueTerm, _prefix_suffix_products, terms_t0_delta
from .states import DiagonalState

EXACT_RATIONAL_LIMIT = 64   # build T entries as exact rationals up to this N


class SingularityError(ZeroDivisionError):
    """Resolvent evaluated on one of its poles."""


def _h_ext(ladder: DickeLadder) -> list[int]:
    # h_{N+1} = 0 closes the index algebra (same value as h_0)
    return list(ladder.h) + [0]


def _middle_label(n_emitters: int) -> int:
    return (n_emitters + 1) // 2  # ceil(N/2)


def _eigen_labels(n_emitters: int) -> list[int]:
    n = _middle_label(n_emitters)
    labels = list(range(n + 1, n_emitters + 2))
    if n_emitters % 2 == 1:
        labels.insert(0, n)
    return labels


def _v_components(h: list[int], n_emitters: int, j: int, ratio) -> list:
    """Eigenvector of eigenvalue -h_j, physical components m = 0..N.

    Nonzero on m <= N+1-j; the leading component (m = N+1-j) is the empty
    product 1.  `ratio(num, den)` fixes the arithmetic (exact or mpf).
    """
    jbar = n_emitters + 1 - j
    out = [ratio(0, 1)] * (n_emitters + 1)
    for m in range(min(jbar, n_emitters) + 1):
        mbar = n_emitters + 1 - m
        acc = ratio(1, 1)
        for i in range(j + 1, mbar + 1):
            acc = acc * ratio(h[i - 1], h[i] - h[j])
        out[m] = acc
    return out


def _w_components(h: list[int], n_emitters: int, j: int, ratio) -> list:
    """Generalized eigenvector solving (H + h_j*1) w = v^{(j)}."""
    jbar = n_emitters + 1 - j
    out = [ratio(0, 1)] * (n_emitters + 1)
    for m in range(jbar + 1, j + 1):
        mbar = n_emitters + 1 - m
        acc = ratio(1, h[j - 1])
        for i in range(mbar + 1, j):
            acc = acc * ratio(h[i] - h[j], h[i - 1])
        out[m] = acc
    for m in range(jbar + 1):
        mbar = n_emitters + 1 - m
        prod = ratio(1, 1)
        for i in range(j + 1, mbar + 1):
            prod = prod * ratio(h[i - 1], h[i] - h[j])
        tail = ratio(0, 1)
        for i in range(mbar + 1, n_emitters + 2):
            tail = tail + ratio(1, h[i] - h[j])
        out[m] = prod * tail
    return out


def _apply_generator(h: list[int], vec: list) -> list:
    """(H x)_m = -h_m x_m + h_{m+1} x_{m+1} in physical ordering."""
    n = len(vec) - 1
    out = []
    for m in range(n + 1):
        val = -h[m] * vec[m]
        if m < n:
            val = val + h[m + 1] * vec[m + 1]
        out.append(val)
    return out


def _validate_eigenpair(h, vec, j, generalized_of=None, tol=None):
    """Check H v = -h_j v, or (H + h_j) w = v for generalized vectors."""
    hv = _apply_generator(h, vec)
    if generalized_of is None:
        resid = [hv[m] + h[j] * vec[m] for m in range(len(vec))]
    else:
        resid = [hv[m] + h[j] * vec[m] - generalized_of[m] for m in range(len(vec))]
    if tol is None:
        if any(r != 0 for r in resid):
            raise ArithmeticError(f"closed-form vector for label j={j} fails its defining equation")
    else:
        scale = max(abs(float(v)) for v in vec) * max(h[:-1]) if vec else 1.0
        worst = max(abs(float(r)) for r in resid)
        if worst > tol * max(scale, 1.0):
            raise ArithmeticError(
                f"vector for label j={j} residual {worst:.3e} above tolerance")


def eigenvector(ladder: DickeLadder, j: int) -> np.ndarray:
    """Closed-form eigenvector for the eigenvalue label j (j = N+1 is the
    zero mode), in physical ordering, validated against H v = -h_j v."""
    n_emitters = ladder.n_emitters
    if j not in _eigen_labels(n_emitters):
        raise ValueError(f"no eigenvector label j={j} for N={n_emitters}")
    h = _h_ext(ladder)
    vec = _v_components(h, n_emitters, j, lambda a, b: Fraction(a, b))
    _validate_eigenpair(h, vec, j)
    return np.array([fraction_to_float(c) for c in vec])


def generalized_eigenvector(ladder: DickeLadder, j: int) -> np.ndarray:
    """Jordan partner for a doubly degenerate eigenvalue label j."""
    n_emitters = ladder.n_emitters
    n = _middle_label(n_emitters)
    if not (n + 1 <= j <= n_emitters):
        raise ValueError(
            f"label j={j} has no generalized eigenvector for N={n_emitters} "
            f"(degenerate labels are {n + 1}..{n_emitters})")
    h = _h_ext(ladder)
    ratio = lambda a, b: Fraction(a, b)
    vec = _w_components(h, n_emitters, j, ratio)
    _validate_eigenpair(h, vec, j, generalized_of=_v_components(h, n_emitters, j, ratio))
    return np.array([fraction_to_float(c) for c in vec])


@dataclass
class JordanDecomposition:
    """Block structure plus the permuted-triangular similarity data.

    `tilde` is lower triangular in the top-down row ordering (row i is
    state m = N - i); `permutation[c]` gives the tilde column holding the
    c-th column of the paper-ordered similarity matrix T, whose column
    blocks match `blocks`.  Entries are exact rationals up to
    EXACT_RATIONAL_LIMIT emitters and mpf beyond; `bits` is the working
    precision used for propagation.
    """

    ladder: DickeLadder
    blocks: tuple[tuple[int, int], ...]          # (eigenvalue, size) in T order
    tilde: list                                  # (N+1) x (N+1), rows top-down
    tilde_inv: list
    permutation: tuple[int, ...]
    pair_positions: tuple[tuple[int, int, int], ...]   # (tilde col of v, of w, eigenvalue)
    single_positions: tuple[tuple[int, int], ...]      # (tilde col, eigenvalue)
    bits: int
    exact: bool

    def __post_init__(self):
        self._work_cache = None

    @property
    def n_emitters(self) -> int:
        return self.ladder.n_emitters

    def similarity(self) -> np.ndarray:
        """Paper-ordered T as float64 (diagnostic view of the exact data)."""
        dim = self.n_emitters + 1
        out = np.zeros((dim, dim))
        for c in range(dim):
            k = self.permutation[c]
            for i in range(dim):
                out[i, c] = _entry_to_float(self.tilde[i][k])
        return out

    def similarity_inverse(self) -> np.ndarray:
        dim = self.n_emitters + 1
        out = np.zeros((dim, dim))
        for r in range(dim):
            k = self.permutation[r]
            for i in range(dim):
                out[r, i] = _entry_to_float(self.tilde_inv[k][i])
        return out

    def _work_matrices(self):
        """tilde / tilde_inv converted once to the propagation precision."""
        if self._work_cache is not None:
            return self._work_cache
        dim = self.n_emitters + 1
        if self.bits <= DOUBLE_BITS:
            t = np.array([[_entry_to_float(self.tilde[i][k]) for k in range(dim)]
                          for i in range(dim)])
            tinv = np.array([[_entry_to_float(self.tilde_inv[i][k]) for k in range(dim)]
                             for i in range(dim)])
        else:
            with mpmath.workprec(self.bits):
                t = [[_entry_to_mpf(self.tilde[i][k]) for k in range(dim)]
                     for i in range(dim)]
                tinv = [[_entry_to_mpf(self.tilde_inv[i][k]) for k in range(dim)]
                        for i in range(dim)]
        self._work_cache = (t, tinv)
        return self._work_cache


def _entry_to_float(entry) -> float:
    if isinstance(entry, Fraction):
        return fraction_to_float(entry)
    return float(entry)


def _entry_to_mpf(entry):
    if isinstance(entry, Fraction):
        return fraction_to_mpf(entry)
    return mpmath.mpf(entry)


def _log2_magnitude(entry) -> float:
    if isinstance(entry, Fraction):
        if entry == 0:
            return 0.0
        return float(entry.numerator.bit_length() - entry.denominator.bit_length())
    if entry == 0:
        return 0.0
    return float(mpmath.mag(entry))


def _t11_inv_entry(h, n_emitters, m, j, ratio):
    """Closed-form inverse entry for the generalized-vector block,
    labels n+1 <= m <= j <= N."""
    n = _middle_label(n_emitters)
    acc = ratio(h[m], 1)
    for i in range(m + 1, j + 1):
        acc = acc * ratio(h[i], h[i] - h[m])
    for i in range(n + 1, m):
        acc = acc * ratio(h[i], h[i] - h[m]) * ratio(h[i], h[i] - h[m])
    if n_emitters % 2 == 1:
        acc = acc * ratio(h[n], h[n] - h[m])
    return acc


def _t22_inv_entry(h, n_emitters, m, j, ratio):
    """Closed-form inverse entry for the eigenvector block, row state m,
    column label j, nonzero for j <= N+1-m."""
    mbar = n_emitters + 1 - m
    acc = ratio(1, 1)
    for i in range(j, mbar):
        acc = acc * ratio(h[i], h[i] - h[mbar])
    return acc


def _estimate_propagation_bits(tilde, tilde_inv, dim: int) -> int:
    max_t = max(_log2_magnitude(tilde[i][k]) for i in range(dim) for k in range(dim))
    max_ti = max(_log2_magnitude(tilde_inv[i][k]) for i in range(dim) for k in range(dim))
    return int(max(0.0, max_t) + max(0.0, max_ti) + math.log2(dim) + 40)


def jordan_decompose(ladder: DickeLadder,
                     policy: PrecisionPolicy | None = None) -> JordanDecomposition:
    """Assemble the block decomposition from closed-form entries.

    Exact rational entries up to EXACT_RATIONAL_LIMIT emitters, mpf above.
    The propagation precision is sized from the entry magnitudes (the
    later similarity matvecs cancel down from products of those entries).
    """
    policy = policy or PrecisionPolicy()
    n_emitters = ladder.n_emitters
    n = _middle_label(n_emitters)
    dim = n_emitters + 1
    h = _h_ext(ladder)

    if policy.mode == "double":
        # plain float64 entries: fast, and honest about what doubles can do
        tilde, tilde_inv, tilde_labels = _build_tilde(
            h, n_emitters, n, lambda a, b: a / b, tol=1e-8)
        bits = DOUBLE_BITS
        exact = False
    else:
        exact = n_emitters <= EXACT_RATIONAL_LIMIT
        attempt_bits = max(policy.mantissa_bits, 80)
        while True:
            if exact:
                ratio = lambda a, b: Fraction(a, b)
                built = _build_tilde(h, n_emitters, n, ratio, tol=None)
            else:
                with mpmath.workprec(attempt_bits):
                    ratio = lambda a, b: mpmath.mpf(a) / mpmath.mpf(b)
                    built = _build_tilde(h, n_emitters, n, ratio,
                                         tol=2.0 ** (-(attempt_bits - 60)))
            tilde, tilde_inv, tilde_labels = built
            needed = _estimate_propagation_bits(tilde, tilde_inv, dim)
            if policy.mode == "bits":
                bits = policy.mantissa_bits
            else:
                bits = max(DOUBLE_BITS, needed)
                if bits > policy.max_bits:
                    raise_from_cap(bits, policy)
            if exact or bits <= attempt_bits:
                break
            attempt_bits = bits  # rebuild mpf entries at the full working precision

    # T ordering: [v_n (odd)] then (v_j, w_j) pairs ascending j, then v_{N+1}
    t_labels: list[tuple[str, int]] = []
    if n_emitters % 2 == 1:
        t_labels.append(("v", n))
    for j in range(n + 1, n_emitters + 1):
        t_labels.append(("v", j))
        t_labels.append(("w", j))
    t_labels.append(("v", n_emitters + 1))

    tilde_index = {lab: k for k, lab in enumerate(tilde_labels)}
    permutation = tuple(tilde_index[lab] for lab in t_labels)

    blocks: list[tuple[int, int]] = []
    pair_positions = []
    single_positions = []
    if n_emitters % 2 == 1:
        blocks.append((-h[n], 1))
        single_positions.append((tilde_index[("v", n)], -h[n]))
    for j in range(n + 1, n_emitters + 1):
        blocks.append((-h[j], 2))
        pair_positions.append((tilde_index[("v", j)], tilde_index[("w", j)], -h[j]))
    blocks.append((0, 1))
    single_positions.append((tilde_index[("v", n_emitters + 1)], 0))

    return JordanDecomposition(
        ladder=ladder, blocks=tuple(blocks), tilde=tilde, tilde_inv=tilde_inv,
        permutation=permutation, pair_positions=tuple(pair_positions),
        single_positions=tuple(single_positions), bits=bits, exact=exact)


def raise_from_cap(bits: int, policy: PrecisionPolicy):
    from .precision import PrecisionError
    raise PrecisionError(
        f"propagation needs about {bits} bits, above the {policy.max_bits}-bit cap",
        defect=float("nan"), bits=policy.max_bits)


def _build_tilde(h, n_emitters, n, ratio, tol):
    """Columns of the permuted-triangular similarity matrix plus its
    inverse from the closed-form blocks."""
    dim = n_emitters + 1
    w_labels = [("w", j) for j in range(n_emitters, n, -1)]
    v_labels = ([("v", n)] if n_emitters % 2 == 1 else []) \
        + [("v", j) for j in range(n + 1, n_emitters + 2)]
    tilde_labels = w_labels + v_labels

    columns = {}
    for kind, j in tilde_labels:
        if kind == "v":
            vec = _v_components(h, n_emitters, j, ratio)
            _validate_eigenpair(h, vec, j, tol=tol)
        else:
            vec = _w_components(h, n_emitters, j, ratio)
            _validate_eigenpair(h, vec, j, tol=tol,
                                generalized_of=_v_components(h, n_emitters, j, ratio))
        columns[(kind, j)] = vec

    zero = ratio(0, 1)
    # rows top-down: row i holds physical component m = N - i
    tilde = [[zero] * dim for _ in range(dim)]
    for k, lab in enumerate(tilde_labels):
        vec = columns[lab]
        for i in range(dim):
            tilde[i][k] = vec[n_emitters - i]

    nw = len(w_labels)
    # inverse blocks from the closed forms, same (row, column) conventions
    t11_inv = [[zero] * nw for _ in range(nw)]
    for r in range(nw):
        m = n_emitters - r
        for c in range(r + 1):
            j = n_emitters - c
            t11_inv[r][c] = _t11_inv_entry(h, n_emitters, m, j, ratio)

    nv = dim - nw
    v_col_labels = [j for _, j in v_labels]
    t22_inv = [[zero] * nv for _ in range(nv)]
    for r in range(nv):
        m = n - r
        mbar = n_emitters + 1 - m
        for c, j in enumerate(v_col_labels):
            if j <= mbar:
                t22_inv[r][c] = _t22_inv_entry(h, n_emitters, m, j, ratio)

    t21 = [[tilde[nw + r][c] for c in range(nw)] for r in range(nv)]
    # lower-left of the block inverse: -T22^{-1} T21 T11^{-1}
    tmp = [[zero] * nw for _ in range(nv)]
    for r in range(nv):
        for c in range(nw):
            acc = zero
            for k in range(nv):
                acc = acc + t22_inv[r][k] * t21[k][c]
            tmp[r][c] = acc
    lower_left = [[zero] * nw for _ in range(nv)]
    for r in range(nv):
        for c in range(nw):
            acc = zero
            for k in range(nw):
                acc = acc + tmp[r][k] * t11_inv[k][c]
            lower_left[r][c] = -acc

    tilde_inv = [[zero] * dim for _ in range(dim)]
    for r in range(nw):
        for c in range(nw):
            tilde_inv[r][c] = t11_inv[r][c]
    for r in range(nv):
        for c in range(nw):
            tilde_inv[nw + r][c] = lower_left[r][c]
        for c in range(nv):
            tilde_inv[nw + r][nw + c] = t22_inv[r][c]
    return tilde, tilde_inv, tilde_labels


def propagate(decomp: JordanDecomposition, gamma: float, t: float,
              initial: DiagonalState) -> DiagonalState:
    """Apply the block-structured exponential: coefficients of singles are
    scaled by exp(l*g*t); a Jordan pair (v, w) mixes as
    (cv + g*t*cw, cw) * exp(l*g*t).  Never a dense matrix exponential."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    dim = decomp.n_emitters + 1
    pops = np.asarray(initial.populations, dtype=float)
    if pops.shape != (dim,):
        raise ValueError(f"initial state has wrong length {pops.shape}")
    x_td = pops[::-1]
    tilde, tilde_inv = decomp._work_matrices()

    if decomp.bits <= DOUBLE_BITS:
        coeff = tilde_inv @ x_td
        gt = gamma * t
        for kv, kw, lam in decomp.pair_positions:
            e = math.exp(lam * gt)
            coeff[kv], coeff[kw] = e * (coeff[kv] + gt * coeff[kw]), e * coeff[kw]
        for k, lam in decomp.single_positions:
            coeff[k] *= math.exp(lam * gt)
        y_td = tilde @ coeff
        out = np.asarray(y_td[::-1], dtype=float)
    else:
        with mpmath.workprec(decomp.bits):
            x_mp = [mpmath.mpf(float(v)) for v in x_td]
            coeff = []
            for r in range(dim):
                acc = mpmath.mpf(0)
                row = tilde_inv[r]
                for k in range(dim):
                    if row[k]:
                        acc += row[k] * x_mp[k]
                coeff.append(acc)
            gt = mpmath.mpf(gamma) * mpmath.mpf(t)
            for kv, kw, lam in decomp.pair_positions:
                e = mpmath.exp(lam * gt)
                cv, cw = coeff[kv], coeff[kw]
                coeff[kv] = e * (cv + gt * cw)
                coeff[kw] = e * cw
            for k, lam in decomp.single_positions:
                coeff[k] = coeff[k] * mpmath.exp(lam * gt)
            out = np.empty(dim)
            for i in range(dim):
                acc = mpmath.mpf(0)
                row = tilde[i]
                for k in range(dim):
                    if row[k]:
                        acc += row[k] * coeff[k]
                out[dim - 1 - i] = float(acc)
    return DiagonalState(populations=out, time=float(initial.time) + float(t))


def reconstruction_defect(decomp: JordanDecomposition) -> float:
    """max-entry error of rebuilding H from the decomposition.  Exact
    entries give an identically zero defect."""
    dim = decomp.n_emitters + 1
    h = _h_ext(decomp.ladder)
    zero = Fraction(0) if decomp.exact else mpmath.mpf(0)

    # J in tilde ordering: diagonal eigenvalues plus a 1 coupling w -> v
    jcol_diag = [zero] * dim
    couple = {}
    for kv, kw, lam in decomp.pair_positions:
        jcol_diag[kv] = jcol_diag[kv] + lam
        jcol_diag[kw] = jcol_diag[kw] + lam
        couple[kw] = kv
    for k, lam in decomp.single_positions:
        jcol_diag[k] = jcol_diag[k] + lam

    def matmul(a, b):
        rows, inner, cols = len(a), len(b), len(b[0])
        out = [[zero] * cols for _ in range(rows)]
        for i in range(rows):
            ai = a[i]
            for k in range(inner):
                aik = ai[k]
                if not aik:
                    continue
                bk = b[k]
                row = out[i]
                for c in range(cols):
                    if bk[c]:
                        row[c] = row[c] + aik * bk[c]
        return out

    tj = [[zero] * dim for _ in range(dim)]
    for i in range(dim):
        for k in range(dim):
            val = decomp.tilde[i][k] * jcol_diag[k]
            if k in couple:
                val = val + decomp.tilde[i][couple[k]]
            tj[i][k] = val
    rebuilt = matmul(tj, decomp.tilde_inv)

    worst = 0.0
    for i in range(dim):
        for c in range(dim):
            m_row = decomp.n_emitters - i
            expected = 0
            if i == c:
                expected = -h[m_row]
            elif i == c + 1:
                expected = h[decomp.n_emitters - c]
            diff = rebuilt[i][c] - expected
            worst = max(worst, abs(_entry_to_float(diff)) if decomp.exact else abs(float(diff)))
    return worst


@dataclass(frozen=True)
class ResolventElement:
    """Structured entry of (z*1 - H)^{-1}: the ladder values whose
    negatives are its poles plus the big-integer path numerator.  Entries
    with m > m' are identically zero (empty pole tuple, zero numerator)."""

    row_m: int
    col_m_prime: int
    poles: tuple[int, ...]
    numerator: int

    def evaluate(self, z: complex) -> complex:
        if not self.poles:
            return 0j
        z = complex(z)
        for h_k in self.poles:
            if z + h_k == 0:
                raise SingularityError(
                    f"z={z} hits the resolvent pole at {-h_k}")
        value = self.numerator / (z + self.poles[0])
        for h_k in self.poles[1:]:
            value /= z + h_k
        return value


def resolvent_matrix_element(ladder: DickeLadder, m: int, m_prime: int) -> ResolventElement:
    n_emitters = ladder.n_emitters
    if not (0 <= m <= n_emitters and 0 <= m_prime <= n_emitters):
        raise ValueError("state labels out of range")
    if m > m_prime:
        return ResolventElement(row_m=m, col_m_prime=m_prime, poles=(), numerator=0)
    numerator = 1
    for k in range(m + 1, m_prime + 1):
        numerator *= ladder.h[k]
    return ResolventElement(row_m=m, col_m_prime=m_prime,
                            poles=tuple(ladder.h[m:m_prime + 1]), numerator=numerator)


def resolvent_element(ladder: DickeLadder, m: int, m_prime: int, z: complex) -> complex:
    """Entry of (z*1 - H)^{-1} in physical labels: nonzero for m <= m',
    a pure rational function with poles at the negated ladder values."""
    return resolvent_matrix_element(ladder, m, m_prime).evaluate(z)


def invert_laplace(ladder: DickeLadder, target_m: int, initial_m0: int,
                   policy: PrecisionPolicy | None = None) -> list[ResidueTerm]:
    """Residue terms of the resolvent entry R_{m,m0}(z) e^{z*g*t}.

    The poles live at z = -h_p, so the gaps enter with the opposite sign
    from the direct expansion; after collapsing each contour the term list
    must coincide with `residue_terms` exactly.
    """
    policy = policy or PrecisionPolicy()
    h = ladder.h
    m, m0 = target_m, initial_m0
    pole_set = classify_poles(ladder, m, m0)
    numerator = 1
    for k in range(m + 1, m0 + 1):
        numerator *= h[k]

    raw = []
    for pole in pole_set.poles:
        v = pole.value
        gaps = [h[k] - v for k in range(m, m0 + 1) if h[k] != v]
        den = 1
        for g in gaps:
            den *= g
        if pole.multiplicity == 1:
            raw.append((v, 1, Fraction(numerator, den), Fraction(0)))
        else:
            g_at = Fraction(numerator, den)
            if gaps:
                s = Fraction(sum(_prefix_suffix_products(gaps)), den)
            else:
                s = Fraction(0)
            raw.append((v, 2, -g_at * s, g_at))
    bits, _ = resolve_bits([a for _, _, a, _ in raw], terms_t0_delta(m, m0), policy)
    return [ResidueTerm(pole=v, multiplicity=mult, const=a, linear=b, bits=bits)
            for v, mult, a, b in raw]
