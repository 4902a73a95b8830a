import math
from fractions import Fraction

import numpy as np
import pytest

from dicke.ladder import build_ladder
from dicke.oracles import integrate_rate_equations
from dicke.precision import PrecisionPolicy
from dicke.residues import residue_terms
from dicke.spectral import (SingularityError, eigenvector, generalized_eigenvector,
                            invert_laplace, jordan_decompose, propagate,
                            reconstruction_defect, resolvent_element)
from dicke.states import DiagonalState


def dense_generator(ladder):
    """H in physical ordering (upper bidiagonal)."""
    n = ladder.n_emitters
    mat = np.zeros((n + 1, n + 1))
    for m in range(n + 1):
        mat[m, m] = -ladder.h[m]
        if m < n:
            mat[m, m + 1] = ladder.h[m + 1]
    return mat


def test_zero_mode_is_ground_state_indicator():
    for n in (1, 2, 5, 12):
        vec = eigenvector(build_ladder(n, 1.0), n + 1)
        expected = np.zeros(n + 1)
        expected[0] = 1.0
        assert np.array_equal(vec, expected)


def test_eigenvector_residual_n2():
    ladder = build_ladder(2, 1.0)
    vec = eigenvector(ladder, 2)
    residual = dense_generator(ladder) @ vec + 2 * vec
    assert np.abs(residual).max() <= 1e-12


def test_eigenvector_residuals_sweep():
    for n in range(1, 21):
        ladder = build_ladder(n, 1.0)
        mat = dense_generator(ladder)
        labels = list(range((n + 1) // 2 + 1, n + 2))
        if n % 2 == 1:
            labels.insert(0, (n + 1) // 2)
        for j in labels:
            vec = eigenvector(ladder, j)
            lam = 0 if j == n + 1 else ladder.h[j]
            scale = max(1.0, np.abs(vec).max() * ladder.h_max)
            assert np.abs(mat @ vec + lam * vec).max() <= 1e-12 * scale


def test_middle_eigenvector_odd_n_has_no_partner():
    ladder = build_ladder(5, 1.0)
    vec = eigenvector(ladder, 3)  # simple middle eigenvalue
    mat = dense_generator(ladder)
    assert np.abs(mat @ vec + ladder.h[3] * vec).max() <= 1e-10
    with pytest.raises(ValueError):
        generalized_eigenvector(ladder, 3)


def test_eigenvector_rejects_out_of_range():
    ladder = build_ladder(4, 1.0)
    with pytest.raises(ValueError):
        eigenvector(ladder, 1)
    with pytest.raises(ValueError):
        eigenvector(ladder, 6)
    # even N: the middle label belongs to the doubled branch, not a lone vector
    with pytest.raises(ValueError):
        eigenvector(ladder, 2)


def test_generalized_eigenvector_defect_equation():
    for n, j in ((2, 2), (4, 3), (4, 4), (9, 6), (12, 8)):
        ladder = build_ladder(n, 1.0)
        mat = dense_generator(ladder)
        w = generalized_eigenvector(ladder, j)
        v = eigenvector(ladder, j)
        scale = max(1.0, np.abs(w).max() * ladder.h_max)
        assert np.abs(mat @ w + ladder.h[j] * w - v).max() <= 1e-12 * scale


def test_no_generalized_vectors_for_n1():
    with pytest.raises(ValueError):
        generalized_eigenvector(build_ladder(1, 1.0), 1)


def test_jordan_blocks_n2():
    decomp = jordan_decompose(build_ladder(2, 1.0))
    assert decomp.blocks == ((-2, 2), (0, 1))


def test_jordan_blocks_n3():
    decomp = jordan_decompose(build_ladder(3, 1.0))
    assert decomp.blocks == ((-4, 1), (-3, 2), (0, 1))


def test_jordan_block_census():
    for n in range(1, 33):
        decomp = jordan_decompose(build_ladder(n, 1.0))
        doubles = [b for b in decomp.blocks if b[1] == 2]
        singles = [b for b in decomp.blocks if b[1] == 1]
        assert len(doubles) == n // 2
        assert sum(size for _, size in decomp.blocks) == n + 1
        assert singles.count((0, 1)) == 1
        if n % 2 == 1:
            mid = (n + 1) // 2
            assert (-build_ladder(n, 1.0).h[mid], 1) in singles
            assert len(singles) == 2
        else:
            assert len(singles) == 1


def test_tilde_is_lower_triangular():
    for n in (2, 3, 8, 13):
        decomp = jordan_decompose(build_ladder(n, 1.0))
        for i in range(n + 1):
            for k in range(i + 1, n + 1):
                assert decomp.tilde[i][k] == 0


def test_tilde_inverse_is_exact_inverse():
    for n in (1, 2, 3, 4, 7, 10, 16):
        decomp = jordan_decompose(build_ladder(n, 1.0))
        dim = n + 1
        for i in range(dim):
            for c in range(dim):
                acc = Fraction(0)
                for k in range(dim):
                    acc += decomp.tilde[i][k] * decomp.tilde_inv[k][c]
                assert acc == (1 if i == c else 0)


def test_similarity_permutation_consistency():
    decomp = jordan_decompose(build_ladder(6, 1.0))
    t = decomp.similarity()
    tinv = decomp.similarity_inverse()
    assert np.abs(t @ tinv - np.eye(7)).max() < 1e-9


def test_reconstruction_defect_exact_zero():
    for n in range(1, 33):
        decomp = jordan_decompose(build_ladder(n, 1.0))
        assert reconstruction_defect(decomp) <= 1e-10  # exact entries: identically 0
        assert reconstruction_defect(decomp) == 0.0


def test_propagate_t0_is_identity():
    ladder = build_ladder(9, 1.0)
    decomp = jordan_decompose(ladder)
    rng = np.random.default_rng(5)
    pops = rng.random(10)
    pops /= pops.sum()
    state = DiagonalState(populations=pops, time=0.0)
    out = propagate(decomp, 1.0, 0.0, state)
    assert np.abs(out.populations - pops).max() < 1e-12


def test_propagate_n2_closed_form():
    decomp = jordan_decompose(build_ladder(2, 1.0))
    start = DiagonalState(populations=np.array([0.0, 0.0, 1.0]), time=0.0)
    out = propagate(decomp, 1.0, 1.0, start)
    expected = np.array([1.0 - 3 * math.exp(-2), 2 * math.exp(-2), math.exp(-2)])
    assert np.abs(out.populations - expected).max() < 1e-13


def test_propagate_matches_ode_on_random_states():
    rng = np.random.default_rng(11)
    grid = np.array([0.0, 0.2, 0.9, 2.5])
    for n in (3, 6, 10):
        ladder = build_ladder(n, 1.0)
        decomp = jordan_decompose(ladder)
        pops = rng.random(n + 1)
        pops /= pops.sum()
        reference = None
        for m0 in range(n + 1):  # ODE of the mixture = mixture of ODE solutions
            tab = integrate_rate_equations(ladder, m0, grid)
            reference = tab.populations * pops[m0] if reference is None \
                else reference + tab.populations * pops[m0]
        state = DiagonalState(populations=pops, time=0.0)
        for idx, t in enumerate(grid):
            out = propagate(decomp, 1.0, float(t), state)
            assert np.abs(out.populations - reference[:, idx]).max() < 1e-9


def test_propagate_semigroup_property():
    rng = np.random.default_rng(3)
    for n in (4, 7, 10):
        ladder = build_ladder(n, 1.0)
        decomp = jordan_decompose(ladder)
        pops = rng.random(n + 1)
        pops /= pops.sum()
        state = DiagonalState(populations=pops, time=0.0)
        t1, t2 = 0.37, 1.21
        two_steps = propagate(decomp, 1.0, t2, propagate(decomp, 1.0, t1, state))
        one_step = propagate(decomp, 1.0, t1 + t2, state)
        assert np.abs(two_steps.populations - one_step.populations).max() < 1e-9


def test_propagate_conserves_trace():
    ladder = build_ladder(16, 1.0)
    decomp = jordan_decompose(ladder)
    start = np.zeros(17)
    start[16] = 1.0
    for t in (0.05, 0.5, 3.0):
        out = propagate(decomp, 1.0, t, DiagonalState(populations=start, time=0.0))
        assert out.trace_defect() < 1e-12


def test_resolvent_diagonal_top_state():
    ladder = build_ladder(5, 1.0)
    z = 0.3 + 0.7j
    assert resolvent_element(ladder, 5, 5, z) == pytest.approx(1.0 / (z + 5))


def test_resolvent_strict_support():
    ladder = build_ladder(5, 1.0)
    assert resolvent_element(ladder, 3, 1, 1.0 + 1.0j) == 0j


def test_resolvent_element_structure():
    from dicke.spectral import resolvent_matrix_element

    ladder = build_ladder(4, 1.0)
    element = resolvent_matrix_element(ladder, 1, 3)
    assert element.poles == (4, 6, 6)
    assert element.numerator == 36  # h_2 * h_3
    empty = resolvent_matrix_element(ladder, 3, 1)
    assert empty.poles == () and empty.numerator == 0
    assert empty.evaluate(2.0 + 1.0j) == 0j


def test_resolvent_pole_hit():
    ladder = build_ladder(3, 1.0)
    with pytest.raises(SingularityError):
        resolvent_element(ladder, 1, 3, -3.0 + 0j)


def test_resolvent_identity():
    rng = np.random.default_rng(7)
    for n in (4, 9, 16):
        ladder = build_ladder(n, 1.0)
        mat = dense_generator(ladder)
        draws = [1.0 + 1.0j] + [complex(rng.normal(), rng.normal()) * 3.0
                                for _ in range(10)]
        for z in draws:
            if min(abs(z + h) for h in ladder.h) < 1e-3:
                continue
            resolvent = np.array([[resolvent_element(ladder, m, mp, z)
                                   for mp in range(n + 1)] for m in range(n + 1)])
            identity = resolvent @ (z * np.eye(n + 1) - mat)
            assert np.abs(identity - np.eye(n + 1)).max() < 1e-12


def test_invert_laplace_equals_residue_terms_exactly():
    for n in range(1, 17):
        ladder = build_ladder(n, 1.0)
        for m0 in range(n + 1):
            for m in range(m0 + 1):
                assert invert_laplace(ladder, m, m0) == residue_terms(ladder, m, m0)


def test_invert_laplace_n2_double_pole():
    terms = invert_laplace(build_ladder(2, 1.0), 1, 2)
    assert [(t.pole, t.multiplicity, t.const, t.linear) for t in terms] == \
        [(2, 2, Fraction(0), Fraction(2))]


def test_invert_laplace_diagonal_single_term():
    ladder = build_ladder(6, 1.0)
    for m in (0, 2, 6):
        terms = invert_laplace(ladder, m, m)
        assert [(t.pole, t.const, t.linear) for t in terms] == \
            [(ladder.h[m], Fraction(1), Fraction(0))]


def test_invert_laplace_n3_ground_state():
    terms = invert_laplace(build_ladder(3, 1.0), 0, 3)
    assert sum((t.const for t in terms), Fraction(0)) == 0  # t=0 occupation vanishes
    by_pole = {t.pole: t.multiplicity for t in terms}
    assert by_pole == {0: 1, 3: 2, 4: 1}


def test_jordan_policy_modes():
    ladder = build_ladder(6, 1.0)
    exact = jordan_decompose(ladder)
    double = jordan_decompose(ladder, PrecisionPolicy.double())
    assert double.bits == 53
    start = DiagonalState(populations=np.eye(7)[6], time=0.0)
    a = propagate(exact, 1.0, 0.8, start)
    b = propagate(double, 1.0, 0.8, start)
    assert np.abs(a.populations - b.populations).max() < 1e-9
