"""Operator algebra checked against independent index-level oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddrab import qcore
from ddrab.qcore import (
    Basis,
    BasisMismatchError,
    DimensionError,
    Ket,
    LabelError,
    Operator,
    ValidationError,
    basis_ket,
    commutator,
    dagger,
    density_matrix,
    fidelity,
    hermitize_check,
    identity,
    ketbra,
    operator_from_terms,
    product_basis,
    projector,
    superposition,
    tensor,
    tensor_kets,
)

RNG = np.random.default_rng(20240817)


def random_operator(basis, rng=RNG, hermitian=False):
    m = rng.normal(size=(basis.dim, basis.dim)) + 1j * rng.normal(size=(basis.dim, basis.dim))
    if hermitian:
        m = 0.5 * (m + m.conj().T)
    return Operator(basis, m)


B2 = Basis(("g", "e"))
B3 = Basis(("0", "1", "r"))


class TestBasis:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(LabelError):
            Basis(("a", "a"))

    def test_index_roundtrip(self):
        b = Basis(("x", "y", "z"))
        assert [b.index(l) for l in b.labels] == [0, 1, 2]

    def test_unknown_label(self):
        with pytest.raises(LabelError):
            B2.index("nope")

    def test_product_labels_atom1_major(self):
        comp = product_basis(B2, B3)
        assert comp.labels[:3] == (("g", "0"), ("g", "1"), ("g", "r"))
        assert comp.labels[3:] == (("e", "0"), ("e", "1"), ("e", "r"))

    def test_dimension_cap(self):
        big = Basis(tuple(range(200)))
        with pytest.raises(DimensionError):
            product_basis(big, big)


class TestTensorOracle:
    def test_index_formula(self):
        # Oracle: (A kron B)[i*nb+k, j*nb+l] = A[i,j] B[k,l], four nested loops.
        a = random_operator(B2)
        b = random_operator(B3)
        t = tensor(a, b)
        na, nb = a.basis.dim, b.basis.dim
        expected = np.zeros((na * nb, na * nb), dtype=complex)
        for i in range(na):
            for j in range(na):
                for k in range(nb):
                    for l in range(nb):
                        expected[i * nb + k, j * nb + l] = a.data[i, j] * b.data[k, l]
        assert np.max(np.abs(t.data - expected)) < 1e-14

    def test_identity_factor(self):
        a = random_operator(B3)
        t = tensor(a, identity(B2))
        # Block-diagonal embedding: <(i,g)|t|(j,g)> = a_ij and cross-blocks vanish.
        for i, li in enumerate(B3.labels):
            for j, lj in enumerate(B3.labels):
                assert t.elem((li, "g"), (lj, "g")) == pytest.approx(a.data[i, j])
                assert t.elem((li, "g"), (lj, "e")) == 0.0

    def test_associativity(self):
        a, b, c = (random_operator(B2) for _ in range(3))
        left = tensor(tensor(a, b), c)
        right = tensor(a, tensor(b, c))
        # Labels nest differently but the matrices must agree.
        assert np.max(np.abs(left.data - right.data)) < 1e-14

    def test_kets(self):
        ka = superposition(B2, {"g": 0.6, "e": 0.8})
        kb = basis_ket(B3, "1")
        kt = tensor_kets(ka, kb)
        assert kt.amp(("g", "1")) == pytest.approx(0.6)
        assert kt.amp(("e", "1")) == pytest.approx(0.8)
        assert kt.amp(("e", "0")) == 0.0


class TestDaggerCommutator:
    def test_dagger_oracle(self):
        a = random_operator(B3)
        d = dagger(a)
        for i, li in enumerate(B3.labels):
            for j, lj in enumerate(B3.labels):
                assert d.elem(li, lj) == pytest.approx(np.conj(a.data[j, i]))

    def test_dagger_involution(self):
        a = random_operator(B3)
        assert np.array_equal(dagger(dagger(a)).data, a.data)

    def test_commutator_oracle(self):
        a, b = random_operator(B3), random_operator(B3)
        c = commutator(a, b)
        expected = a.data @ b.data - b.data @ a.data
        assert np.max(np.abs(c.data - expected)) < 1e-13

    def test_commutator_antisymmetry(self):
        a, b = random_operator(B3), random_operator(B3)
        s = commutator(a, b) + commutator(b, a)
        assert np.max(np.abs(s.data)) < 1e-13

    def test_commutator_of_hermitian_is_antihermitian(self):
        a = random_operator(B3, hermitian=True)
        b = random_operator(B3, hermitian=True)
        c = commutator(a, b)
        assert np.max(np.abs(c.data + c.data.conj().T)) < 1e-13

    def test_basis_mismatch(self):
        with pytest.raises(BasisMismatchError):
            commutator(random_operator(B2), random_operator(B3))


class TestHermitize:
    def test_hermitian_input(self):
        h = random_operator(B3, hermitian=True)
        assert hermitize_check(h) == 0.0

    def test_known_deviation(self):
        m = np.zeros((2, 2), dtype=complex)
        m[0, 1] = 1.0
        assert hermitize_check(Operator(B2, m)) == pytest.approx(1.0)


class TestFidelity:
    def test_same_state(self):
        psi = superposition(B2, {"g": 1.0, "e": 1.0}, normalize=True)
        assert fidelity(psi, density_matrix(psi)) == pytest.approx(1.0)

    def test_orthogonal(self):
        psi = basis_ket(B2, "g")
        phi = basis_ket(B2, "e")
        assert fidelity(psi, density_matrix(phi)) == pytest.approx(0.0)

    def test_mixed_state(self):
        psi = basis_ket(B2, "g")
        rho = Operator(B2, np.diag([0.25, 0.75]))
        assert fidelity(psi, rho) == pytest.approx(0.25)

    def test_trace_precondition(self):
        psi = basis_ket(B2, "g")
        rho = Operator(B2, np.diag([0.5, 0.6]))
        with pytest.raises(ValidationError):
            fidelity(psi, rho)

    def test_hermiticity_precondition(self):
        psi = basis_ket(B2, "g")
        m = np.diag([0.5, 0.5]).astype(complex)
        m[0, 1] = 0.3
        with pytest.raises(ValidationError):
            fidelity(psi, Operator(B2, m))

    def test_unnormalized_target(self):
        psi = Ket(B2, np.array([1.0, 1.0]))
        rho = Operator(B2, np.diag([0.5, 0.5]))
        with pytest.raises(ValidationError):
            fidelity(psi, rho)


class TestImmutability:
    def test_operator_data_readonly(self):
        a = random_operator(B2)
        with pytest.raises(ValueError):
            a.data[0, 0] = 5.0

    def test_ket_data_readonly(self):
        k = basis_ket(B2, "g")
        with pytest.raises(ValueError):
            k.data[0] = 5.0

    def test_constructor_copies(self):
        m = np.eye(2, dtype=complex)
        op = Operator(B2, m)
        m[0, 0] = 7.0
        assert op.data[0, 0] == 1.0


class TestBuilders:
    def test_ketbra(self):
        op = ketbra(B3, "0", "r", coeff=2.5)
        assert op.elem("0", "r") == pytest.approx(2.5)
        assert np.count_nonzero(op.data) == 1

    def test_projector(self):
        p = projector(B3, ["0", "r"])
        assert np.allclose(np.diag(p.data), [1.0, 0.0, 1.0])

    def test_operator_from_terms_accumulates(self):
        op = operator_from_terms(B2, [("g", "e", 1.0), ("g", "e", 0.5)])
        assert op.elem("g", "e") == pytest.approx(1.5)


# Structural properties over random small spaces.
cdim = st.integers(min_value=1, max_value=4)


def _basis(n):
    return Basis(tuple(f"l{i}" for i in range(n)))


@st.composite
def operators(draw, dim=None):
    n = draw(cdim) if dim is None else dim
    basis = _basis(n)
    re = draw(
        st.lists(
            st.floats(-5, 5, allow_nan=False, allow_infinity=False),
            min_size=n * n,
            max_size=n * n,
        )
    )
    im = draw(
        st.lists(
            st.floats(-5, 5, allow_nan=False, allow_infinity=False),
            min_size=n * n,
            max_size=n * n,
        )
    )
    m = (np.array(re) + 1j * np.array(im)).reshape(n, n)
    return Operator(basis, m)


@settings(max_examples=50, deadline=None)
@given(operators())
def test_dagger_is_involution(op):
    assert np.array_equal(dagger(dagger(op)).data, op.data)


@settings(max_examples=50, deadline=None)
@given(operators(dim=2), operators(dim=2))
def test_tensor_dagger_distributes(a, b):
    lhs = dagger(tensor(a, b))
    rhs = tensor(dagger(a), dagger(b))
    assert np.max(np.abs(lhs.data - rhs.data)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(operators(dim=2), operators(dim=2), operators(dim=2))
def test_commutator_jacobi_identity(a, b, c):
    total = (
        commutator(a, commutator(b, c))
        + commutator(b, commutator(c, a))
        + commutator(c, commutator(a, b))
    )
    scale = max(1.0, a.norm() * b.norm() * c.norm())
    assert np.max(np.abs(total.data)) / scale < 1e-10
