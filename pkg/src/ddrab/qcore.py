"""Labeled bases, operators and kets for small two-atom level systems.

Everything is dense complex128; the largest space used anywhere is 25
dimensional (five levels per atom), so there is no point in sparse storage.
Operators and kets are immutable value objects tied to a Basis, which keeps
matrix elements addressable by physical level labels instead of raw indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

# Default numerical tolerances.  Callers may override per call; the CLI maps
# config values onto these.
EQ_TOL = 1e-12
HERM_TOL = 1e-12
NORM_TOL = 1e-10

# Hard cap on composite dimensions; protects against runaway tensor calls.
MAX_DIM = 10_000


class QcoreError(Exception):
    """Base class for algebra-layer errors."""


class BasisMismatchError(QcoreError):
    """Two objects defined on different bases were combined."""


class DimensionError(QcoreError):
    """A composite dimension exceeded MAX_DIM."""


class LabelError(QcoreError):
    """A label is unknown to the basis or duplicated."""


class ValidationError(QcoreError):
    """A precondition on operator or state data failed."""


@dataclass(frozen=True)
class Basis:
    """Ordered set of orthonormal labels.

    Labels are arbitrary hashables; for a two-atom space they are
    (level_atom1, level_atom2) tuples in atom1-major order.
    """

    labels: tuple

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise LabelError(f"duplicate labels in basis: {self.labels}")
        object.__setattr__(self, "_index", {l: i for i, l in enumerate(self.labels)})

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise LabelError(f"label {label!r} not in basis") from None

    def __contains__(self, label) -> bool:
        return label in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Basis) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)


def product_basis(a: Basis, b: Basis) -> Basis:
    """Atom1-major composite basis with (label_a, label_b) tuples."""
    if a.dim * b.dim > MAX_DIM:
        raise DimensionError(f"composite dimension {a.dim * b.dim} exceeds {MAX_DIM}")
    return Basis(tuple((la, lb) for la in a.labels for lb in b.labels))


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Operator:
    """Immutable dense operator on a labeled basis."""

    basis: Basis
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.shape != (self.basis.dim, self.basis.dim):
            raise ValidationError(
                f"operator shape {arr.shape} does not match basis dim {self.basis.dim}"
            )
        object.__setattr__(self, "data", _freeze(arr))

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "Operator"):
        if self.basis != other.basis:
            raise BasisMismatchError("operators live on different bases")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.basis, self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.basis, self.data - other.data)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.basis, self.data * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.basis, -self.data)

    def __matmul__(self, other):
        if isinstance(other, Ket):
            if self.basis != other.basis:
                raise BasisMismatchError("operator and ket live on different bases")
            return Ket(self.basis, self.data @ other.data)
        self._check(other)
        return Operator(self.basis, self.data @ other.data)

    # -- element access ---------------------------------------------------
    def elem(self, ket_label, bra_label) -> complex:
        """Matrix element <ket_label| O |bra_label> is elem(row, col)."""
        return complex(self.data[self.basis.index(ket_label), self.basis.index(bra_label)])

    def norm(self) -> float:
        """Spectral norm (largest singular value)."""
        return float(np.linalg.norm(self.data, 2))


@dataclass(frozen=True)
class Ket:
    """Immutable state vector on a labeled basis."""

    basis: Basis
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128).reshape(-1)
        if arr.shape != (self.basis.dim,):
            raise ValidationError(
                f"ket length {arr.shape} does not match basis dim {self.basis.dim}"
            )
        object.__setattr__(self, "data", _freeze(arr))

    def amp(self, label) -> complex:
        return complex(self.data[self.basis.index(label)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def dag_mul(self, other: "Ket") -> complex:
        if self.basis != other.basis:
            raise BasisMismatchError("kets live on different bases")
        return complex(np.vdot(self.data, other.data))

    def outer(self, other: "Ket") -> Operator:
        """|self><other|."""
        if self.basis != other.basis:
            raise BasisMismatchError("kets live on different bases")
        return Operator(self.basis, np.outer(self.data, other.data.conj()))


# -- constructors ---------------------------------------------------------

def identity(basis: Basis) -> Operator:
    return Operator(basis, np.eye(basis.dim))


def zero_operator(basis: Basis) -> Operator:
    return Operator(basis, np.zeros((basis.dim, basis.dim)))


def basis_ket(basis: Basis, label) -> Ket:
    v = np.zeros(basis.dim, dtype=np.complex128)
    v[basis.index(label)] = 1.0
    return Ket(basis, v)


def superposition(basis: Basis, parts: Mapping, normalize: bool = False) -> Ket:
    """Ket from a {label: amplitude} mapping."""
    v = np.zeros(basis.dim, dtype=np.complex128)
    for label, amp in parts.items():
        v[basis.index(label)] += amp
    if normalize:
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        v = v / n
    return Ket(basis, v)


def ketbra(basis: Basis, ket_label, bra_label, coeff: complex = 1.0) -> Operator:
    m = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    m[basis.index(ket_label), basis.index(bra_label)] = coeff
    return Operator(basis, m)


def projector(basis: Basis, labels: Iterable) -> Operator:
    m = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for label in labels:
        i = basis.index(label)
        m[i, i] = 1.0
    return Operator(basis, m)


def operator_from_terms(basis: Basis, terms: Sequence[tuple]) -> Operator:
    """Sum of coeff |ket><bra| terms given as (ket_label, bra_label, coeff)."""
    m = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for ket_label, bra_label, coeff in terms:
        m[basis.index(ket_label), basis.index(bra_label)] += coeff
    return Operator(basis, m)


# -- core operations ------------------------------------------------------

def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product; composite labels are (label_a, label_b)."""
    comp = product_basis(a.basis, b.basis)
    return Operator(comp, np.kron(a.data, b.data))


def tensor_kets(a: Ket, b: Ket) -> Ket:
    comp = product_basis(a.basis, b.basis)
    return Ket(comp, np.kron(a.data, b.data))


def dagger(op: Operator) -> Operator:
    return Operator(op.basis, op.data.conj().T)


def commutator(a: Operator, b: Operator) -> Operator:
    if a.basis != b.basis:
        raise BasisMismatchError("operators live on different bases")
    return Operator(a.basis, a.data @ b.data - b.data @ a.data)


def hermitize_check(op: Operator) -> float:
    """Max entrywise deviation from Hermiticity."""
    return float(np.max(np.abs(op.data - op.data.conj().T)))


def assert_hermitian(op: Operator, tol: float = HERM_TOL, what: str = "operator"):
    dev = hermitize_check(op)
    if dev > tol:
        raise ValidationError(f"{what} is not Hermitian: max deviation {dev:.3e} > {tol:.1e}")


def expectation(op: Operator, rho: Operator) -> float:
    """Tr(op rho) for Hermitian op and rho; returns the real part."""
    if op.basis != rho.basis:
        raise BasisMismatchError("operator and state live on different bases")
    return float(np.real(np.trace(op.data @ rho.data)))


def fidelity(psi: Ket, rho: Operator, trace_tol: float = 1e-8, herm_tol: float = 1e-8) -> float:
    """<psi| rho |psi> for a pure target state against a density matrix.

    rho must be Hermitian with unit trace; psi must be normalized.
    """
    if psi.basis != rho.basis:
        raise BasisMismatchError("state and density matrix live on different bases")
    if abs(psi.norm() - 1.0) > NORM_TOL:
        raise ValidationError(f"target ket is not normalized: |norm-1| = {abs(psi.norm()-1.0):.3e}")
    tr = complex(np.trace(rho.data))
    if abs(tr - 1.0) > trace_tol:
        raise ValidationError(f"density matrix trace {tr} deviates from 1 beyond {trace_tol:.1e}")
    dev = hermitize_check(rho)
    if dev > herm_tol:
        raise ValidationError(f"density matrix not Hermitian: deviation {dev:.3e}")
    val = float(np.real(np.vdot(psi.data, rho.data @ psi.data)))
    # Clamp roundoff just outside [0, 1]; anything further is a real error.
    if val < -1e-9 or val > 1.0 + 1e-9:
        raise ValidationError(f"fidelity {val} outside [0, 1]")
    return min(max(val, 0.0), 1.0)


def pure_fidelity(psi: Ket, phi: Ket) -> float:
    """|<psi|phi>|^2 between two kets."""
    return abs(psi.dag_mul(phi)) ** 2


def density_matrix(psi: Ket) -> Operator:
    return psi.outer(psi)
