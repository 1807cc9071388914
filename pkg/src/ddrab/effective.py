"""Second-order effective Hamiltonians for driven antiblockade schemes.

The interaction-picture Hamiltonian is a finite Fourier series
H(t) = sum_k A_k e^{i nu_k t}.  Moving to the frame generated by
K = 2 Delta (P_+ - P_-), where P_+/- project on the upper/lower dressed
pair states, shifts every matrix element's frequency by the difference of
its K eigenvalues and leaves a small static mismatch H_d - K.  Writing the
rotated series as H0 + sum_{w>0} (h_w e^{-i w t} + h.c.), the leading
time-averaged Hamiltonian is

    H_eff = H0 + sum_{w>0} [h_w^dag, h_w] / w,

valid while ||h_w|| / w stays small.  Under the antiblockade condition the
pair-state light shifts cancel against the mismatch and the series reduces
to a two-photon coupling Omega^2/(2 Delta) between |11> and the
interaction-selected two-excitation state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    DriveParams,
    InteractionParams,
    SchemeSpec,
    TwoAtomHamiltonian,
    build_hamiltonian,
    interaction_hamiltonian,
)
from .qcore import Basis, Operator, assert_hermitian, basis_ket

FREQ_TOL = 1e-6  # rad/us; harmonics closer than this are merged
VALIDITY_THRESHOLD = 0.2


class EffectiveError(Exception):
    """Raised when the harmonic series violates its structural invariants."""


class ValidityWarning(UserWarning):
    """Emitted when ||h_w||/w is too large for the second-order truncation."""


@dataclass(frozen=True)
class HarmonicTerm:
    """One Fourier coefficient: op * e^{i freq t}."""

    op: np.ndarray
    freq: float


def rotation_generator(scheme: SchemeSpec, v: float, delta: float) -> Operator:
    """Frame generator K = 2*delta * sum_k sign(e_k) P_k over the nonzero
    eigenspaces of the interaction Hamiltonian.

    The magnitude is set by the two-photon drive frequency, not by the
    interaction strength, so the rotated drive harmonics stay commensurate.
    """
    h_d = interaction_hamiltonian(scheme, v)
    evals, vecs = np.linalg.eigh(h_d.data)
    scale = float(np.max(np.abs(evals)))
    if scale == 0.0:
        raise EffectiveError("interaction Hamiltonian is zero; no frame to rotate into")
    k = np.zeros_like(h_d.data)
    for i, e in enumerate(evals):
        if abs(e) > 1e-9 * scale:
            p = np.outer(vecs[:, i], vecs[:, i].conj())
            k += 2.0 * delta * math.copysign(1.0, e) * p
    return Operator(h_d.basis, k)


def _merge_terms(terms: list[HarmonicTerm], freq_tol: float) -> list[HarmonicTerm]:
    merged: list[tuple[float, np.ndarray]] = []
    for term in terms:
        for idx, (f, acc) in enumerate(merged):
            if abs(term.freq - f) < freq_tol:
                merged[idx] = (f, acc + term.op)
                break
        else:
            merged.append((term.freq, term.op.copy()))
    out = []
    scale = max((float(np.max(np.abs(a))) for _, a in merged), default=0.0)
    for f, a in merged:
        if scale and float(np.max(np.abs(a))) < 1e-14 * scale:
            continue
        out.append(HarmonicTerm(op=a, freq=f))
    return sorted(out, key=lambda t: t.freq)


def rotated_harmonics(
    ham: TwoAtomHamiltonian,
    generator: Operator | None = None,
    freq_tol: float = FREQ_TOL,
) -> list[HarmonicTerm]:
    """Fourier series of e^{iKt} (H(t) - K) e^{-iKt}.

    Element (m, n) of a term at frequency nu moves to nu + (k_m - k_n) in
    K's eigenbasis; terms are split accordingly and re-merged by frequency.
    """
    if generator is None:
        generator = rotation_generator(
            ham.scheme, ham.inter.strength(), ham.drive.detuning
        )
    if generator.basis != ham.basis:
        raise EffectiveError("rotation generator basis does not match Hamiltonian")
    evals, w = np.linalg.eigh(generator.data)
    diffs = evals[:, None] - evals[None, :]
    # distinct frequency shifts present in the generator spectrum
    raw = np.sort(diffs.ravel())
    shifts: list[float] = []
    for d in raw:
        if not shifts or abs(d - shifts[-1]) > freq_tol:
            shifts.append(float(d))

    terms = ham.fourier_terms()
    terms.append((-generator.data, 0.0))

    out: list[HarmonicTerm] = []
    wd = w.conj().T
    for a, nu in terms:
        at = wd @ a @ w
        for s in shifts:
            mask = np.abs(diffs - s) < freq_tol
            if not np.any(mask & (np.abs(at) > 0.0)):
                continue
            piece = w @ (at * mask) @ wd
            out.append(HarmonicTerm(op=piece, freq=nu + s))
    merged = _merge_terms(out, freq_tol)
    _check_hermitian_closure(merged, freq_tol)
    return merged


def _check_hermitian_closure(terms: list[HarmonicTerm], freq_tol: float) -> None:
    scale = max((float(np.max(np.abs(t.op))) for t in terms), default=1.0)
    for t in terms:
        partner = [u.op for u in terms if abs(u.freq + t.freq) < freq_tol]
        total = sum(partner) if partner else np.zeros_like(t.op)
        if float(np.max(np.abs(total - t.op.conj().T))) > 1e-10 * scale:
            raise EffectiveError(
                f"harmonic series not closed under conjugation at freq {t.freq:g}"
            )


@dataclass(frozen=True)
class EffectiveModel:
    """Static effective Hamiltonian plus the harmonics that produced it."""

    scheme: SchemeSpec
    basis: Basis
    h_eff: Operator
    static: Operator
    harmonics: tuple[HarmonicTerm, ...]
    validity_ratio: float
    generator: Operator

    def rabi_eff(self) -> float:
        """Effective two-photon Rabi frequency: twice the norm of the
        |11> row restricted to the two-excitation block."""
        row = []
        ket11 = self.basis.index(("1", "1"))
        for label in self.scheme.two_excitation_labels():
            row.append(self.h_eff.data[ket11, self.basis.index(label)])
        return 2.0 * float(np.linalg.norm(row))

    def coupling_to(self, label_terms) -> complex:
        """<11| H_eff |target> for a (label -> amplitude) superposition."""
        ket11 = self.basis.index(("1", "1"))
        val = 0.0 + 0.0j
        for label, amp in dict(label_terms).items():
            val += self.h_eff.data[ket11, self.basis.index(label)] * amp
        return complex(val)


def effective_from_harmonics(
    scheme: SchemeSpec,
    basis: Basis,
    terms: list[HarmonicTerm],
    generator: Operator,
    freq_tol: float = FREQ_TOL,
    validity_threshold: float = VALIDITY_THRESHOLD,
    warn: bool = True,
) -> EffectiveModel:
    static = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    neg: dict[float, np.ndarray] = {}
    pos: dict[float, np.ndarray] = {}
    for t in terms:
        if abs(t.freq) < freq_tol:
            static = static + t.op
        elif t.freq < 0:
            neg[-t.freq] = t.op
        else:
            pos[t.freq] = t.op

    h2 = np.zeros_like(static)
    hnorms = []
    for omega, h in sorted(neg.items()):
        partner = next((p for f, p in pos.items() if abs(f - omega) < freq_tol), None)
        if partner is None or float(np.max(np.abs(partner - h.conj().T))) > 1e-9 * max(
            1.0, float(np.max(np.abs(h)))
        ):
            raise EffectiveError(f"missing conjugate partner at frequency {omega:g}")
        h2 += (h.conj().T @ h - h @ h.conj().T) / omega
        hnorms.append(float(np.linalg.norm(h, 2)))

    min_omega = min(neg.keys(), default=math.inf)
    ratio = (max(hnorms) / min_omega) if hnorms else 0.0
    if warn and ratio > validity_threshold:
        warnings.warn(
            f"harmonic amplitude over frequency ratio {ratio:.3f} exceeds "
            f"{validity_threshold}; second-order truncation is unreliable",
            ValidityWarning,
            stacklevel=2,
        )

    static_op = Operator(basis, static)
    h_eff = Operator(basis, static + h2)
    assert_hermitian(h_eff, tol=1e-9, what="effective Hamiltonian")
    osc = tuple(t for t in terms if abs(t.freq) >= freq_tol)
    return EffectiveModel(
        scheme=scheme,
        basis=basis,
        h_eff=h_eff,
        static=static_op,
        harmonics=osc,
        validity_ratio=ratio,
        generator=generator,
    )


def build_effective(
    scheme: SchemeSpec,
    drive: DriveParams,
    inter: InteractionParams,
    extra_static: Operator | None = None,
    warn: bool = True,
) -> EffectiveModel:
    """Full pipeline: assemble H(t), rotate, time-average to second order."""
    ham = build_hamiltonian(scheme, drive, inter)
    if extra_static is not None:
        ham = ham.with_extra_static(extra_static)
    generator = rotation_generator(scheme, inter.strength(), drive.detuning)
    terms = rotated_harmonics(ham, generator)
    return effective_from_harmonics(
        scheme, ham.basis, terms, generator, warn=warn
    )


def closed_form_effective(
    scheme: SchemeSpec, drive: DriveParams, inter: InteractionParams
) -> Operator:
    """Textbook antiblockade coupling Omega^2/(2 Delta) |11><target| + h.c.

    Valid on the full antiblockade condition, where all second-order light
    shifts on the computational and dressed pair states cancel.
    """
    basis = scheme.basis()
    g = drive.rabi**2 / (2.0 * drive.detuning) * np.exp(2.0j * drive.phase)
    ket11 = basis_ket(basis, ("1", "1"))
    target = scheme.target_ket()
    cross = g * ket11.outer(target)
    return cross + Operator(basis, cross.data.conj().T)


@dataclass(frozen=True)
class ClosedFormReport:
    scheme: str
    coupling: float
    max_abs_dev: float
    rel_dev: float
    rtol: float
    ok: bool


def verify_closed_form(
    scheme: SchemeSpec,
    drive: DriveParams,
    inter: InteractionParams,
    rtol: float = 1e-8,
) -> ClosedFormReport:
    """Compare generated and closed-form effective Hamiltonians on the
    block spanned by |11> and the two-excitation states."""
    model = build_effective(scheme, drive, inter)
    closed = closed_form_effective(scheme, drive, inter)
    basis = model.basis
    labels = (("1", "1"),) + scheme.two_excitation_labels()
    idx = [basis.index(l) for l in labels]
    block_gen = model.h_eff.data[np.ix_(idx, idx)]
    block_ref = closed.data[np.ix_(idx, idx)]
    dev = float(np.max(np.abs(block_gen - block_ref)))
    coupling = drive.rabi**2 / (2.0 * drive.detuning)
    rel = dev / coupling if coupling > 0 else math.inf
    return ClosedFormReport(
        scheme=scheme.name,
        coupling=coupling,
        max_abs_dev=dev,
        rel_dev=rel,
        rtol=rtol,
        ok=rel <= rtol,
    )
