"""Two-atom Rydberg antiblockade models with dipole-exchange interactions.

Units convention: interaction coefficients are quoted in GHz um^3 (dipolar)
or GHz um^6 (van der Waals) and read as ordinary frequencies; internally all
Hamiltonian entries are angular frequencies in rad/us (1 MHz ordinary maps to
2*pi rad/us).  Times are microseconds.  Decay rates are plain inverse
lifetimes 1/tau in 1/us, not multiplied by 2*pi.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .qcore import (
    Basis,
    Ket,
    Operator,
    ValidationError,
    assert_hermitian,
    basis_ket,
    identity,
    ketbra,
    operator_from_terms,
    product_basis,
    superposition,
    tensor,
)

TWO_PI = 2.0 * math.pi


class ModelError(Exception):
    """Raised for invalid scheme parameters or unsatisfiable conditions."""


# ---------------------------------------------------------------------------
# Interaction strengths
# ---------------------------------------------------------------------------

def dd_strength(c3_ghz_um3: float, r_um: float) -> float:
    """Resonant dipole-dipole strength C3 / r^3 in rad/us.

    C3 is read as an ordinary frequency coefficient (GHz um^3); 2.54 GHz um^3
    at 3.0 um gives 2*pi x 94.07 MHz.
    """
    if r_um <= 0.0:
        raise ModelError(f"interatomic distance must be positive, got {r_um}")
    return TWO_PI * (c3_ghz_um3 * 1.0e3) / r_um**3


def vdw_strength(c6_ghz_um6: float, r_um: float) -> float:
    """Van der Waals strength C6 / r^6 in rad/us (C6 in GHz um^6)."""
    if r_um <= 0.0:
        raise ModelError(f"interatomic distance must be positive, got {r_um}")
    return TWO_PI * (c6_ghz_um6 * 1.0e3) / r_um**6


def crossover_distance(c3_ghz_um3: float, delta_ghz: float) -> float:
    """Distance where resonant-dipole and dispersive couplings are equal.

    For a pair state split by a Forster defect delta, the interaction turns
    from C3/r^3 to (C3^2/delta)/r^6 character around
    R_c = (4 C3^2 / delta^2)^(1/6).  Both coefficients must share units.
    """
    if delta_ghz == 0.0:
        raise ModelError("crossover distance undefined for zero Forster defect")
    return (4.0 * c3_ghz_um3**2 / delta_ghz**2) ** (1.0 / 6.0)


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriveParams:
    """Laser drive on the |1> -> Rydberg transitions.

    rabi and detuning are angular (rad/us).  With bichromatic=True each driven
    transition carries both e^{+i detuning t} and e^{-i detuning t} tones with
    amplitude rabi/2, i.e. a rabi*cos(detuning*t) envelope.  With
    bichromatic=False only the tone with sign `tone` is kept.  phase is a
    common laser phase applied to every driven transition; a two-photon
    process therefore picks up twice this phase.
    """

    rabi: float
    detuning: float
    bichromatic: bool = True
    tone: int = +1
    phase: float = 0.0

    def __post_init__(self):
        if self.rabi < 0.0:
            raise ModelError(f"Rabi frequency must be non-negative, got {self.rabi}")
        if self.detuning <= 0.0:
            raise ModelError(f"detuning must be positive, got {self.detuning}")
        if self.tone not in (+1, -1):
            raise ModelError(f"tone must be +1 or -1, got {self.tone}")

    @property
    def tones(self) -> tuple[float, ...]:
        if self.bichromatic:
            return (+self.detuning, -self.detuning)
        return (self.tone * self.detuning,)


@dataclass(frozen=True)
class InteractionParams:
    """Interaction coefficient and distance; kind is 'dd' or 'vdw'."""

    kind: str
    coefficient: float
    distance: float

    def __post_init__(self):
        if self.kind not in ("dd", "vdw"):
            raise ModelError(f"interaction kind must be 'dd' or 'vdw', got {self.kind!r}")
        if self.distance <= 0.0:
            raise ModelError(f"distance must be positive, got {self.distance}")

    def strength(self) -> float:
        if self.kind == "dd":
            return dd_strength(self.coefficient, self.distance)
        return vdw_strength(self.coefficient, self.distance)


@dataclass(frozen=True)
class DecayRates:
    """Map level symbol -> decay rate gamma = 1/tau in 1/us."""

    gamma: Mapping[str, float]

    def __post_init__(self):
        for sym, g in self.gamma.items():
            if g < 0.0:
                raise ModelError(f"negative decay rate for level {sym!r}: {g}")

    @classmethod
    def from_lifetimes_ms(cls, tau_ms: Mapping[str, float]) -> "DecayRates":
        rates = {}
        for sym, tau in tau_ms.items():
            if tau <= 0.0:
                raise ModelError(f"lifetime for level {sym!r} must be positive, got {tau}")
            rates[sym] = 1.0e-3 / tau
        return cls(gamma=dict(rates))

    def rate(self, symbol: str) -> float:
        try:
            return self.gamma[symbol]
        except KeyError:
            raise ModelError(f"no decay rate defined for level {symbol!r}") from None


# ---------------------------------------------------------------------------
# Antiblockade conditions
# ---------------------------------------------------------------------------

class RabCondition(enum.Enum):
    """Resonance conditions tying interaction strength V to the detuning.

    Residual is written as condition_value(Delta, Omega) - V; the antiblockade
    point is the positive root of residual = 0.
    """

    FORSTER_FULL = "forster_full"
    FORSTER_NOSTARK = "forster_nostark"
    EXCHANGE_FULL = "exchange_full"
    VDW_REF = "vdw_ref"


def condition_value(cond: RabCondition, delta: float, omega: float) -> float:
    """Interaction strength V that makes (delta, omega) an antiblockade point."""
    if delta <= 0.0:
        raise ModelError(f"detuning must be positive, got {delta}")
    s2 = math.sqrt(2.0)
    if cond is RabCondition.FORSTER_FULL:
        return s2 * delta - omega**2 / (3.0 * s2 * delta)
    if cond is RabCondition.FORSTER_NOSTARK:
        return s2 * delta
    if cond is RabCondition.EXCHANGE_FULL:
        return 2.0 * delta - omega**2 / (3.0 * delta)
    if cond is RabCondition.VDW_REF:
        return 2.0 * delta - 2.0 * omega**2 / (3.0 * delta)
    raise ModelError(f"unknown condition {cond}")


def condition_residual(cond: RabCondition, delta: float, omega: float, v: float) -> float:
    return condition_value(cond, delta, omega) - v


def solve_rab_detuning(cond: RabCondition, v: float, omega: float) -> float:
    """Positive detuning root of the antiblockade condition.

    The root is the branch continuous with the omega -> 0 limit
    (Delta = V/sqrt(2) or V/2).  Closed forms follow from the quadratic
    obtained by multiplying the condition through by the detuning.
    """
    if v <= 0.0:
        raise ModelError(f"interaction strength must be positive, got {v}")
    if omega < 0.0:
        raise ModelError(f"Rabi frequency must be non-negative, got {omega}")
    s2 = math.sqrt(2.0)
    if cond is RabCondition.FORSTER_FULL:
        # 2 d^2 - sqrt(2) V d - Omega^2/3 = 0
        return (s2 * v + math.sqrt(2.0 * v**2 + 8.0 * omega**2 / 3.0)) / 4.0
    if cond is RabCondition.FORSTER_NOSTARK:
        return v / s2
    if cond is RabCondition.EXCHANGE_FULL:
        # 2 d^2 - V d - Omega^2/3 = 0
        return (v + math.sqrt(v**2 + 8.0 * omega**2 / 3.0)) / 4.0
    if cond is RabCondition.VDW_REF:
        # 2 d^2 - V d - 2 Omega^2/3 = 0
        return (v + math.sqrt(v**2 + 16.0 * omega**2 / 3.0)) / 4.0
    raise ModelError(f"unknown condition {cond}")


def condition_sensitivity(cond: RabCondition, omega: float, delta: float) -> float:
    """Detuning adjustment per unit interaction change, d(Delta)/dV.

    The derivative is taken along operating rays of fixed Omega/Delta ratio:
    retuning the lasers to track an interaction drift rescales the Rabi
    frequency together with the detuning, as operating points are specified
    through ratios like Delta = 10 Omega.  Along such a ray the condition is
    linear in Delta, so d(Delta)/dV = Delta / V(Delta, Omega) exactly.
    """
    v = condition_value(cond, delta, omega)
    if v <= 0.0:
        raise ModelError(
            f"condition value not positive at delta={delta}, omega={omega}; no antiblockade point"
        )
    return delta / v


# ---------------------------------------------------------------------------
# Scheme definitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeSpec:
    """Static description of a two-atom level scheme.

    pair_upper / pair_lower give the interaction-coupled two-excitation
    vectors as (label, amplitude) terms: the interaction Hamiltonian is
    pair_scale * V * (|upper><lower| + h.c.), except for the diagonal vdw
    case (pair_lower is None) where it is V * |upper><upper|.
    """

    name: str
    levels_atom1: tuple[str, ...]
    levels_atom2: tuple[str, ...]
    rydberg_atom1: tuple[str, ...]
    rydberg_atom2: tuple[str, ...]
    drives: tuple[tuple[int, str, str], ...]
    interaction_kind: str
    pair_upper: tuple[tuple[tuple[str, str], float], ...]
    pair_lower: tuple[tuple[tuple[str, str], float], ...] | None
    pair_scale: float
    default_condition: RabCondition

    def basis(self) -> Basis:
        return product_basis(Basis(self.levels_atom1), Basis(self.levels_atom2))

    @property
    def target_terms(self) -> tuple[tuple[tuple[str, str], float], ...]:
        """Two-excitation state reached at the transfer peak."""
        return self.pair_lower if self.pair_lower is not None else self.pair_upper

    def target_ket(self) -> Ket:
        return superposition(self.basis(), dict(self.target_terms))

    def upper_ket(self) -> Ket:
        return superposition(self.basis(), dict(self.pair_upper))

    def lower_ket(self) -> Ket | None:
        if self.pair_lower is None:
            return None
        return superposition(self.basis(), dict(self.pair_lower))

    def n_rydberg(self, label: tuple[str, str]) -> int:
        l1, l2 = label
        return int(l1 in self.rydberg_atom1) + int(l2 in self.rydberg_atom2)

    def single_excitation_labels(self) -> tuple[tuple[str, str], ...]:
        return tuple(l for l in self.basis().labels if self.n_rydberg(l) == 1)

    def two_excitation_labels(self) -> tuple[tuple[str, str], ...]:
        return tuple(l for l in self.basis().labels if self.n_rydberg(l) == 2)

    def computational_labels(self) -> tuple[tuple[str, str], ...]:
        return (("0", "0"), ("0", "1"), ("1", "0"), ("1", "1"))


FORSTER = SchemeSpec(
    name="forster",
    levels_atom1=("0", "1", "p", "d", "f"),
    levels_atom2=("0", "1", "p", "d", "f"),
    rydberg_atom1=("p", "d", "f"),
    rydberg_atom2=("p", "d", "f"),
    drives=((0, "1", "d"), (1, "1", "d")),
    interaction_kind="dd",
    pair_upper=((("d", "d"), 1.0),),
    pair_lower=(
        (("p", "f"), 1.0 / math.sqrt(2.0)),
        (("f", "p"), 1.0 / math.sqrt(2.0)),
    ),
    pair_scale=math.sqrt(2.0),
    default_condition=RabCondition.FORSTER_FULL,
)

SPIN_EXCHANGE = SchemeSpec(
    name="spin_exchange",
    levels_atom1=("0", "1", "p", "d"),
    levels_atom2=("0", "1", "p", "d"),
    rydberg_atom1=("p", "d"),
    rydberg_atom2=("p", "d"),
    drives=((0, "1", "p"), (1, "1", "d")),
    interaction_kind="dd",
    pair_upper=((("p", "d"), 1.0),),
    pair_lower=((("d", "p"), 1.0),),
    pair_scale=1.0,
    default_condition=RabCondition.EXCHANGE_FULL,
)

COLLECTIVE_EXCHANGE = SchemeSpec(
    name="collective_exchange",
    levels_atom1=("0", "1", "s", "p"),
    levels_atom2=("0", "1", "s'", "p'"),
    rydberg_atom1=("s", "p"),
    rydberg_atom2=("s'", "p'"),
    drives=((0, "1", "s"), (1, "1", "s'")),
    interaction_kind="dd",
    pair_upper=((("s", "s'"), 1.0),),
    pair_lower=((("p", "p'"), 1.0),),
    pair_scale=1.0,
    default_condition=RabCondition.EXCHANGE_FULL,
)

VDW_REFERENCE = SchemeSpec(
    name="vdw_reference",
    levels_atom1=("0", "1", "d"),
    levels_atom2=("0", "1", "d"),
    rydberg_atom1=("d",),
    rydberg_atom2=("d",),
    drives=((0, "1", "d"), (1, "1", "d")),
    interaction_kind="vdw",
    pair_upper=((("d", "d"), 1.0),),
    pair_lower=None,
    pair_scale=1.0,
    default_condition=RabCondition.VDW_REF,
)

SCHEMES: dict[str, SchemeSpec] = {
    s.name: s for s in (FORSTER, SPIN_EXCHANGE, COLLECTIVE_EXCHANGE, VDW_REFERENCE)
}


# ---------------------------------------------------------------------------
# Hamiltonian assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriveTerm:
    """One oscillating Hamiltonian term amp * sum_nu e^{i nu t} * op + h.c.

    op is the de-excitation part (|1><r| legs) summed over both atoms'
    driven transitions; it is not Hermitian on its own.
    """

    op: np.ndarray
    amp: complex
    tones: tuple[float, ...]


class TwoAtomHamiltonian:
    """Interaction-picture Hamiltonian H(t) = H_static + drive terms."""

    def __init__(
        self,
        scheme: SchemeSpec,
        drive: DriveParams,
        inter: InteractionParams,
        static: Operator,
        drive_terms: Sequence[DriveTerm],
    ):
        self.scheme = scheme
        self.drive = drive
        self.inter = inter
        self.basis = static.basis
        self.static = static
        self.drive_terms = tuple(drive_terms)
        evals = np.linalg.eigvalsh(static.data)
        self._static_scale = float(np.max(np.abs(evals))) if evals.size else 0.0

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def omega_max(self) -> float:
        """Largest angular frequency present in the dynamics (rad/us)."""
        tone_max = max((abs(t) for term in self.drive_terms for t in term.tones), default=0.0)
        return tone_max + self._static_scale

    @property
    def drive_period(self) -> float | None:
        """Common period of the drive envelopes, if one exists."""
        freqs = {abs(t) for term in self.drive_terms for t in term.tones}
        if not freqs:
            return None
        if max(freqs) - min(freqs) > 1e-9 * max(freqs):
            return None
        return TWO_PI / max(freqs)

    def h_array(self, t: float) -> np.ndarray:
        """H(t) as a bare ndarray (hot path for the integrators)."""
        h = self.static.data.copy()
        for term in self.drive_terms:
            c = term.amp * sum(np.exp(1j * nu * t) for nu in term.tones)
            h += c * term.op
            h += np.conj(c) * term.op.conj().T
        return h

    def at(self, t: float) -> Operator:
        return Operator(self.basis, self.h_array(t))

    def fourier_terms(self) -> list[tuple[np.ndarray, float]]:
        """All (operator, signed frequency) pairs, Hermitian-closed.

        The Hamiltonian is sum over pairs of op * e^{i freq t}; the static
        part appears at frequency 0.
        """
        terms: list[tuple[np.ndarray, float]] = []
        if np.any(self.static.data):
            terms.append((self.static.data.copy(), 0.0))
        for term in self.drive_terms:
            for nu in term.tones:
                terms.append((term.amp * term.op, nu))
                terms.append((np.conj(term.amp) * term.op.conj().T, -nu))
        return terms

    def with_extra_static(self, extra: Operator) -> "TwoAtomHamiltonian":
        assert_hermitian(extra, tol=1e-9, what="extra static term")
        return TwoAtomHamiltonian(
            self.scheme, self.drive, self.inter, self.static + extra, self.drive_terms
        )

    def with_drive_phase(self, phase: float) -> "TwoAtomHamiltonian":
        """Same Hamiltonian with the common laser phase reset to `phase`."""
        new_drive = replace(self.drive, phase=phase)
        rot = np.exp(1j * (phase - self.drive.phase))
        new_terms = tuple(
            DriveTerm(op=term.op, amp=term.amp * rot, tones=term.tones)
            for term in self.drive_terms
        )
        return TwoAtomHamiltonian(self.scheme, new_drive, self.inter, self.static, new_terms)


def interaction_hamiltonian(scheme: SchemeSpec, v: float) -> Operator:
    """Static interaction term on the pair basis."""
    basis = scheme.basis()
    upper = superposition(basis, dict(scheme.pair_upper))
    if scheme.pair_lower is None:
        return v * upper.outer(upper)
    lower = superposition(basis, dict(scheme.pair_lower))
    cross = upper.outer(lower)
    return scheme.pair_scale * v * (cross + Operator(basis, cross.data.conj().T))


def drive_lowering_operator(scheme: SchemeSpec) -> Operator:
    """Sum of |g><r| legs over the scheme's driven transitions."""
    b1, b2 = Basis(scheme.levels_atom1), Basis(scheme.levels_atom2)
    basis = scheme.basis()
    total = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for atom, g, r in scheme.drives:
        if atom == 0:
            op = tensor(ketbra(b1, g, r), identity(b2))
        else:
            op = tensor(identity(b1), ketbra(b2, g, r))
        total += op.data
    return Operator(basis, total)


def build_hamiltonian(
    scheme: SchemeSpec, drive: DriveParams, inter: InteractionParams
) -> TwoAtomHamiltonian:
    if inter.kind != scheme.interaction_kind:
        raise ModelError(
            f"scheme {scheme.name!r} expects {scheme.interaction_kind!r} interaction, "
            f"got {inter.kind!r}"
        )
    v = inter.strength()
    static = interaction_hamiltonian(scheme, v)
    lowering = drive_lowering_operator(scheme)
    amp = 0.5 * drive.rabi * np.exp(1j * drive.phase)
    terms = [DriveTerm(op=lowering.data, amp=amp, tones=drive.tones)]
    return TwoAtomHamiltonian(scheme, drive, inter, static, terms)


def build_full_hamiltonian(
    scheme: SchemeSpec, drive: DriveParams, inter: InteractionParams, t: float
) -> Operator:
    """Snapshot of the full interaction-picture Hamiltonian at time t."""
    return build_hamiltonian(scheme, drive, inter).at(t)


# ---------------------------------------------------------------------------
# Dissipation
# ---------------------------------------------------------------------------

def build_lindblad_set(scheme: SchemeSpec, decay: DecayRates) -> list[Operator]:
    """Collapse operators sqrt(gamma_r/2) |g><r| per atom, Rydberg level and
    ground state.  Each Rydberg level decays at total rate gamma_r with equal
    branching to |0> and |1>."""
    b1, b2 = Basis(scheme.levels_atom1), Basis(scheme.levels_atom2)
    ops: list[Operator] = []
    for atom, (own, other) in ((0, (b1, b2)), (1, (b2, b1))):
        ryd = scheme.rydberg_atom1 if atom == 0 else scheme.rydberg_atom2
        for r in ryd:
            gamma = decay.rate(r)
            for g in ("0", "1"):
                jump = math.sqrt(gamma / 2.0) * ketbra(own, g, r)
                if atom == 0:
                    ops.append(tensor(jump, identity(other)))
                else:
                    ops.append(tensor(identity(other), jump))
    return ops


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    """Named parameter set bundling a scheme with published-style numbers."""

    name: str
    scheme: str
    coefficient: float
    distance_um: float
    lifetimes_ms: Mapping[str, float]
    rabi_mhz: float
    condition: RabCondition
    note: str

    def scheme_spec(self) -> SchemeSpec:
        return SCHEMES[self.scheme]

    def interaction(self, distance_um: float | None = None) -> InteractionParams:
        return InteractionParams(
            kind=self.scheme_spec().interaction_kind,
            coefficient=self.coefficient,
            distance=self.distance_um if distance_um is None else distance_um,
        )

    def decay(self) -> DecayRates:
        return DecayRates.from_lifetimes_ms(self.lifetimes_ms)

    def drive(self, rabi_mhz: float | None = None, **kwargs) -> DriveParams:
        rabi = TWO_PI * (self.rabi_mhz if rabi_mhz is None else rabi_mhz)
        v = self.interaction().strength()
        delta = solve_rab_detuning(self.condition, v, rabi)
        return DriveParams(rabi=rabi, detuning=delta, **kwargs)


PRESETS: dict[str, Preset] = {
    "forster-ravets": Preset(
        name="forster-ravets",
        scheme="forster",
        coefficient=2.54,
        distance_um=3.0,
        lifetimes_ms={"p": 0.53, "d": 0.22, "f": 0.13},
        rabi_mhz=5.0,
        condition=RabCondition.FORSTER_FULL,
        note="Five-level pair on a Forster resonance; both atoms driven 1-d.",
    ),
    "spin-exchange-barredo": Preset(
        name="spin-exchange-barredo",
        scheme="spin_exchange",
        coefficient=7.965,
        distance_um=3.0,
        lifetimes_ms={"p": 0.59, "d": 0.25},
        rabi_mhz=5.0,
        condition=RabCondition.EXCHANGE_FULL,
        note="Asymmetric drive (1-p and 1-d) with pd-dp exchange coupling.",
    ),
    "collective-gorniaczyk": Preset(
        name="collective-gorniaczyk",
        scheme="collective_exchange",
        coefficient=0.6,
        distance_um=2.0,
        lifetimes_ms={"s": 0.12, "s'": 0.13, "p": 0.25, "p'": 0.27},
        rabi_mhz=5.0,
        condition=RabCondition.EXCHANGE_FULL,
        note="Distinct level ladders per atom; ss'-pp' collective exchange.",
    ),
    "vdw-reference": Preset(
        name="vdw-reference",
        scheme="vdw_reference",
        coefficient=1700.0,
        distance_um=6.6,
        lifetimes_ms={"d": 0.22},
        rabi_mhz=2.2,
        condition=RabCondition.VDW_REF,
        note="Diagonal van der Waals reference model for comparisons.",
    ),
}
