"""Time evolution and steady states for the two-atom models.

Fixed-step RK4 in the interaction picture.  The master equation is

    drho/dt = i [rho, H(t)] + sum_k ( L_k rho L_k^dag - {L_k^dag L_k, rho}/2 )

with the collapse operators carrying their rate prefactors.  The commutator
uses one matrix product per stage (A = H rho, then -i(A - A^dag) for
Hermitian rho); the jump term is a precomputed sparse superoperator on the
row-major vectorization; the anticommutator is elementwise because
sum_k L_k^dag L_k is diagonal for pure-decay collapse sets.

For drive-periodic Hamiltonians a one-period propagator can be built once
(batched RK4 over all basis matrices) and applied for many periods by
binary powering; this factors the same discretization as direct stepping,
so both paths agree to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm, null_space

from .model import TWO_PI, TwoAtomHamiltonian
from .qcore import Basis, Ket, Operator

TRACE_TOL = 1e-8
HERM_TOL = 1e-10
EIG_TOL = 1e-9
NORM_TOL = 1e-8
MIN_POINTS_PER_CYCLE = 20
DEFAULT_POINTS_PER_CYCLE = 40


class DynamicsError(Exception):
    """Raised for invalid integration setups."""


class NumericalInvariantError(Exception):
    """Raised when an evolved state violates trace, Hermiticity, positivity
    or norm bounds; signals an untrustworthy integration."""


# ---------------------------------------------------------------------------
# Time grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform integration grid: n_steps steps covering [0, t_final]."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.t_final <= 0.0:
            raise DynamicsError(f"t_final must be positive, got {self.t_final}")
        if self.n_steps < 1:
            raise DynamicsError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)

    @classmethod
    def for_frequency(
        cls,
        t_final: float,
        omega_max: float,
        points_per_cycle: int = DEFAULT_POINTS_PER_CYCLE,
    ) -> "TimeGrid":
        if points_per_cycle < MIN_POINTS_PER_CYCLE:
            raise DynamicsError(
                f"points_per_cycle {points_per_cycle} below the resolution "
                f"floor {MIN_POINTS_PER_CYCLE}"
            )
        if omega_max <= 0.0:
            return cls(t_final, 1000)
        dt_target = (TWO_PI / omega_max) / points_per_cycle
        return cls(t_final, max(1, math.ceil(t_final / dt_target)))

    def validate_against(self, omega_max: float) -> None:
        if omega_max > 0.0 and self.dt > (TWO_PI / omega_max) / MIN_POINTS_PER_CYCLE:
            raise DynamicsError(
                f"grid dt {self.dt:.3e} too coarse for max frequency "
                f"{omega_max:.3e} rad/us (need <= {(TWO_PI / omega_max) / MIN_POINTS_PER_CYCLE:.3e})"
            )


# ---------------------------------------------------------------------------
# Hamiltonian adapters
# ---------------------------------------------------------------------------

class _TimeDependent:
    """Uniform view: callable H(t) plus spectral metadata."""

    def __init__(self, h_of_t: Callable[[float], np.ndarray], omega_max: float,
                 basis: Basis, period: float | None):
        self.h_of_t = h_of_t
        self.omega_max = omega_max
        self.basis = basis
        self.period = period


def _adapt(ham) -> _TimeDependent:
    if isinstance(ham, TwoAtomHamiltonian):
        return _TimeDependent(ham.h_array, ham.omega_max, ham.basis, ham.drive_period)
    if isinstance(ham, Operator):
        data = ham.data
        scale = float(np.linalg.norm(data, 2))
        return _TimeDependent(lambda t: data, scale, ham.basis, None)
    raise DynamicsError(f"cannot interpret {type(ham).__name__} as a Hamiltonian")


def _as_ket_array(state, dim) -> np.ndarray:
    if isinstance(state, Ket):
        return state.data.astype(np.complex128)
    arr = np.asarray(state, dtype=np.complex128)
    if arr.shape != (dim,):
        raise DynamicsError(f"state shape {arr.shape} incompatible with dim {dim}")
    return arr


def _as_density_array(state, dim) -> np.ndarray:
    if isinstance(state, Ket):
        v = state.data.astype(np.complex128)
        return np.outer(v, v.conj())
    if isinstance(state, Operator):
        return state.data.astype(np.complex128)
    arr = np.asarray(state, dtype=np.complex128)
    if arr.shape == (dim,):
        return np.outer(arr, arr.conj())
    if arr.shape == (dim, dim):
        return arr.copy()
    raise DynamicsError(f"state shape {arr.shape} incompatible with dim {dim}")


def _lindblad_arrays(lindblads, dim) -> list[np.ndarray]:
    out = []
    for op in lindblads:
        data = op.data if isinstance(op, Operator) else np.asarray(op, dtype=np.complex128)
        if data.shape != (dim, dim):
            raise DynamicsError("collapse operator dimension mismatch")
        out.append(data.astype(np.complex128))
    return out


# ---------------------------------------------------------------------------
# Invariant checks
# ---------------------------------------------------------------------------

def check_density_invariants(rho: np.ndarray, where: str = "") -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalInvariantError(
            f"trace drifted to {tr:.12g} {where}".strip()
        )
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERM_TOL:
        raise NumericalInvariantError(
            f"hermiticity deviation {herm:.3e} {where}".strip()
        )
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam[0] < -EIG_TOL:
        raise NumericalInvariantError(
            f"negative eigenvalue {lam[0]:.3e} {where}".strip()
        )


def check_ket_invariants(psi: np.ndarray, where: str = "") -> None:
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if drift > NORM_TOL:
        raise NumericalInvariantError(
            f"state norm drifted by {drift:.3e} {where}".strip()
        )


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled states from an integration run."""

    basis: Basis
    times: np.ndarray
    states: np.ndarray  # (k, n) kets or (k, n, n) density matrices
    kind: str  # "ket" | "density"

    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self, labels: Sequence | None = None) -> dict:
        labels = list(labels) if labels is not None else list(self.basis.labels)
        out = {}
        for label in labels:
            i = self.basis.index(label)
            if self.kind == "ket":
                out[label] = np.abs(self.states[:, i]) ** 2
            else:
                out[label] = self.states[:, i, i].real
        return out

    def expectation(self, op: Operator) -> np.ndarray:
        if self.kind == "ket":
            return np.real(
                np.einsum("ki,ij,kj->k", self.states.conj(), op.data, self.states)
            )
        return np.real(np.einsum("ij,kji->k", op.data, self.states))

    def overlap_with(self, ket: Ket) -> np.ndarray:
        """|<phi|psi>|^2 for kets, <phi|rho|phi> for density matrices."""
        v = ket.data
        if self.kind == "ket":
            return np.abs(self.states @ v.conj()) ** 2
        return np.real(np.einsum("i,kij,j->k", v.conj(), self.states, v))


def _sample_indices(n_steps: int, n_samples: int | None) -> np.ndarray:
    if n_samples is None or n_samples >= n_steps + 1:
        return np.arange(n_steps + 1)
    idx = np.round(np.linspace(0, n_steps, max(2, n_samples))).astype(int)
    return np.unique(idx)


# ---------------------------------------------------------------------------
# Unitary evolution
# ---------------------------------------------------------------------------

def evolve_unitary(
    ham,
    psi0,
    t_final: float,
    grid: TimeGrid | None = None,
    points_per_cycle: int = DEFAULT_POINTS_PER_CYCLE,
    n_samples: int | None = 501,
    check_invariants: bool = True,
) -> Trajectory:
    td = _adapt(ham)
    if grid is None:
        grid = TimeGrid.for_frequency(t_final, td.omega_max, points_per_cycle)
    grid.validate_against(td.omega_max)
    psi = _as_ket_array(psi0, td.basis.dim)
    dt = grid.dt
    take = _sample_indices(grid.n_steps, n_samples)
    take_set = set(int(i) for i in take)
    out = np.empty((len(take), td.basis.dim), dtype=np.complex128)
    times = np.empty(len(take))
    pos = 0
    h_next = td.h_of_t(0.0)
    for step in range(grid.n_steps + 1):
        t = step * dt
        if step in take_set:
            out[pos] = psi
            times[pos] = t
            if check_invariants:
                check_ket_invariants(psi, f"at t={t:.6g}")
            pos += 1
        if step == grid.n_steps:
            break
        h1 = h_next
        h2 = td.h_of_t(t + 0.5 * dt)
        h3 = td.h_of_t(t + dt)
        k1 = -1j * (h1 @ psi)
        k2 = -1j * (h2 @ (psi + 0.5 * dt * k1))
        k3 = -1j * (h2 @ (psi + 0.5 * dt * k2))
        k4 = -1j * (h3 @ (psi + dt * k3))
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        h_next = h3
    return Trajectory(basis=td.basis, times=times, states=out, kind="ket")


# ---------------------------------------------------------------------------
# Master equation
# ---------------------------------------------------------------------------

class _Dissipator:
    """Precomputed jump superoperator and anticommutator weights."""

    def __init__(self, lindblads: list[np.ndarray], dim: int):
        self.dim = dim
        if lindblads:
            jump = sum(
                sp.kron(sp.csr_matrix(L), sp.csr_matrix(L.conj()), format="csr")
                for L in lindblads
            )
            self.jump = jump.tocsr()
            a_sum = sum(L.conj().T @ L for L in lindblads)
            offdiag = float(np.max(np.abs(a_sum - np.diag(np.diag(a_sum)))))
            diag_scale = float(np.max(np.abs(a_sum))) or 1.0
            if offdiag > 1e-12 * diag_scale:
                # general case: fall back to full superoperator form
                self.w = None
                self.a_sum = a_sum
            else:
                a = np.real(np.diag(a_sum))
                self.w = -0.5 * (a[:, None] + a[None, :])
                self.a_sum = None
        else:
            self.jump = None
            self.w = None
            self.a_sum = None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.jump is None:
            return np.zeros_like(rho)
        out = np.asarray(self.jump @ rho.reshape(-1)).reshape(self.dim, self.dim)
        if self.w is not None:
            out += self.w * rho
        else:
            out -= 0.5 * (self.a_sum @ rho + rho @ self.a_sum)
        return out

    def apply_batch(self, rhos: np.ndarray) -> np.ndarray:
        # rhos: (B, n, n)
        b = rhos.shape[0]
        if self.jump is None:
            return np.zeros_like(rhos)
        flat = rhos.reshape(b, -1).T
        out = np.asarray(self.jump @ flat).T.reshape(b, self.dim, self.dim)
        if self.w is not None:
            out += self.w[None, :, :] * rhos
        else:
            out -= 0.5 * (
                np.einsum("ij,bjk->bik", self.a_sum, rhos)
                + np.einsum("bij,jk->bik", rhos, self.a_sum)
            )
        return out


def _master_rhs(h: np.ndarray, rho: np.ndarray, diss: _Dissipator) -> np.ndarray:
    a = h @ rho
    out = -1j * (a - a.conj().T)
    return out + diss.apply(rho)


def evolve_master(
    ham,
    lindblads,
    rho0,
    t_final: float,
    grid: TimeGrid | None = None,
    points_per_cycle: int = DEFAULT_POINTS_PER_CYCLE,
    n_samples: int | None = 501,
    check_invariants: bool = True,
) -> Trajectory:
    td = _adapt(ham)
    if grid is None:
        grid = TimeGrid.for_frequency(t_final, td.omega_max, points_per_cycle)
    grid.validate_against(td.omega_max)
    dim = td.basis.dim
    rho = _as_density_array(rho0, dim)
    diss = _Dissipator(_lindblad_arrays(lindblads, dim), dim)
    dt = grid.dt
    take = _sample_indices(grid.n_steps, n_samples)
    take_set = set(int(i) for i in take)
    out = np.empty((len(take), dim, dim), dtype=np.complex128)
    times = np.empty(len(take))
    pos = 0
    h_next = td.h_of_t(0.0)
    for step in range(grid.n_steps + 1):
        t = step * dt
        if step in take_set:
            out[pos] = rho
            times[pos] = t
            if check_invariants:
                check_density_invariants(rho, f"at t={t:.6g}")
            pos += 1
        if step == grid.n_steps:
            break
        h1 = h_next
        h2 = td.h_of_t(t + 0.5 * dt)
        h3 = td.h_of_t(t + dt)
        k1 = _master_rhs(h1, rho, diss)
        k2 = _master_rhs(h2, rho + 0.5 * dt * k1, diss)
        k3 = _master_rhs(h2, rho + 0.5 * dt * k2, diss)
        k4 = _master_rhs(h3, rho + dt * k3, diss)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        h_next = h3
    return Trajectory(basis=td.basis, times=times, states=out, kind="density")


# ---------------------------------------------------------------------------
# One-period propagator and long-horizon evolution
# ---------------------------------------------------------------------------

@dataclass
class PeriodMap:
    """Superoperator advancing the master equation by one drive period."""

    basis: Basis
    matrix: np.ndarray  # (n^2, n^2), row-major vectorization
    period: float
    n_steps: int

    @property
    def dt(self) -> float:
        return self.period / self.n_steps


def _batched_rhs(h: np.ndarray, rhos: np.ndarray, diss: _Dissipator) -> np.ndarray:
    a = np.einsum("ij,bjk->bik", h, rhos, optimize=True)
    out = -1j * (a - a.conj().transpose(0, 2, 1))
    return out + diss.apply_batch(rhos)


def floquet_period_map(
    ham: TwoAtomHamiltonian,
    lindblads,
    points_per_cycle: int = DEFAULT_POINTS_PER_CYCLE,
) -> PeriodMap:
    td = _adapt(ham)
    if td.period is None:
        raise DynamicsError("Hamiltonian has no common drive period")
    period = td.period
    m = max(1, math.ceil(period / ((TWO_PI / td.omega_max) / points_per_cycle)))
    dt = period / m
    dim = td.basis.dim
    diss = _Dissipator(_lindblad_arrays(lindblads, dim), dim)
    # propagate all n^2 basis matrices at once
    rhos = np.eye(dim * dim, dtype=np.complex128).reshape(dim * dim, dim, dim)
    h_next = td.h_of_t(0.0)
    for step in range(m):
        t = step * dt
        h1 = h_next
        h2 = td.h_of_t(t + 0.5 * dt)
        h3 = td.h_of_t(t + dt)
        k1 = _batched_rhs(h1, rhos, diss)
        k2 = _batched_rhs(h2, rhos + 0.5 * dt * k1, diss)
        k3 = _batched_rhs(h2, rhos + 0.5 * dt * k2, diss)
        k4 = _batched_rhs(h3, rhos + dt * k3, diss)
        rhos = rhos + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        h_next = h3
    # column j of the map is the evolved j-th basis matrix, vectorized
    matrix = rhos.reshape(dim * dim, dim * dim).T.copy()
    return PeriodMap(basis=td.basis, matrix=matrix, period=period, n_steps=m)


def _matrix_power_apply(m: np.ndarray, k: int, vec: np.ndarray) -> np.ndarray:
    """m^k @ vec by binary powering."""
    result = vec.copy()
    base = m
    while k > 0:
        if k & 1:
            result = base @ result
        k >>= 1
        if k:
            base = base @ base
    return result


def evolve_master_final(
    ham: TwoAtomHamiltonian,
    lindblads,
    rho0,
    t_final: float,
    points_per_cycle: int = DEFAULT_POINTS_PER_CYCLE,
    period_threshold: int = 60,
    check_invariants: bool = True,
) -> np.ndarray:
    """Final density matrix only; uses the period map when the horizon spans
    many drive periods, otherwise direct stepping."""
    td = _adapt(ham)
    dim = td.basis.dim
    if td.period is None or t_final < period_threshold * td.period:
        traj = evolve_master(
            ham, lindblads, rho0, t_final,
            points_per_cycle=points_per_cycle, n_samples=2,
            check_invariants=check_invariants,
        )
        return traj.final()
    pm = floquet_period_map(ham, lindblads, points_per_cycle)
    n_periods = int(math.floor(t_final / pm.period))
    remainder = t_final - n_periods * pm.period
    rho = _as_density_array(rho0, dim)
    vec = _matrix_power_apply(pm.matrix, n_periods, rho.reshape(-1))
    rho = vec.reshape(dim, dim)
    if remainder > 1e-12 * t_final:
        # the drive is periodic, so the leftover arc can start at phase zero
        traj = evolve_master(
            ham, lindblads, rho, remainder,
            points_per_cycle=points_per_cycle, n_samples=2,
            check_invariants=False,
        )
        rho = traj.final()
    if check_invariants:
        check_density_invariants(rho, f"at t={t_final:.6g}")
    return rho


def floquet_steady_state(
    ham: TwoAtomHamiltonian,
    lindblads,
    rho0=None,
    tol: float = 1e-9,
    max_doublings: int = 40,
    points_per_cycle: int = DEFAULT_POINTS_PER_CYCLE,
) -> tuple[np.ndarray, dict]:
    """Stroboscopic fixed point of the one-period map by repeated squaring.

    Convergence is measured between states one doubling apart; the return
    info carries the final change and the number of periods spanned.
    """
    pm = floquet_period_map(ham, lindblads, points_per_cycle)
    dim = pm.basis.dim
    if rho0 is None:
        rho = np.eye(dim, dtype=np.complex128) / dim
    else:
        rho = _as_density_array(rho0, dim)
    vec = rho.reshape(-1)
    e = pm.matrix
    prev = e @ vec
    doublings = 0
    change = math.inf
    for doublings in range(1, max_doublings + 1):
        e = e @ e
        cur = e @ vec
        change = float(np.sum(np.abs(cur - prev)))
        prev = cur
        if change < tol:
            break
    else:
        raise DynamicsError(
            f"stroboscopic steady state did not converge: change {change:.3e}"
        )
    rho_ss = prev.reshape(dim, dim)
    rho_ss = 0.5 * (rho_ss + rho_ss.conj().T)
    rho_ss = rho_ss / np.trace(rho_ss).real
    check_density_invariants(rho_ss, "in stroboscopic steady state")
    return rho_ss, {
        "periods": 2**doublings,
        "change": change,
        "period": pm.period,
        "steps_per_period": pm.n_steps,
    }


# ---------------------------------------------------------------------------
# Liouvillian and static steady states
# ---------------------------------------------------------------------------

def liouvillian(h, lindblads) -> np.ndarray:
    """Dense generator on row-major vec: vec(drho/dt) = L vec(rho)."""
    h_data = h.data if isinstance(h, Operator) else np.asarray(h, dtype=np.complex128)
    dim = h_data.shape[0]
    eye = np.eye(dim)
    lmat = -1j * (np.kron(h_data, eye) - np.kron(eye, h_data.T))
    for op in _lindblad_arrays(lindblads, dim):
        lsq = op.conj().T @ op
        lmat += np.kron(op, op.conj())
        lmat -= 0.5 * (np.kron(lsq, eye) + np.kron(eye, lsq.T))
    return lmat


def steady_state(h, lindblads, method: str = "nullspace") -> np.ndarray:
    """Stationary density matrix of a static Liouvillian.

    nullspace: SVD kernel of L (errors out on degenerate kernels).
    long_time: propagator doubling until the entrywise 1-norm of drho/dt
    falls below 1e-10 per microsecond.
    """
    lmat = liouvillian(h, lindblads)
    dim = int(round(math.sqrt(lmat.shape[0])))
    if method == "nullspace":
        kernel = null_space(lmat, rcond=1e-10)
        if kernel.shape[1] != 1:
            raise DynamicsError(
                f"Liouvillian kernel dimension {kernel.shape[1]}, expected 1; "
                "steady state is not unique at this rcond"
            )
        rho = kernel[:, 0].reshape(dim, dim)
    elif method == "long_time":
        rho = np.eye(dim, dtype=np.complex128) / dim
        u = expm(lmat * 1.0)
        for _ in range(60):
            rho = (u @ rho.reshape(-1)).reshape(dim, dim)
            rate = float(np.sum(np.abs(lmat @ rho.reshape(-1))))
            if rate < 1e-10:
                break
            u = u @ u
        else:
            raise DynamicsError("long-time steady state did not converge")
    else:
        raise DynamicsError(f"unknown steady-state method {method!r}")
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise DynamicsError("steady-state candidate has zero trace")
    rho = rho / tr
    check_density_invariants(rho, "in steady state")
    residual = float(np.sum(np.abs(lmat @ rho.reshape(-1))))
    if residual > 1e-8:
        raise DynamicsError(f"steady-state residual {residual:.3e} too large")
    return rho
