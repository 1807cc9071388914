"""Integrator and steady-state tests.

Closed-form references: Rabi flopping (resonant and detuned), exponential
decay of population and coherence, and agreement between independently
constructed generators (elementwise fast path vs Kronecker Liouvillian,
period-map powering vs direct stepping).
"""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from ddrab.dynamics import (
    DynamicsError,
    NumericalInvariantError,
    TimeGrid,
    _Dissipator,
    _master_rhs,
    evolve_master,
    evolve_master_final,
    evolve_unitary,
    floquet_period_map,
    floquet_steady_state,
    liouvillian,
    steady_state,
)
from ddrab.model import (
    FORSTER,
    PRESETS,
    VDW_REFERENCE,
    DriveParams,
    InteractionParams,
    build_hamiltonian,
    build_lindblad_set,
    solve_rab_detuning,
)
from ddrab.qcore import Basis, Ket, Operator, basis_ket, density_matrix, ketbra

RNG = np.random.default_rng(20240817)

TWO_LEVEL = Basis(("g", "e"))


def two_level_h(omega, delta=0.0):
    data = np.array(
        [[0.0, omega / 2.0], [omega / 2.0, delta]], dtype=np.complex128
    )
    return Operator(TWO_LEVEL, data)


def forster_short():
    preset = PRESETS["forster-ravets"]
    inter = preset.interaction()
    drive = preset.drive()
    ham = build_hamiltonian(FORSTER, drive, inter)
    lindblads = build_lindblad_set(FORSTER, preset.decay())
    return ham, lindblads


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

class TestTimeGrid:
    def test_resolution_floor(self):
        grid = TimeGrid.for_frequency(1.0, omega_max=100.0, points_per_cycle=40)
        assert grid.dt <= (2.0 * math.pi / 100.0) / 40.0 * (1.0 + 1e-12)
        with pytest.raises(DynamicsError):
            TimeGrid.for_frequency(1.0, 100.0, points_per_cycle=10)
        with pytest.raises(DynamicsError):
            TimeGrid(1.0, 5).validate_against(1000.0)

    def test_times_cover_interval(self):
        grid = TimeGrid(2.0, 8)
        t = grid.times()
        assert t[0] == 0.0 and t[-1] == 2.0 and len(t) == 9

    def test_invalid(self):
        with pytest.raises(DynamicsError):
            TimeGrid(-1.0, 10)
        with pytest.raises(DynamicsError):
            TimeGrid(1.0, 0)


# ---------------------------------------------------------------------------
# Unitary oracles
# ---------------------------------------------------------------------------

class TestUnitary:
    def test_resonant_rabi_formula(self):
        omega = 3.7
        h = two_level_h(omega)
        t_final = 4.0
        traj = evolve_unitary(h, basis_ket(TWO_LEVEL, "g"), t_final, n_samples=101)
        p_e = traj.populations(["e"])["e"]
        expect = np.sin(omega * traj.times / 2.0) ** 2
        assert np.max(np.abs(p_e - expect)) < 1e-9

    def test_detuned_rabi_formula(self):
        omega, delta = 2.0, 3.0
        h = two_level_h(omega, delta)
        gen = math.sqrt(omega**2 + delta**2)
        traj = evolve_unitary(h, basis_ket(TWO_LEVEL, "g"), 5.0, n_samples=101)
        p_e = traj.populations(["e"])["e"]
        expect = (omega**2 / gen**2) * np.sin(gen * traj.times / 2.0) ** 2
        assert np.max(np.abs(p_e - expect)) < 1e-9

    def test_norm_preserved_on_forster_drive(self):
        ham, _ = forster_short()
        psi0 = basis_ket(FORSTER.basis(), ("1", "1"))
        traj = evolve_unitary(ham, psi0, 0.2, n_samples=51)
        norms = np.linalg.norm(traj.states, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-9

    def test_invariant_violation_raises(self):
        h = two_level_h(1.0)
        bad = np.array([2.0, 0.0], dtype=np.complex128)
        with pytest.raises(NumericalInvariantError):
            evolve_unitary(h, bad, 1.0)


# ---------------------------------------------------------------------------
# Master equation oracles
# ---------------------------------------------------------------------------

class TestMaster:
    def test_pure_decay(self):
        gamma = 0.8
        h = Operator(TWO_LEVEL, np.zeros((2, 2), dtype=np.complex128))
        lind = [math.sqrt(gamma) * ketbra(TWO_LEVEL, "g", "e")]
        psi0 = Ket(
            TWO_LEVEL, np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)
        )
        traj = evolve_master(h, lind, psi0, 3.0, grid=TimeGrid(3.0, 600), n_samples=61)
        p_e = traj.populations(["e"])["e"]
        assert np.max(np.abs(p_e - 0.5 * np.exp(-gamma * traj.times))) < 1e-8
        coher = np.abs(traj.states[:, 0, 1])
        assert np.max(np.abs(coher - 0.5 * np.exp(-gamma * traj.times / 2.0))) < 1e-8

    def test_matches_unitary_without_dissipation(self):
        ham, _ = forster_short()
        psi0 = basis_ket(FORSTER.basis(), ("1", "1"))
        t_final = 0.11
        traj_u = evolve_unitary(ham, psi0, t_final, n_samples=23)
        traj_m = evolve_master(ham, [], psi0, t_final, n_samples=23)
        for k in range(len(traj_u.times)):
            rho_u = np.outer(traj_u.states[k], traj_u.states[k].conj())
            assert np.max(np.abs(rho_u - traj_m.states[k])) < 1e-8

    def test_rhs_matches_liouvillian(self):
        ham, lindblads = forster_short()
        dim = ham.dim
        diss = _Dissipator([op.data for op in lindblads], dim)
        lmat = liouvillian(ham.at(0.37), lindblads)
        x = RNG.normal(size=(dim, dim)) + 1j * RNG.normal(size=(dim, dim))
        rho = x @ x.conj().T
        rho = rho / np.trace(rho)
        fast = _master_rhs(ham.h_array(0.37), rho, diss)
        ref = (lmat @ rho.reshape(-1)).reshape(dim, dim)
        assert np.max(np.abs(fast - ref)) < 1e-12 * np.max(np.abs(ref))

    def test_trace_and_hermiticity_preserved(self):
        ham, lindblads = forster_short()
        rho0 = basis_ket(FORSTER.basis(), ("1", "1"))
        traj = evolve_master(ham, lindblads, rho0, 0.15, n_samples=11)
        fin = traj.final()
        assert abs(np.trace(fin).real - 1.0) < 1e-10
        assert np.max(np.abs(fin - fin.conj().T)) < 1e-12

    def test_bad_initial_state_raises(self):
        ham, lindblads = forster_short()
        dim = ham.dim
        rho_bad = np.eye(dim, dtype=np.complex128) * (2.0 / dim)
        with pytest.raises(NumericalInvariantError):
            evolve_master(ham, lindblads, rho_bad, 0.01, n_samples=2)

    def test_dt_halving_convergence(self):
        ham, lindblads = forster_short()
        rho0 = basis_ket(FORSTER.basis(), ("1", "1"))
        t_final = 0.4
        traj_a = evolve_master(
            ham, lindblads, rho0, t_final, points_per_cycle=40, n_samples=9
        )
        traj_b = evolve_master(
            ham, lindblads, rho0, t_final, points_per_cycle=80, n_samples=9
        )
        pops_a = traj_a.populations()
        pops_b = traj_b.populations()
        dev = max(
            float(np.max(np.abs(pops_a[l] - pops_b[l]))) for l in pops_a
        )
        assert dev < 1e-6


# ---------------------------------------------------------------------------
# Period map
# ---------------------------------------------------------------------------

class TestPeriodMap:
    def test_matches_direct_stepping(self):
        ham, lindblads = forster_short()
        pm = floquet_period_map(ham, lindblads)
        n_periods = 7
        t_final = n_periods * pm.period
        rho0 = density_matrix(basis_ket(FORSTER.basis(), ("1", "1")))
        direct = evolve_master(
            ham,
            lindblads,
            rho0,
            t_final,
            grid=TimeGrid(t_final, n_periods * pm.n_steps),
            n_samples=2,
        ).final()
        vec = rho0.data.reshape(-1)
        for _ in range(n_periods):
            vec = pm.matrix @ vec
        mapped = vec.reshape(ham.dim, ham.dim)
        assert np.max(np.abs(mapped - direct)) < 1e-11

    def test_final_state_shortcut_vdw(self):
        preset = PRESETS["vdw-reference"]
        inter = preset.interaction()
        drive = preset.drive()
        ham = build_hamiltonian(VDW_REFERENCE, drive, inter)
        lindblads = build_lindblad_set(VDW_REFERENCE, preset.decay())
        pm = floquet_period_map(ham, lindblads)
        n_periods = 150
        t_final = n_periods * pm.period
        rho0 = basis_ket(VDW_REFERENCE.basis(), ("1", "1"))
        fast = evolve_master_final(
            ham, lindblads, rho0, t_final, period_threshold=60
        )
        direct = evolve_master(
            ham,
            lindblads,
            rho0,
            t_final,
            grid=TimeGrid(t_final, n_periods * pm.n_steps),
            n_samples=2,
        ).final()
        assert np.max(np.abs(fast - direct)) < 1e-10

    def test_short_horizon_uses_direct_path(self):
        ham, lindblads = forster_short()
        rho0 = basis_ket(FORSTER.basis(), ("1", "1"))
        a = evolve_master_final(ham, lindblads, rho0, 0.05, period_threshold=10**9)
        b = evolve_master(ham, lindblads, rho0, 0.05, n_samples=2).final()
        assert np.max(np.abs(a - b)) < 1e-14

    def test_static_hamiltonian_has_no_period(self):
        h = two_level_h(1.0)
        with pytest.raises(DynamicsError):
            floquet_period_map(h, [])


# ---------------------------------------------------------------------------
# Steady states
# ---------------------------------------------------------------------------

class TestSteadyState:
    def test_driven_damped_two_level_cross_methods(self):
        omega, delta, gamma = 0.9, 0.4, 0.6
        h = two_level_h(omega, delta)
        lind = [math.sqrt(gamma) * ketbra(TWO_LEVEL, "g", "e")]
        rho_null = steady_state(h, lind, method="nullspace")
        rho_long = steady_state(h, lind, method="long_time")
        assert np.max(np.abs(rho_null - rho_long)) < 1e-8
        # independent check: long direct exponentiation of the generator
        lmat = liouvillian(h, lind)
        rho0 = np.eye(2, dtype=np.complex128) / 2.0
        prop = expm(lmat * 400.0)
        rho_ref = (prop @ rho0.reshape(-1)).reshape(2, 2)
        assert np.max(np.abs(rho_null - rho_ref)) < 1e-8

    def test_resonant_saturation_formula(self):
        omega, gamma = 0.35, 0.8
        h = two_level_h(omega, 0.0)
        lind = [math.sqrt(gamma) * ketbra(TWO_LEVEL, "g", "e")]
        rho = steady_state(h, lind)
        s = 2.0 * omega**2 / gamma**2
        p_e = (s / 2.0) / (1.0 + s)
        assert rho[1, 1].real == pytest.approx(p_e, rel=1e-9)

    def test_undriven_relaxes_to_ground(self):
        h = two_level_h(0.0, 0.7)
        lind = [math.sqrt(0.5) * ketbra(TWO_LEVEL, "g", "e")]
        rho = steady_state(h, lind)
        assert rho[0, 0].real == pytest.approx(1.0, abs=1e-10)

    def test_degenerate_kernel_rejected(self):
        basis = Basis(("g", "e", "h"))
        h = Operator(basis, np.zeros((3, 3), dtype=np.complex128))
        lind = [ketbra(basis, "g", "e")]
        with pytest.raises(DynamicsError):
            steady_state(h, lind)

    def test_stroboscopic_steady_state_traces_one(self):
        preset = PRESETS["vdw-reference"]
        inter = preset.interaction()
        drive = preset.drive()
        ham = build_hamiltonian(VDW_REFERENCE, drive, inter)
        lindblads = build_lindblad_set(VDW_REFERENCE, preset.decay())
        rho, info = floquet_steady_state(ham, lindblads, tol=1e-9)
        assert abs(np.trace(rho).real - 1.0) < 1e-10
        assert info["periods"] >= 2
        # fixed point: one more period changes nothing measurable
        pm = floquet_period_map(ham, lindblads)
        rho2 = (pm.matrix @ rho.reshape(-1)).reshape(rho.shape)
        assert np.max(np.abs(rho2 - rho)) < 1e-7
