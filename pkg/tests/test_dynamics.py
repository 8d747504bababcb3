import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from cayley_qa.errors import StepControlFailure, TooLarge
from cayley_qa.dynamics import (
    NoiseModel,
    StepControl,
    antisymmetric_weight,
    evolve_lindblad,
    evolve_schrodinger,
    evolve_trajectories,
    expm_apply,
    neel_order,
    permutation_indices,
    symmetry_overlap,
    target_ground_configs,
)
from cayley_qa.hamiltonian import HamiltonianSpec, ideal_couplings
from cayley_qa.lattice import TreeGraph, TreeKind, named_graph
from cayley_qa.measurement import ShotRecord
from cayley_qa.schedule import Schedule
from oracles import N_OP, kron_hamiltonian, liouvillian, site_op

STAR = TreeGraph(4, (0, 1, 1, 1), ((0, 1), (0, 2), (0, 3)), (-1, 0, 0, 0), TreeKind.REGULAR, S=2)


def _couplings(n, seed):
    rng = np.random.default_rng(seed)
    U = rng.random((n, n)) * 4
    U = U + U.T
    np.fill_diagonal(U, 0)
    return U


def _sched(tf=2.0, omega=3.0, d0=-4.0, d1=4.0):
    return Schedule(times=(0.0, 0.2 * tf, 0.8 * tf, tf), omega=(0.0, omega, omega, 0.0), delta=(d0, d0, d1, d1))


@pytest.mark.parametrize("tau", [0.013, 0.4, -0.25, 2.0])
def test_expm_apply_matches_dense_exponential(tau):
    U = _couplings(5, 1)
    spec = HamiltonianSpec(U, _sched())
    rng = np.random.default_rng(2)
    psi = rng.normal(size=32) + 1j * rng.normal(size=32)
    ref = expm(-1j * tau * kron_hamiltonian(U, 2.3, -1.1)) @ psi
    assert np.allclose(expm_apply(spec, 2.3, -1.1, tau, psi), ref, atol=1e-12)
    block = np.stack([psi, 2 * psi, 1j * psi], axis=1)
    out = expm_apply(spec, 2.3, -1.1, tau, block)
    assert np.allclose(out[:, 2], 1j * ref, atol=1e-12)


def test_expm_apply_leaves_input_untouched():
    spec = HamiltonianSpec(_couplings(4, 0), _sched())
    psi = np.ones(16, complex) / 4
    keep = psi.copy()
    expm_apply(spec, 1.0, 0.5, 0.3, psi)
    assert np.array_equal(psi, keep)


def _ode_reference(U, sched, times):
    n = U.shape[0]
    ops = [site_op(np.array([[0, 1], [1, 0]]), j, n) for j in range(n)]
    zs = [site_op(np.diag([1.0, -1.0]), j, n) for j in range(n)]
    H_int = kron_hamiltonian(U, 0.0, 0.0)

    def rhs(t, y):
        om, de = sched.controls(t)
        H = H_int + sum(0.5 * om * x - 0.5 * de * z for x, z in zip(ops, zs))
        return -1j * (H @ y)

    psi0 = np.zeros(1 << n, complex)
    psi0[0] = 1
    sol = solve_ivp(rhs, (0, sched.t_f), psi0, t_eval=times, method="DOP853", rtol=1e-12, atol=1e-13,
                    first_step=1e-3, max_step=0.01)
    return sol.y.T


def test_schrodinger_matches_ode_oracle():
    U = _couplings(4, 5)
    sched = _sched()
    times = np.linspace(0, sched.t_f, 9)
    res = evolve_schrodinger(HamiltonianSpec(U, sched), sample_times=times, store_states=True,
                             step=StepControl(0.02))
    ref = _ode_reference(U, sched, times)
    for a, b in zip(res.states, ref):
        assert 1 - abs(np.vdot(a, b)) ** 2 < 1e-9
    assert np.abs(res.norms - 1).max() < 1e-9


@settings(max_examples=8, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31), st.floats(0.5, 8.0), st.floats(0.5, 4.0))
def test_norm_is_conserved(n, seed, omega, tf):
    spec = HamiltonianSpec(_couplings(n, seed), _sched(tf, omega))
    res = evolve_schrodinger(spec, sample_times=[0.0, tf / 3, tf])
    assert np.abs(res.norms - 1).max() < 1e-9


def test_step_refinement():
    spec = HamiltonianSpec(_couplings(3, 2), _sched())
    res = evolve_schrodinger(spec, step=StepControl(0.2, verify=True, tol=1e-10), sample_times=[2.0])
    assert res.extras["dt"] < 0.2
    with pytest.raises(StepControlFailure):
        evolve_schrodinger(spec, step=StepControl(0.5, verify=True, tol=0.0, max_refinements=1), sample_times=[2.0])


def test_invalid_sample_times():
    spec = HamiltonianSpec(_couplings(2, 0), _sched())
    for bad in ([1.0, 0.5], [0.0, 5.0], [-0.1]):
        with pytest.raises(ValueError):
            evolve_schrodinger(spec, sample_times=bad)


def test_noiseless_trajectories_equal_schrodinger():
    g, _ = named_graph("G10")
    sched = Schedule.three_stage()
    spec = HamiltonianSpec(ideal_couplings(g, 1.82 * 6.9115), sched)
    times = np.linspace(0, sched.t_f, 5)
    a = evolve_schrodinger(spec, sample_times=times, graph=g)
    b = evolve_trajectories(spec, noise=NoiseModel(0, 0), n_traj=3, sample_times=times, graph=g)
    assert np.allclose(a.neel, b.neel, atol=1e-12)
    assert np.allclose(a.ground_probability, b.ground_probability, atol=1e-12)
    assert np.allclose(b.neel_se, 0, atol=1e-12)


def test_trajectories_independent_of_threads_and_chunks():
    spec = HamiltonianSpec(ideal_couplings(STAR, 8.0), _sched())
    noise = NoiseModel(0.8, 0.3)
    kw = dict(noise=noise, n_traj=37, seed=11, sample_times=[0.0, 1.0, 2.0], graph=STAR)
    base = evolve_trajectories(spec, threads=1, chunk=250, **kw)
    for threads, chunk in ((2, 10), (8, 7), (3, 37)):
        other = evolve_trajectories(spec, threads=threads, chunk=chunk, **kw)
        assert np.array_equal(base.occupations, other.occupations)
        assert np.array_equal(base.neel, other.neel)
    assert not np.array_equal(base.neel, evolve_trajectories(spec, **{**kw, "seed": 12}).neel)


def test_lindblad_matches_liouvillian_oracle():
    n = 3
    U = _couplings(n, 7)
    sched = Schedule.constant(2.0, 0.7, 1.5)
    noise = NoiseModel(0.6, 0.25)
    res = evolve_lindblad(HamiltonianSpec(U, sched), noise=noise, sample_times=[1.5])
    H = kron_hamiltonian(U, 2.0, 0.7)
    ns = [site_op(N_OP, j, n) for j in range(n)]
    jumps = [np.sqrt(noise.gamma_individual) * m for m in ns] + [np.sqrt(noise.gamma_collective) * sum(ns)]
    rho0 = np.zeros((8, 8), complex)
    rho0[0, 0] = 1
    vec = expm(1.5 * liouvillian(H, jumps)) @ rho0.reshape(-1, order="F")
    ref = vec.reshape(8, 8, order="F")
    assert np.allclose(res.final_state, ref, atol=1e-8)
    assert res.norms[-1] == pytest.approx(1.0, abs=1e-9)
    assert res.min_eigenvalues.min() > -1e-8


def test_dephasing_trajectories_track_lindblad_constant_drive():
    # loose statistical check; the acceptance suite runs the tight version
    spec = HamiltonianSpec(ideal_couplings(STAR, 6.0), Schedule.constant(3.0, 1.0, 1.0))
    noise = NoiseModel(2.0, 1.0)
    times = [0.5, 1.0]
    ref = evolve_lindblad(spec, noise=noise, sample_times=times, graph=STAR)
    traj = evolve_trajectories(spec, noise=noise, n_traj=400, seed=3, sample_times=times, graph=STAR)
    assert np.all(np.abs(traj.occupations - ref.occupations) <= 5 * traj.occupations_se + 1e-12)


def test_budgets():
    big = HamiltonianSpec(np.zeros((15, 15)), _sched())
    with pytest.raises(TooLarge):
        evolve_trajectories(big, n_traj=1)
    with pytest.raises(TooLarge):
        evolve_lindblad(HamiltonianSpec(np.zeros((8, 8)), _sched()))


def test_dark_sector_stays_empty():
    g, _ = named_graph("G14")
    sched = Schedule.three_stage()
    spec = HamiltonianSpec(ideal_couplings(g, 2.7 * 6.9115), sched)
    res = evolve_schrodinger(spec, graph=g, store_states=True, sample_times=np.linspace(0, sched.t_f, 6))
    assert symmetry_overlap(res, g).max() < 1e-20
    pidx = permutation_indices(g.swap_permutation())
    psi = np.zeros(spec.dim, complex)
    psi[1 << 13] = 1  # one center up
    assert antisymmetric_weight(psi, pidx) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        symmetry_overlap(evolve_schrodinger(spec, sample_times=[0.0]), g)


def test_jsonl_export(tmp_path):
    spec = HamiltonianSpec(ideal_couplings(STAR, 5.0), _sched())
    res = evolve_trajectories(spec, noise=NoiseModel(0.5, 0.1), n_traj=4, sample_times=[0.0, 2.0], graph=STAR)
    res.to_jsonl(tmp_path / "a.jsonl")
    recs = [json.loads(line) for line in (tmp_path / "a.jsonl").read_text().splitlines()]
    assert len(recs) == 2
    assert {"t", "norm", "O_N", "n", "ground_overlap", "O_N_se"} <= set(recs[0])
    assert len(recs[1]["n"]) == 4


def test_neel_order_sources():
    g, _ = named_graph("G10")
    psi = np.zeros(1024, complex)
    psi[575] = 1
    assert neel_order(psi, g) == pytest.approx(1.0)
    assert neel_order(np.outer(psi, psi.conj()), g) == pytest.approx(1.0)
    assert neel_order(ShotRecord(10, {575: 4}), g) == pytest.approx(1.0)
    psi = np.zeros(1024, complex)
    psi[0] = 1
    assert neel_order(psi, g) == pytest.approx(-1.0)


def test_target_ground_configs():
    g, _ = named_graph("G14")
    spec = HamiltonianSpec(ideal_couplings(g, 2.7), Schedule.three_stage(delta_f=2.0))
    assert target_ground_configs(spec, spec.drive) == [4351, 8447]


def test_noise_model():
    n = NoiseModel()
    assert (n.gamma_individual, n.gamma_collective) == (0.036, 0.003)
    assert NoiseModel.from_khz(36, 3).gamma_individual == pytest.approx(0.036)
    assert NoiseModel.from_khz(36, 3, angular=True).gamma_individual == pytest.approx(2 * np.pi * 0.036)
    assert NoiseModel(0, 0).is_noiseless
    with pytest.raises(ValueError):
        NoiseModel(-1, 0)


def test_rabi_pi_pulse():
    om = 3.0
    spec = HamiltonianSpec(np.zeros((1, 1)), Schedule.constant(om, 0.0, np.pi / om))
    res = evolve_schrodinger(spec, sample_times=[np.pi / om])
    assert np.allclose(res.final_state, [0, -1j], atol=1e-10)


def test_blockaded_pair_ends_in_w_state():
    sched = Schedule.three_stage(t_f=200.0, omega_max=2.0, delta_i=-4.0, delta_f=2.0)
    spec = HamiltonianSpec(np.array([[0, 200.0], [200.0, 0]]), sched)
    res = evolve_schrodinger(spec, sample_times=[200.0])
    p = np.abs(res.final_state) ** 2
    assert p[1] == pytest.approx(0.5, abs=5e-3) and p[2] == pytest.approx(0.5, abs=5e-3)


def test_pure_dephasing_decay():
    gamma = 0.8
    spec = HamiltonianSpec(np.zeros((1, 1)), Schedule.constant(0.0, 0.0, 2.0))
    rho0 = 0.5 * np.ones((2, 2), complex)
    res = evolve_lindblad(spec, rho0=rho0, noise=NoiseModel(gamma, 0.0), sample_times=[2.0])
    assert abs(res.final_state[0, 1]) == pytest.approx(0.5 * np.exp(-gamma * 2.0 / 2), rel=1e-8)


def test_lindblad_closed_limit_on_chain():
    chain = TreeGraph(4, (0, 1, 2, 3), ((0, 1), (1, 2), (2, 3)), (-1, 0, 1, 2), TreeKind.REGULAR)
    spec = HamiltonianSpec(ideal_couplings(chain, 9.0), _sched())
    rho = evolve_lindblad(spec, noise=NoiseModel(0, 0), sample_times=[2.0]).final_state
    psi = evolve_schrodinger(spec, sample_times=[2.0]).final_state
    assert 1 - np.real(np.vdot(psi, rho @ psi)) < 1e-8


def test_energy_conserved_with_frozen_controls():
    U = _couplings(6, 8)
    spec = HamiltonianSpec(U, Schedule.constant(2.5, 1.2, 1.0))
    rng = np.random.default_rng(0)
    psi0 = rng.normal(size=64) + 1j * rng.normal(size=64)
    psi0 /= np.linalg.norm(psi0)
    res = evolve_schrodinger(spec, psi0=psi0, sample_times=[0.0, 1.0], store_states=True)
    e = [np.vdot(s, spec.apply_frozen(2.5, 1.2, s)).real for s in res.states]
    assert abs(e[1] - e[0]) < 1e-8 * abs(e[0])


def test_odd_sector_is_conserved_and_broken_by_asymmetry():
    from cayley_qa.constants import PhysicalConstants

    c = PhysicalConstants()
    g, geo = named_graph("G14", c.distance_for(2.7 * c.omega0))
    sched = Schedule.three_stage()
    pidx = permutation_indices(g.swap_permutation())
    psi0 = np.zeros(1 << 14, complex)
    psi0[1 << 13], psi0[1 << 12] = 1 / np.sqrt(2), -1 / np.sqrt(2)  # centers (up,down) - (down,up)
    times = np.linspace(0, sched.t_f, 5)
    ideal = HamiltonianSpec(ideal_couplings(g, 2.7 * c.omega0), sched)
    res = evolve_schrodinger(ideal, psi0=psi0, sample_times=times, store_states=True, graph=g)
    assert np.allclose(symmetry_overlap(res, g), 1.0, atol=1e-10)

    shifted = geo.displaced(5, [0.1, 0.0, 0.0])
    full = HamiltonianSpec.from_geometry(g, shifted, sched, c, "full")
    res = evolve_schrodinger(full, sample_times=times, store_states=True, graph=g)
    assert symmetry_overlap(res, g)[-1] > 1e-6
    assert antisymmetric_weight(res.states[0], pidx) == 0.0
