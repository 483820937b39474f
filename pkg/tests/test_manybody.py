"""Exact N-particle dynamics: kernels, unitarity, factorization, energy."""

import numpy as np
import pytest
from scipy.linalg import lu_factor, lu_solve

from confinedbose.errors import ConfigError, GuardError
from confinedbose.grids import ConfinedDomain, FreeDomain, GridFunction, norm
from confinedbose.manybody import (
    ManyBodyState,
    evolve_manybody,
    excess_energy_diagnostic,
    manybody_energy,
    pair_interaction_values,
    pair_phase_array,
    product_state,
    symmetrize,
    symmetry_residual,
)
from confinedbose.model import ExternalPotential, InteractionProfile, ModelSpec
from confinedbose.onebody import OneBodyState, chi_mode, effective_energy, evolve_effective

UNIT_INTERVAL = ((-0.5, 0.5),)


def small_spec(n=2, amplitude=2.0, eps=0.5, n_f=16, n_c=3, L=8.0, potential=None):
    return ModelSpec(
        free=FreeDomain((L,), (n_f,)),
        confined=ConfinedDomain(UNIT_INTERVAL, (n_c,), eps=eps),
        n_particles=n,
        interaction=InteractionProfile("gaussian-bump", amplitude=amplitude,
                                       radius=1.5, sigma=0.5),
        regime="hartree-theta0",
        potential=potential or ExternalPotential(),
    )


def gaussian_one_body(spec, width=1.0):
    xs = spec.free.meshgrid()
    r2 = sum(x**2 for x in xs)
    phi = GridFunction(spec.free, np.exp(-r2 / (4 * width**2)))
    phi = phi.copy_with(phi.values / norm(phi))
    return OneBodyState(phi, chi_mode(spec.confined, 0))


# -- pair kernels --------------------------------------------------------------


def test_pair_kernel_theta0_matches_raw_profile():
    spec = small_spec(eps=1.0)
    kern = pair_interaction_values(spec)
    x = kern.free_offsets[0][:, None]
    y = kern.confined_offsets[0][None, :]
    expected = spec.interaction.radial(np.sqrt(x**2 + y**2))
    assert np.max(np.abs(kern.values - expected)) < 1e-14


def test_pair_kernel_amplitude_linearity():
    k1 = pair_interaction_values(small_spec(amplitude=2.0))
    k2 = pair_interaction_values(small_spec(amplitude=4.0))
    assert np.allclose(k2.values, 2.0 * k1.values, rtol=1e-14)


def nls_spec(n, theta, eps, n_f=128, n_c=8):
    return ModelSpec(
        free=FreeDomain((16.0,), (n_f,)),
        confined=ConfinedDomain(((-0.5, 0.5), (-0.5, 0.5)), (n_c, n_c), eps=eps),
        n_particles=n,
        interaction=InteractionProfile("gaussian-bump", amplitude=1.7,
                                       radius=1.6, sigma=0.4),
        regime="nls-theta",
        theta=theta,
    )


def test_scaled_kernel_integral_change_of_variables_oracle():
    # grid quadrature of the scaled kernel equals the R^3 integral of w,
    # independently of (N, theta) and eps; radial quadrature is the oracle.
    # parameters keep the scaled support inside the confined difference set
    eps = 0.9
    expected = nls_spec(8, 0.30, eps).interaction.integral3()
    vals = []
    for n, theta in ((8, 0.30), (12, 0.28)):
        kern = pair_interaction_values(nls_spec(n, theta, eps))
        vals.append(kern.integral())
    assert vals[0] == pytest.approx(expected, rel=5e-3)
    assert vals[1] == pytest.approx(expected, rel=5e-3)
    assert vals[0] == pytest.approx(vals[1], rel=5e-3)


def test_resolvability_guard():
    spec = nls_spec(40, 0.32, 0.1, n_f=16, n_c=2)
    with pytest.raises(GuardError, match="under-resolved"):
        pair_interaction_values(spec)


def test_unbounded_kind_rejected_for_dynamics():
    spec = small_spec()
    coul = ModelSpec(
        free=spec.free, confined=spec.confined, n_particles=2,
        interaction=InteractionProfile("coulomb"), regime="hartree-theta0",
    )
    with pytest.raises(GuardError, match="bounded"):
        pair_interaction_values(coul)


# -- symmetrization ------------------------------------------------------------


def two_orthonormal_modes(spec):
    x = spec.free.axis_nodes(0)
    chi = chi_mode(spec.confined, 0).chi.values
    L = spec.free.extents[0]
    a = GridFunction(spec.free, np.exp(2j * np.pi * x / L))
    b = GridFunction(spec.free, np.exp(-2j * np.pi * x / L))
    phi = np.multiply.outer(a.values / norm(a), chi)
    phi_perp = np.multiply.outer(b.values / norm(b), chi)
    return phi, phi_perp


def test_symmetrize_identity_on_symmetric_input():
    # projection idempotence: an already-symmetric state is left unchanged
    spec = small_spec()
    phi, phi_perp = two_orthonormal_modes(spec)
    sym = np.multiply.outer(phi, phi_perp) + np.multiply.outer(phi_perp, phi)
    state = symmetrize(spec.domain, sym)
    again = symmetrize(spec.domain, state.values)
    assert np.max(np.abs(again.values - state.values)) < 1e-12


def test_symmetrize_two_term_average():
    spec = small_spec()
    phi, phi_perp = two_orthonormal_modes(spec)
    state = symmetrize(spec.domain, np.multiply.outer(phi, phi_perp))
    expected = (np.multiply.outer(phi, phi_perp) + np.multiply.outer(phi_perp, phi))
    expected = expected / (np.linalg.norm(expected.ravel()) * np.sqrt(spec.domain.cell_volume**2))
    assert np.max(np.abs(state.values - expected)) < 1e-12
    assert state.mass() == pytest.approx(1.0, abs=1e-12)


def test_symmetrize_rejects_antisymmetric():
    spec = small_spec()
    phi, phi_perp = two_orthonormal_modes(spec)
    anti = np.multiply.outer(phi, phi_perp) - np.multiply.outer(phi_perp, phi)
    with pytest.raises(ConfigError, match="vanishes"):
        symmetrize(spec.domain, anti)


# -- dynamics ------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3])
def test_noninteracting_factorization(n):
    spec = small_spec(n=n, amplitude=0.0)
    one0 = gaussian_one_body(spec)
    psi0 = product_state(one0, n)
    T, dt = 0.2, 5e-3
    manys = evolve_manybody(psi0, spec, T, dt, stride=20)
    ones = evolve_effective(one0, spec, T, dt, stride=20)
    e0 = one0.mode.energy_eps
    for mb, ob in zip(manys, ones):
        phi_t = ob.product_values() * np.exp(-1j * e0 * ob.t)
        phi_t = phi_t / (np.linalg.norm(phi_t.ravel()) * np.sqrt(spec.domain.cell_volume))
        expected = phi_t
        for _ in range(n - 1):
            expected = np.multiply.outer(expected, phi_t)
        err = np.linalg.norm((mb.values - expected).ravel()) * np.sqrt(mb.cell_volume)
        assert err < 1e-7


def dense_hamiltonian(spec):
    """Explicit matrix of the two-particle Hamiltonian (CN oracle input)."""
    from confinedbose.manybody import _forward, _inverse
    from confinedbose.grids import kinetic_multiplier

    dom = spec.domain
    m = int(np.prod(dom.shape))
    block = len(dom.shape)
    free_axes = tuple(range(dom.free.dim))
    conf_axes = tuple(range(dom.free.dim, block))
    mult = kinetic_multiplier(dom)
    k_one = np.zeros((m, m), dtype=complex)
    eye = np.eye(m, dtype=complex)
    for col in range(m):
        v = eye[:, col].reshape(dom.shape)
        w = _inverse(_forward(v, free_axes, conf_axes) * mult, free_axes, conf_axes)
        k_one[:, col] = w.ravel()
    h = np.kron(k_one, np.eye(m)) + np.kron(np.eye(m), k_one)
    pair = pair_phase_array(spec).reshape(m, m)
    h += spec.pair_prefactor * np.diag(pair.ravel())
    if not spec.potential.is_zero:
        v_one = spec.potential.values_product(0.0, dom).ravel()
        h += np.diag(np.add.outer(v_one, v_one).ravel())
    return h


def test_two_particle_matches_crank_nicolson_oracle():
    spec = small_spec(n=2, amplitude=2.0, n_f=16, n_c=2,
                      potential=ExternalPotential("gaussian", amplitude=0.8, sigma=2.0))
    one0 = gaussian_one_body(spec)
    psi0 = product_state(one0, 2)
    T = 0.2
    final = evolve_manybody(psi0, spec, T, 1e-3)[-1]

    h = dense_hamiltonian(spec)
    dt = 5e-5
    steps = round(T / dt)
    m2 = h.shape[0]
    a = np.eye(m2) + 0.5j * dt * h
    b = np.eye(m2) - 0.5j * dt * h
    lu = lu_factor(a)
    v = psi0.values.ravel().copy()
    for _ in range(steps):
        v = lu_solve(lu, b @ v)
    err = np.linalg.norm(final.values.ravel() - v) * np.sqrt(final.cell_volume)
    assert err < 1e-4


def test_time_reversal_two_particles():
    spec = small_spec(n=2, amplitude=2.0)
    psi0 = product_state(gaussian_one_body(spec), 2)
    fwd = evolve_manybody(psi0, spec, 0.3, 2e-3)[-1]
    mirrored = ManyBodyState(spec.domain, np.conj(fwd.values), 0.0)
    back = evolve_manybody(mirrored, spec, 0.3, 2e-3)[-1]
    err = np.linalg.norm((np.conj(back.values) - psi0.values).ravel())
    assert err * np.sqrt(psi0.cell_volume) < 1e-6


def test_symmetry_preserved_and_mass_energy_conserved():
    spec = small_spec(n=3, amplitude=2.0, n_f=16, n_c=2)
    psi0 = product_state(gaussian_one_body(spec), 3)
    traj = evolve_manybody(psi0, spec, 1.0, 1e-3, stride=200)
    e0 = manybody_energy(traj[0], spec)
    for st in traj:
        assert abs(st.mass() - 1.0) < 1e-9
        assert symmetry_residual(st) < 1e-8
        assert abs(manybody_energy(st, spec) - e0) < 1e-6 * abs(e0)


def test_manybody_strang_order():
    spec = small_spec(n=2, amplitude=3.0)
    psi0 = product_state(gaussian_one_body(spec), 2)
    T = 0.25
    ref = evolve_manybody(psi0, spec, T, T / 1024)[-1].values
    e1 = np.linalg.norm((evolve_manybody(psi0, spec, T, T / 128)[-1].values - ref).ravel())
    e2 = np.linalg.norm((evolve_manybody(psi0, spec, T, T / 256)[-1].values - ref).ravel())
    assert 3.5 < e1 / e2 < 4.5


def test_product_energy_matches_effective_without_interaction():
    spec = small_spec(n=3, amplitude=0.0)
    one0 = gaussian_one_body(spec)
    psi0 = product_state(one0, 3)
    assert manybody_energy(psi0, spec) == pytest.approx(
        effective_energy(one0, spec), rel=1e-10
    )
    # B3-style diagnostic: energy above the confined ground level
    excess = excess_energy_diagnostic(psi0, spec)
    assert excess == pytest.approx(
        effective_energy(one0, spec) - one0.mode.energy_eps, rel=1e-9
    )


def test_interaction_energy_scaling():
    spec1 = small_spec(n=2, amplitude=2.0)
    spec2 = small_spec(n=2, amplitude=6.0)
    spec0 = small_spec(n=2, amplitude=0.0)
    psi0 = product_state(gaussian_one_body(spec1), 2)
    e0 = manybody_energy(psi0, spec0)
    e1 = manybody_energy(psi0, spec1)
    e2 = manybody_energy(psi0, spec2)
    assert e2 - e0 == pytest.approx(3.0 * (e1 - e0), rel=1e-12)


def test_memory_guard():
    spec = small_spec(n=2)
    psi0 = product_state(gaussian_one_body(spec), 2)
    with pytest.raises(GuardError, match="cap"):
        evolve_manybody(psi0, spec, 0.1, 1e-2, memory_cap=1000)


def test_asymmetric_input_rejected():
    spec = small_spec(n=2)
    phi, phi_perp = two_orthonormal_modes(spec)
    raw = np.multiply.outer(phi, phi_perp)
    state = ManyBodyState(spec.domain, raw / (np.linalg.norm(raw.ravel())
                                              * np.sqrt(spec.domain.cell_volume**2)))
    with pytest.raises(ConfigError, match="symmetric"):
        evolve_manybody(state, spec, 0.1, 1e-2)
    with pytest.raises(ConfigError, match="symmetric"):
        manybody_energy(state, spec)
