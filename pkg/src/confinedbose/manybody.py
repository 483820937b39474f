"""Exact N-particle Schrodinger dynamics on the tensor grid Omega^N.

The wavefunction is stored as a dense complex tensor whose axis blocks are
the per-particle (free..., confined...) axes.  Kinetic steps act by mixed
FFT/DST multipliers, pair interactions and external potentials by exact
pointwise phases; the integrator is the same second-order Strang splitting
as the effective solver.  Everything is desk scale: a memory guard refuses
tensors beyond a configurable cap (2 GiB by default).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError, GuardError
from .grids import ProductDomain, kinetic_multiplier
from .model import ModelSpec
from .onebody import OneBodyState

__all__ = [
    "ManyBodyState",
    "RelativeKernel",
    "pair_interaction_values",
    "pair_phase_array",
    "evolve_manybody",
    "manybody_energy",
    "excess_energy_diagnostic",
    "symmetrize",
    "symmetry_residual",
    "product_state",
    "estimate_state_bytes",
    "DEFAULT_MEMORY_CAP",
    "trajectory_rows",
]

DEFAULT_MEMORY_CAP = 2 * 1024**3  # bytes; a run needs ~5 tensors of state size


@dataclass(frozen=True)
class ManyBodyState:
    """Symmetric N-particle wavefunction on the tensor grid."""

    domain: ProductDomain
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        self.n_particles_of(values.shape)  # shape validation
        object.__setattr__(self, "values", values)

    def n_particles_of(self, shape) -> int:
        block = len(self.domain.shape)
        if len(shape) % block or shape != self.domain.shape * (len(shape) // block):
            raise ConfigError("value shape is not a tensor power of the one-body grid")
        return len(shape) // block

    @property
    def n_particles(self) -> int:
        return len(self.values.shape) // len(self.domain.shape)

    @property
    def cell_volume(self) -> float:
        return self.domain.cell_volume ** self.n_particles

    def mass(self) -> float:
        return float(np.sqrt(self.cell_volume * np.vdot(self.values, self.values).real))


def _axis_blocks(domain: ProductDomain, n: int):
    """Free and confined axis indices per particle."""
    d_f, d_c = domain.free.dim, domain.confined.dim
    block = d_f + d_c
    free, conf = [], []
    for i in range(n):
        free += [i * block + a for a in range(d_f)]
        conf += [i * block + d_f + a for a in range(d_c)]
    return tuple(free), tuple(conf)


def estimate_state_bytes(spec: ModelSpec) -> int:
    m = int(np.prod(spec.domain.shape))
    return 16 * m**spec.n_particles


def _check_memory(spec: ModelSpec, cap: int):
    need = 5 * estimate_state_bytes(spec)  # state, spectral copy, phases, temps
    if need > cap:
        raise GuardError(
            f"estimated working set {need / 2**30:.2f} GiB exceeds cap "
            f"{cap / 2**30:.2f} GiB; shrink the grid or raise the cap"
        )


# -- pair interaction ---------------------------------------------------------


@dataclass(frozen=True)
class RelativeKernel:
    """Scaled pair kernel sampled on the relative-coordinate grid.

    Free offsets are the minimum-image displacements of the periodic box
    (ascending, one per node); confined offsets run over all differences of
    interior nodes.  ``values`` is indexed [free axes ..., confined axes ...].
    """

    values: np.ndarray
    free_offsets: tuple[np.ndarray, ...]
    confined_offsets: tuple[np.ndarray, ...]
    cell_volume: float

    def integral(self) -> float:
        """Grid quadrature of the kernel over the relative coordinates."""
        return float(np.sum(self.values.real) * self.cell_volume)


def _kernel_scaling(spec: ModelSpec) -> tuple[float, float]:
    """(prefactor, argument scale) of the sampled kernel.

    theta = 0: plain w(x, eps y).  theta > 0: the N-multiplied short-range
    kernel N a^(1-3 theta) w(a^-theta (x, eps y)); the Hamiltonian divides
    by N (resp. N-1) again via ``spec.pair_prefactor``.
    """
    if spec.regime == "hartree-theta0":
        return 1.0, 1.0
    a = spec.coupling_length
    return spec.n_particles * a ** (1.0 - 3.0 * spec.theta), a ** (-spec.theta)


def _resolvability_guard(spec: ModelSpec):
    if spec.interaction.amplitude == 0.0:
        return
    if not spec.interaction.is_bounded:
        raise GuardError(
            "grid pair dynamics needs a bounded interaction kind; the coulomb "
            "profile is for the norm and quadrature machinery"
        )
    _, arg_scale = _kernel_scaling(spec)
    r_scaled = spec.interaction.radius / arg_scale
    for h in spec.free.spacings:
        if r_scaled < 3.0 * h:
            need = math.ceil(3.0 * h / r_scaled * max(spec.free.points))
            raise GuardError(
                f"scaled interaction support {r_scaled:.3g} under-resolved; "
                f"needs >= 3 spacings (try about {need} free points per axis)"
            )
    for h in spec.confined.spacings:
        if r_scaled / spec.eps < 3.0 * h:
            raise GuardError(
                "scaled interaction support under-resolved on the confined axes"
            )


def pair_interaction_values(spec: ModelSpec) -> RelativeKernel:
    """Sample the scaled pair kernel on the relative-coordinate grid.

    The confined relative coordinate enters the profile compressed by eps,
    exactly as in the rescaled Hamiltonian.
    """
    _resolvability_guard(spec)
    pref, arg_scale = _kernel_scaling(spec)
    free_offs = tuple(spec.free.axis_nodes(a) for a in range(spec.free.dim))
    conf_offs = []
    for a in range((spec.confined.dim)):
        h = spec.confined.spacings[a]
        n = spec.confined.points[a]
        conf_offs.append(h * np.arange(-(n - 1), n))
    conf_offs = tuple(conf_offs)
    grids_ = np.meshgrid(*free_offs, *conf_offs, indexing="ij")
    d_f = spec.free.dim
    x2 = sum(g**2 for g in grids_[:d_f])
    y2 = sum(g**2 for g in grids_[d_f:]) if grids_[d_f:] else 0.0
    r = np.sqrt(x2 + spec.eps**2 * y2)
    values = pref * spec.interaction.radial(arg_scale * r)
    cell = spec.free.cell_volume * spec.confined.cell_volume
    return RelativeKernel(values.astype(np.complex128), free_offs, conf_offs, cell)


def pair_phase_array(spec: ModelSpec) -> np.ndarray:
    """W(r_i - r_j) for one particle pair, shape (one-body grid) x 2.

    Free differences use the periodic minimum image; the prefactor of the
    Hamiltonian (1/(N-1) or 1/N) is *not* included.
    """
    _resolvability_guard(spec)
    pref, arg_scale = _kernel_scaling(spec)
    shape = spec.domain.shape
    block = len(shape)
    r2 = np.zeros(shape + shape)
    for a in range(spec.free.dim):
        nodes = spec.free.axis_nodes(a)
        L = spec.free.extents[a]
        diff = nodes[:, None] - nodes[None, :]
        diff -= L * np.round(diff / L)
        sh = [1] * (2 * block)
        sh[a], sh[block + a] = len(nodes), len(nodes)
        r2 = r2 + (diff**2).reshape(sh)
    for a in range(spec.confined.dim):
        nodes = spec.confined.axis_nodes(a)
        diff = nodes[:, None] - nodes[None, :]
        axis = spec.free.dim + a
        sh = [1] * (2 * block)
        sh[axis], sh[block + axis] = len(nodes), len(nodes)
        r2 = r2 + (spec.eps * diff).reshape(sh) ** 2
    return pref * spec.interaction.radial(arg_scale * np.sqrt(r2))


# -- dynamics -----------------------------------------------------------------

_SINE_CACHE: dict[int, np.ndarray] = {}


def _sine_matrix(n: int) -> np.ndarray:
    mat = _SINE_CACHE.get(n)
    if mat is None:
        j = np.arange(1, n + 1)
        mat = np.sin(np.pi * np.outer(j, j) / (n + 1))
        _SINE_CACHE[n] = mat
    return mat


def _dst_axis(values, axis, inverse=False):
    """DST-I along one axis by batched matmul; confined axes are short,
    where pocketfft's per-vector overhead dwarfs the O(n^2) arithmetic."""
    n = values.shape[axis]
    if n > 128:
        fn = sfft.idst if inverse else sfft.dst
        return fn(values, type=1, axis=axis)
    left = int(np.prod(values.shape[:axis], dtype=np.int64))
    right = int(np.prod(values.shape[axis + 1:], dtype=np.int64))
    block = values.reshape(left, n, right)
    mat = _sine_matrix(n)
    scale = 1.0 / (n + 1) if inverse else 2.0
    return (scale * np.matmul(mat, block)).reshape(values.shape)


def _forward(values, free_axes, conf_axes):
    out = sfft.fftn(values, axes=free_axes) if free_axes else values.copy()
    for ax in conf_axes:
        out = _dst_axis(out, ax)
    return out


def _inverse(values, free_axes, conf_axes):
    out = values
    for ax in conf_axes:
        out = _dst_axis(out, ax, inverse=True)
    return sfft.ifftn(out, axes=free_axes) if free_axes else out


def _broadcast_shape(total_axes: int, block: int, i: int, one_body_shape):
    shape = [1] * total_axes
    for a, n in enumerate(one_body_shape):
        shape[i * block + a] = n
    return tuple(shape)


def symmetry_residual(state: ManyBodyState) -> float:
    """Max over transpositions of ||psi - sigma psi|| (quadrature norm)."""
    n = state.n_particles
    block = len(state.domain.shape)
    worst = 0.0
    scale = np.sqrt(state.cell_volume)
    for i, j in itertools.combinations(range(n), 2):
        order = list(range(n))
        order[i], order[j] = j, i
        axes = [b * block + a for b in order for a in range(block)]
        swapped = np.transpose(state.values, axes)
        worst = max(worst, float(np.linalg.norm((state.values - swapped).ravel())) * scale)
    return worst


def evolve_manybody(state: ManyBodyState, spec: ModelSpec, T: float, dt: float,
                    stride: int = 1, memory_cap: int = DEFAULT_MEMORY_CAP,
                    sym_tol: float = 1e-6) -> list[ManyBodyState]:
    """Strang-split unitary evolution under the N-particle Hamiltonian.

    Kinetic multiplier includes the eps^-2 weight on confined axes; the
    potential substep applies the exact phase of the summed external
    potential and pair interactions, the external part evaluated at the
    substep midpoint.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    steps = round(T / dt)
    if abs(steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ConfigError("T must be an integral number of steps")
    if state.n_particles != spec.n_particles or state.domain != spec.domain:
        raise ConfigError("state does not match the model spec's grid or N")
    _check_memory(spec, memory_cap)
    if abs(state.mass() - 1.0) > 1e-6:
        raise ConfigError("initial state is not normalized")
    if symmetry_residual(state) > sym_tol:
        raise ConfigError("initial state is not permutation symmetric")

    n = spec.n_particles
    dom = spec.domain
    block = len(dom.shape)
    total_axes = n * block
    free_axes, conf_axes = _axis_blocks(dom, n)
    one_kick = np.exp(-0.5j * dt * kinetic_multiplier(dom))
    pair = pair_phase_array(spec) if n > 1 else None

    def kinetic_half(values):
        spec_vals = _forward(values, free_axes, conf_axes)
        for i in range(n):
            spec_vals *= one_kick.reshape(_broadcast_shape(total_axes, block, i, dom.shape))
        return _inverse(spec_vals, free_axes, conf_axes)

    def potential_phase(values, t_mid):
        if not spec.potential.is_zero:
            v_one = spec.potential.values_product(t_mid, dom)
            phase_one = np.exp(-1j * dt * v_one)
            for i in range(n):
                values *= phase_one.reshape(_broadcast_shape(total_axes, block, i, dom.shape))
        if pair is not None:
            phase_pair = np.exp(-1j * dt * spec.pair_prefactor * pair)
            for i, j in itertools.combinations(range(n), 2):
                sh = [1] * total_axes
                for a, m in enumerate(dom.shape):
                    sh[i * block + a] = m
                for a, m in enumerate(dom.shape):
                    sh[j * block + a] = m
                values *= phase_pair.reshape(sh)
        return values

    out = [state]
    values = state.values.copy()
    for k in range(steps):
        t_mid = state.t + k * dt + dt / 2
        values = kinetic_half(values)
        values = potential_phase(values, t_mid)
        values = kinetic_half(values)
        if (k + 1) % stride == 0 or k + 1 == steps:
            out.append(ManyBodyState(dom, values.copy(), state.t + (k + 1) * dt))
    return out


def _apply_h1(state: ManyBodyState, spec: ModelSpec) -> np.ndarray:
    """(h_1 + V_1) psi with the kinetic part applied spectrally on particle 1."""
    dom = state.domain
    block = len(dom.shape)
    n = state.n_particles
    free_axes = tuple(a for a in range(block) if a < dom.free.dim)
    conf_axes = tuple(a for a in range(block) if a >= dom.free.dim)
    spec_vals = _forward(state.values, free_axes, conf_axes)
    spec_vals *= kinetic_multiplier(dom).reshape(dom.shape + (1,) * (block * (n - 1)))
    out = _inverse(spec_vals, free_axes, conf_axes)
    if not spec.potential.is_zero:
        v_one = spec.potential.values_product(state.t, dom)
        out = out + v_one.reshape(dom.shape + (1,) * (block * (n - 1))) * state.values
    return out


def manybody_energy(state: ManyBodyState, spec: ModelSpec,
                    sym_tol: float = 1e-6) -> float:
    """Per-particle energy via the symmetric two-body reduction."""
    if symmetry_residual(state) > sym_tol:
        raise ConfigError("manybody_energy expects a symmetric state")
    vol = state.cell_volume
    n = state.n_particles
    h1 = _apply_h1(state, spec)
    kin = float((np.vdot(state.values, h1) * vol).real)
    inter = 0.0
    if n > 1:
        pair = pair_phase_array(spec)
        block = len(state.domain.shape)
        sh = state.domain.shape * 2 + (1,) * (block * (n - 2))
        wpsi = pair.reshape(sh) * state.values
        pair_exp = float((np.vdot(state.values, wpsi) * vol).real)
        coeff = spec.pair_prefactor * (n * (n - 1) / 2.0) / n
        inter = coeff * pair_exp
    return kin + inter


def excess_energy_diagnostic(state: ManyBodyState, spec: ModelSpec) -> float:
    """Per-particle energy above the confined ground level, N^-1 <H - N E0/eps^2>."""
    from .onebody import chi_mode

    mode = chi_mode(spec.confined, 0)
    return manybody_energy(state, spec) - mode.energy_eps


def symmetrize(domain: ProductDomain, values: np.ndarray, t: float = 0.0) -> ManyBodyState:
    """Average over all particle permutations and renormalize."""
    raw = ManyBodyState(domain, values, t)
    n = raw.n_particles
    if n > 6:
        raise GuardError("permutation average limited to N <= 6")
    block = len(domain.shape)
    acc = np.zeros_like(raw.values)
    for order in itertools.permutations(range(n)):
        axes = [b * block + a for b in order for a in range(block)]
        acc += np.transpose(raw.values, axes)
    acc /= math.factorial(n)
    nrm = float(np.linalg.norm(acc.ravel())) * np.sqrt(raw.cell_volume)
    if nrm < 1e-14:
        raise ConfigError("state vanishes after symmetrization")
    return ManyBodyState(domain, acc / nrm, t)


def product_state(one_body: OneBodyState, n: int) -> ManyBodyState:
    """phi^(x) n as a ManyBodyState (normalizes the one-body factor)."""
    phi = one_body.product_values()
    phi = phi / (np.linalg.norm(phi.ravel()) * np.sqrt(one_body.domain.cell_volume))
    values = phi
    for _ in range(n - 1):
        values = np.multiply.outer(values, phi)
    return ManyBodyState(one_body.domain, values, one_body.t)


def trajectory_rows(states: list[ManyBodyState], spec: ModelSpec):
    """CSV rows (t, mass, E_psi, symmetry_residual)."""
    return [
        (st.t, st.mass(), manybody_energy(st, spec), symmetry_residual(st))
        for st in states
    ]
