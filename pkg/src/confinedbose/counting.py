"""Projection-counting machinery measuring closeness to a condensate.

Everything is built from the rank-one projector p = |phi><phi| applied per
particle coordinate: the symmetric sector projectors P_{k,N} onto "exactly k
particles orthogonal to phi", weighted operators f-hat = sum f(k) P_{k,N},
the functionals alpha, beta and their derivative decomposition, the reduced
one-particle density matrix and the trace distance.

Two independent computation routes exist for every functional: the tensor
contraction route below (works for any per-site dimension, including full
grids) and the explicit kron-matrix route in the ``dense_*`` helpers, small
enough to serve as the other's oracle.

Internally all states are rescaled to unit quadrature weight, so inner
products are plain euclidean ones regardless of representation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantError
from .grids import GridFunction, kinetic_multiplier
from .manybody import ManyBodyState, _forward, _inverse, pair_phase_array
from .model import ModelSpec
from .onebody import OneBodyState, chi_mode, hartree_potential, mean_field_kernel

__all__ = [
    "WeightFunction",
    "project_p",
    "project_q",
    "occupancy_components",
    "alpha",
    "alpha_density_route",
    "density_matrix",
    "density_matrix_grid",
    "occupation_distribution",
    "occupation_distribution_enumeration",
    "occupation_distribution_binomial",
    "beta",
    "beta_tilde",
    "hat_apply",
    "shift_identity_residual",
    "weight_difference_bound",
    "trace_distance",
    "derivative_terms",
    "grad_q_norm",
    "mode_projection_split",
    "op_norm_interaction_projected",
    "op_norm_sandwiched",
    "CountingReport",
    "compute_report",
    "dense_p_matrices",
    "dense_sector_projectors",
    "dense_hat_matrix",
]


# -- frames -------------------------------------------------------------------


def _frame(psi, phi, weight: float = 1.0):
    """Rescale (psi, phi) to unit quadrature weight and flatten per particle.

    ``psi`` may carry any number of axes per particle as long as the total
    size is a power of len(phi); ``weight`` is the one-body cell volume.
    """
    phi = np.asarray(phi, dtype=np.complex128).ravel()
    m = phi.size
    if m < 2:
        raise ConfigError("one-body dimension must be at least 2")
    psi = np.asarray(psi, dtype=np.complex128)
    n, size = 0, psi.size
    while size > 1 and size % m == 0:
        size //= m
        n += 1
    if size != 1 or n == 0:
        raise ConfigError("psi size is not a tensor power of the one-body dimension")
    psi = psi.reshape((m,) * n)
    if weight != 1.0:
        psi = psi * weight ** (n / 2.0)
        phi = phi * weight**0.5
    nrm = np.linalg.norm(phi)
    if abs(nrm - 1.0) > 1e-6:
        raise InvariantError(f"condensate reference is not normalized (|phi| = {nrm:.2e})")
    return psi, phi, n


def _grid_frame(state: ManyBodyState, reference):
    phi = reference.product_values() if isinstance(reference, OneBodyState) else (
        reference.values if isinstance(reference, GridFunction) else reference
    )
    return _frame(state.values, phi, weight=state.domain.cell_volume)


def project_p(v: np.ndarray, phi: np.ndarray, axis: int) -> np.ndarray:
    """p_axis v with p = |phi><phi| (unit-weight convention).

    Implemented on a (left, m, right) reshape so the result is contiguous;
    strided views here would dominate the runtime of every functional.
    """
    m = v.shape[axis]
    left = int(np.prod(v.shape[:axis], dtype=np.int64))
    right = int(np.prod(v.shape[axis + 1:], dtype=np.int64))
    block = v.reshape(left, m, right)
    c = np.einsum("p,lpr->lr", np.conj(phi), block)
    return (phi[None, :, None] * c[:, None, :]).reshape(v.shape)


def project_q(v: np.ndarray, phi: np.ndarray, axis: int) -> np.ndarray:
    return v - project_p(v, phi, axis)


def occupancy_components(psi: np.ndarray, phi: np.ndarray, weight: float = 1.0):
    """[P_{0,N} psi, ..., P_{N,N} psi] by per-coordinate splitting.

    Sweeping the coordinates once and keeping partial sums sorted by the
    number of q factors costs O(N^2) projector applications instead of the
    2^N literal operator sum.  Buffers are reused in place; large fresh
    temporaries would dominate the runtime through page faults.
    """
    psi, phi, n = _frame(psi, phi, weight)
    comps = [psi.copy()]
    for axis in range(n):
        new = []
        prev_q = None
        for k in range(len(comps)):
            p_part = project_p(comps[k], phi, axis)
            q_part = np.subtract(comps[k], p_part, out=comps[k])
            if prev_q is None:
                new.append(p_part)
            else:
                new.append(np.add(p_part, prev_q, out=p_part))
            prev_q = q_part
        new.append(prev_q)
        comps = new
    return comps


# -- the functionals ----------------------------------------------------------


def alpha(psi, phi, weight: float = 1.0) -> float:
    """alpha = <psi, q_1 psi> = 1 - <phi, gamma phi> for normalized input."""
    psi, phi, _ = _frame(psi, phi, weight)
    q1 = project_q(psi, phi, 0)
    return float(np.vdot(q1, q1).real)


def density_matrix(psi) -> np.ndarray:
    """Reduced one-particle density matrix in the unit-weight basis.

    ``psi`` carries one axis per particle (unit-weight frame).  Returns the
    m x m Hermitian matrix with trace ||psi||^2; its quadratic form against
    a unit-weight-rescaled phi gives <phi, gamma phi>.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    rest = tuple(range(1, psi.ndim))
    return np.tensordot(psi, np.conj(psi), axes=(rest, rest))


def density_matrix_grid(state: ManyBodyState) -> np.ndarray:
    """Density matrix of a grid state, unit-weight one-body basis."""
    m = int(np.prod(state.domain.shape))
    psi = state.values.reshape((m,) * state.n_particles)
    return density_matrix(psi * state.domain.cell_volume ** (state.n_particles / 2.0))


def alpha_density_route(psi, phi, weight: float = 1.0) -> float:
    """alpha = 1 - <phi, gamma^psi phi>, the density-matrix route."""
    psi, phi, _ = _frame(psi, phi, weight)
    gamma = density_matrix(psi)
    return float(1.0 - np.vdot(phi, gamma @ phi).real)


def occupation_distribution(psi, phi, weight: float = 1.0) -> np.ndarray:
    """p(k) = <psi, P_{k,N} psi> via the occupancy decomposition."""
    comps = occupancy_components(psi, phi, weight)
    return np.array([float(np.vdot(c, c).real) for c in comps])


def occupation_distribution_enumeration(psi, phi, weight: float = 1.0) -> np.ndarray:
    """Brute-force oracle: explicit sum over all 2^N projector patterns."""
    psi, phi, n = _frame(psi, phi, weight)
    if n > 6:
        raise ConfigError("pattern enumeration limited to N <= 6")
    out = np.zeros(n + 1)
    for pattern in itertools.product((0, 1), repeat=n):
        v = psi
        for axis, is_q in enumerate(pattern):
            v = project_q(v, phi, axis) if is_q else project_p(v, phi, axis)
        out[sum(pattern)] += float(np.vdot(v, v).real)
    return out


def occupation_distribution_binomial(psi, phi, weight: float = 1.0,
                                     sym_tol: float = 1e-6) -> np.ndarray:
    """Symmetric shortcut p(k) = C(N,k) <psi, q_1..q_k p_{k+1}..p_N psi>."""
    psi, phi, n = _frame(psi, phi, weight)
    for i, j in itertools.combinations(range(n), 2):
        order = list(range(n))
        order[i], order[j] = j, i
        if np.linalg.norm((psi - np.transpose(psi, order)).ravel()) > sym_tol:
            raise ConfigError("binomial shortcut requires a symmetric state")
    out = np.zeros(n + 1)
    for k in range(n + 1):
        v = psi
        for axis in range(k):
            v = project_q(v, phi, axis)
        for axis in range(k, n):
            v = project_p(v, phi, axis)
        out[k] = math.comb(n, k) * float(np.vdot(psi, v).real)
    return out


def beta(psi, phi, weight: float = 1.0) -> float:
    """beta = sum_k sqrt(k/N) <psi, P_{k,N} psi>."""
    pk = occupation_distribution(psi, phi, weight)
    n = len(pk) - 1
    w = np.sqrt(np.arange(n + 1) / n)
    return float(np.dot(w, pk))


def beta_tilde(psi, phi, e_psi: float, e_phi: float, weight: float = 1.0) -> float:
    """beta + |E^psi - E^phi|, the energy-augmented functional."""
    return beta(psi, phi, weight) + abs(e_psi - e_phi)


# -- weighted operators -------------------------------------------------------

_TAGS = ("n", "k/N", "mu", "mu1")


@dataclass(frozen=True)
class WeightFunction:
    """Tabulated weight f(0..N), optionally tagged with its formula.

    Tagged weights shift by their natural formula beyond k = N (the counting
    bounds need e.g. sqrt((k+l)/N) there); untagged tables shift with the
    zero-fill convention, which is all the exchange identities require.
    """

    values: np.ndarray
    tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.tag is not None and self.tag not in _TAGS:
            raise ConfigError(f"unknown weight tag {self.tag!r}")

    @property
    def n_particles(self) -> int:
        return len(self.values) - 1

    def _formula(self, k: np.ndarray) -> np.ndarray:
        n = float(self.n_particles)
        k = np.asarray(k, dtype=float)
        pos = np.maximum(k, 0.0)
        if self.tag == "n":
            out = np.sqrt(pos / n)
        elif self.tag == "k/N":
            out = pos / n
        elif self.tag == "mu":
            out = np.sqrt(n) * (np.sqrt(pos) - np.sqrt(np.maximum(pos - 1, 0.0)))
        else:  # mu1
            out = np.sqrt(n) * (np.sqrt(pos) - np.sqrt(np.maximum(pos - 2, 0.0)))
        return np.where(k < 0, 0.0, out)

    @classmethod
    def from_tag(cls, tag: str, n: int) -> "WeightFunction":
        w = cls(np.zeros(n + 1), None)
        object.__setattr__(w, "tag", tag)
        object.__setattr__(w, "values", w._formula(np.arange(n + 1)))
        return w

    @classmethod
    def sqrt_fraction(cls, n: int) -> "WeightFunction":
        return cls.from_tag("n", n)

    @classmethod
    def coordinate_fraction(cls, n: int) -> "WeightFunction":
        return cls.from_tag("k/N", n)

    def inverse(self) -> "WeightFunction":
        """Formal reciprocal with 1/f(k) := 0 where f vanishes.

        Meant to be applied only after a q_1 factor, which annihilates the
        k = 0 sector, so the convention never divides by zero in anger.
        """
        safe = np.where(self.values != 0.0, self.values, 1.0)
        return WeightFunction(np.where(self.values != 0.0, 1.0 / safe, 0.0))

    def shifted(self, j: int) -> "WeightFunction":
        """(tau_j f)(k) = f(k + j); out-of-range per the class docstring."""
        k = np.arange(self.n_particles + 1) + j
        if self.tag is not None:
            vals = self._formula(k)
        else:
            vals = np.where(
                (k >= 0) & (k <= self.n_particles),
                self.values[np.clip(k, 0, self.n_particles)],
                0.0,
            )
        return WeightFunction(vals, None)

    def __mul__(self, other: "WeightFunction") -> "WeightFunction":
        return WeightFunction(self.values * other.values, None)


def hat_apply(f: WeightFunction, psi, phi, weight: float = 1.0) -> np.ndarray:
    """f-hat psi = sum_k f(k) P_{k,N} psi, in the unit-weight frame."""
    comps = occupancy_components(psi, phi, weight)
    out = np.zeros_like(comps[0])
    for k, c in enumerate(comps):
        out += f.values[k] * c
    return out


def _apply_Q(v, phi, variant: int, which: int):
    """Q_0 = p1 p2, Q_1 = p1 q2 (variant 0) or q1 p2 (variant 1), Q_2 = q1 q2."""
    if which == 0:
        return project_p(project_p(v, phi, 0), phi, 1)
    if which == 2:
        return project_q(project_q(v, phi, 0), phi, 1)
    if variant == 0:
        return project_q(project_p(v, phi, 0), phi, 1)
    return project_p(project_q(v, phi, 0), phi, 1)


def _apply_two_body(v, T):
    """Apply an operator on coordinates 1, 2: diag values (m, m) or kernel (m,m,m,m)."""
    T = np.asarray(T)
    if T.ndim == 2:
        return v * T.reshape(T.shape + (1,) * (v.ndim - 2))
    m = v.shape[0]
    out = np.tensordot(T.reshape(m, m, m, m), v, axes=([2, 3], [0, 1]))
    return out


def shift_identity_residual(f: WeightFunction, j: int, k: int, T, psi, phi,
                            weight: float = 1.0, variant: int = 0) -> float:
    """|| f-hat Q_j T Q_k psi - Q_j T Q_k (tau_{j-k} f)-hat psi ||.

    The exchange identity moving a weighted operator through a two-body
    block; zero-fill shifts suffice because out-of-range weights multiply
    vanishing sectors.
    """
    psi, phi, _ = _frame(psi, phi, weight)
    rhs_in = hat_apply(f.shifted(j - k), psi, phi)
    rhs = _apply_Q(_apply_two_body(_apply_Q(rhs_in, phi, variant, k), T), phi, variant, j)
    mid = _apply_Q(_apply_two_body(_apply_Q(psi, phi, variant, k), T), phi, variant, j)
    lhs = hat_apply(f, mid, phi)
    return float(np.linalg.norm((lhs - rhs).ravel()))


def weight_difference_bound(m_tag: str, l: int, psi, phi,
                            weight: float = 1.0) -> tuple[float, float]:
    """(lhs, rhs) of || (m-hat - (tau_l m)-hat) q_1 psi || <= l/N.

    ``m_tag`` is 'k/N' or 'n'; the shift uses the tagged formula extension.
    """
    if m_tag not in ("k/N", "n"):
        raise ConfigError("the difference bound holds for the k/N and sqrt(k/N) weights")
    psi, phi, n = _frame(psi, phi, weight)
    m = WeightFunction.from_tag(m_tag, n)
    diff = WeightFunction(m.values - m.shifted(l).values, None)
    v = project_q(psi, phi, 0)
    lhs = float(np.linalg.norm(hat_apply(diff, v, phi).ravel()))
    return lhs, l / n


def trace_distance(gamma: np.ndarray, phi: np.ndarray) -> float:
    """Tr |gamma - |phi><phi||, by eigendecomposition of the difference."""
    phi = np.asarray(phi, dtype=np.complex128).ravel()
    if gamma.shape[0] > 4096:
        raise ConfigError("trace distance limited to one-body dimension <= 4096")
    diff = gamma - np.outer(phi, np.conj(phi))
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# -- derivative decomposition and energy-lemma ingredients --------------------


def _pair_kernel_flat(spec: ModelSpec) -> np.ndarray:
    m = int(np.prod(spec.domain.shape))
    return pair_phase_array(spec).reshape(m, m)


def derivative_terms(state: ManyBodyState, one_body: OneBodyState,
                     spec: ModelSpec) -> tuple[float, float, float, float]:
    """(I, II, III, d alpha/dt) of the mean-field derivative decomposition.

    Valid in the theta = 0 regime: W_12 = w(x_1-x_2, eps(y_1-y_2)) minus the
    mean field (w0 * |Phi|^2)(x_1).  The signed total is
    -2 Im <psi, p_1 W_12 q_1 psi>; |d alpha/dt| <= I + II + III.
    """
    if spec.regime != "hartree-theta0":
        raise ConfigError("the derivative decomposition is a theta = 0 statement")
    psi, phi, n = _grid_frame(state, one_body)
    if n < 2:
        raise ConfigError("need at least two particles")
    kernel = _pair_kernel_flat(spec)

    mf = hartree_potential(one_body.phi_free, mean_field_kernel(spec)).values.real
    mf_one = np.broadcast_to(
        mf.reshape(mf.shape + (1,) * spec.confined.dim), spec.domain.shape
    ).reshape(-1)

    def w12(v):
        out = v * kernel.reshape(kernel.shape + (1,) * (n - 2))
        out -= v * mf_one.reshape((-1,) + (1,) * (n - 1))
        return out

    p1 = project_p(psi, phi, 0)
    q1 = project_q(psi, phi, 0)
    p1p2 = project_p(p1, phi, 1)
    p1q2 = project_q(p1, phi, 1)
    q1p2 = project_p(q1, phi, 1)
    q1q2 = project_q(q1, phi, 1)

    term1 = 2.0 * abs(np.vdot(p1p2, w12(q1p2)))
    term2 = 2.0 * abs(np.vdot(p1p2, w12(q1q2)))
    term3 = 2.0 * abs(np.vdot(p1q2, w12(q1q2)))
    total = -2.0 * float(np.vdot(p1, w12(q1)).imag)
    return term1, term2, term3, total


def grad_q_norm(state: ManyBodyState, reference) -> float:
    """<q_1 psi, h~_1 q_1 psi> with h~ = -Delta_x - eps^-2 Delta_y - E_0/eps^2.

    The confined axes carry the eps^-2 weight and the confined ground level
    is subtracted, so the value vanishes on pure condensates and is
    nonnegative by the spectral gap.
    """
    dom = state.domain
    phi = reference.product_values() if isinstance(reference, OneBodyState) else np.asarray(reference)
    psi, phi_l2, n = _frame(state.values, phi, weight=dom.cell_volume)
    q1 = project_q(psi, phi_l2, 0)
    block_shape = dom.shape
    q1 = q1.reshape(block_shape + (int(np.prod(block_shape)),) * (n - 1))
    d_f = dom.free.dim
    block = len(block_shape)
    free_axes = tuple(range(d_f))
    conf_axes = tuple(range(d_f, block))
    spec_vals = _forward(q1, free_axes, conf_axes)
    e0 = chi_mode(dom.confined, 0).energy_eps
    mult = kinetic_multiplier(dom) - e0
    hv = _inverse(spec_vals * mult.reshape(block_shape + (1,) * (n - 1)), free_axes, conf_axes)
    return float(np.vdot(q1, hv).real)


def mode_projection_split(state: ManyBodyState, one_body: OneBodyState) -> tuple[float, float]:
    """(||q_1^chi psi||^2, ||p_1^chi q_1^Phi psi||^2); the parts sum to alpha.

    Splits the first-coordinate deviation from the condensate into confined
    excitations and free-direction excitations of the ground confined mode.
    """
    dom = state.domain
    d_f, d_c = dom.free.dim, dom.confined.dim
    n = state.n_particles
    vol_c = dom.confined.cell_volume
    vol_f = dom.free.cell_volume
    chi = one_body.mode.chi.values * np.sqrt(vol_c)
    phi_free = one_body.phi_free.values * np.sqrt(vol_f)
    psi = state.values * dom.cell_volume ** (n / 2.0)

    conf_axes = tuple(range(d_f, d_f + d_c))
    c = np.tensordot(np.conj(chi), psi, axes=(tuple(range(d_c)), conf_axes))
    p_chi = np.moveaxis(
        np.multiply.outer(chi, c), tuple(range(d_c)), conf_axes
    )
    q_chi = psi - p_chi
    q_chi_sq = float(np.vdot(q_chi, q_chi).real)

    free_axes = tuple(range(d_f))
    cf = np.tensordot(np.conj(phi_free), p_chi, axes=(tuple(range(d_f)), free_axes))
    p_phi_p_chi = np.moveaxis(
        np.multiply.outer(phi_free, cf), tuple(range(d_f)), free_axes
    )
    q_phi_p_chi = p_chi - p_phi_p_chi
    return q_chi_sq, float(np.vdot(q_phi_p_chi, q_phi_p_chi).real)


# -- operator norm checks -----------------------------------------------------


def op_norm_interaction_projected(kernel_flat: np.ndarray, phi_l2: np.ndarray,
                                  iters: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of || w_12 p_1 ||_Op on the two-body grid.

    The square is the top eigenvalue of p_1 w_12^2 p_1.
    """
    m = len(phi_l2)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    w2 = np.abs(kernel_flat) ** 2
    lam = 0.0
    for _ in range(iters):
        u = project_p(v, phi_l2, 0)
        u = w2 * u
        u = project_p(u, phi_l2, 0)
        nrm = np.linalg.norm(u)
        if nrm < 1e-300:
            return 0.0
        lam = nrm
        v = u / nrm
    return float(np.sqrt(lam))


def op_norm_sandwiched(kernel_flat: np.ndarray, phi_l2: np.ndarray) -> float:
    """|| p_1 g_12 p_1 ||_Op, exact: sup_b |sum_a |phi(a)|^2 g(a, b)|."""
    dens = np.abs(phi_l2) ** 2
    return float(np.max(np.abs(dens @ kernel_flat)))


# -- reports ------------------------------------------------------------------

_REPORT_FIELDS = (
    "t", "alpha", "beta", "beta_tilde", "p_k", "trace_distance",
    "E_psi", "E_phi", "grad_q_sq",
)


@dataclass(frozen=True)
class CountingReport:
    """Snapshot of every condensation functional at one time."""

    t: float
    alpha: float
    beta: float
    beta_tilde: float
    p_k: tuple[float, ...]
    trace_distance: float
    E_psi: float
    E_phi: float
    grad_q_sq: float

    def validate(self, tol: float = 1e-9):
        n = len(self.p_k) - 1
        if not -tol <= self.alpha <= 1 + tol or not -tol <= self.beta <= 1 + tol:
            raise InvariantError("alpha/beta out of [0, 1]")
        if abs(sum(self.p_k) - 1.0) > tol:
            raise InvariantError("occupation distribution does not sum to one")
        ks = np.arange(n + 1)
        if abs(self.alpha - float(np.dot(ks / n, self.p_k))) > tol:
            raise InvariantError("alpha disagrees with its occupation moment")
        if abs(self.beta - float(np.dot(np.sqrt(ks / n), self.p_k))) > tol:
            raise InvariantError("beta disagrees with its occupation moment")
        if self.alpha > self.beta + tol:
            raise InvariantError("alpha exceeds beta")
        return self

    def to_dict(self) -> dict:
        d = {}
        for name in _REPORT_FIELDS:
            value = getattr(self, name)
            d[name] = list(value) if name == "p_k" else value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> str:
        cells = []
        for name in _REPORT_FIELDS:
            value = getattr(self, name)
            if name == "p_k":
                cells.append(";".join(f"{p:.12g}" for p in value))
            else:
                cells.append(f"{value:.12g}")
        return ",".join(cells)

    @staticmethod
    def csv_header() -> str:
        return ",".join(_REPORT_FIELDS)


def compute_report(state: ManyBodyState, one_body: OneBodyState, spec: ModelSpec,
                   e_psi: float | None = None, e_phi: float | None = None) -> CountingReport:
    """Evaluate all counting functionals for one (psi, phi) snapshot."""
    from .manybody import manybody_energy
    from .onebody import effective_energy

    psi, phi, n = _grid_frame(state, one_body)
    pk = occupation_distribution(psi, phi)
    ks = np.arange(n + 1)
    a = float(np.dot(ks / n, pk))
    b = float(np.dot(np.sqrt(ks / n), pk))
    gamma = density_matrix(psi)
    tr = trace_distance(gamma, phi)
    if e_psi is None:
        e_psi = manybody_energy(state, spec)
    if e_phi is None:
        e_phi = effective_energy(one_body, spec)
    report = CountingReport(
        t=state.t,
        alpha=a,
        beta=b,
        beta_tilde=b + abs(e_psi - e_phi),
        p_k=tuple(float(p) for p in pk),
        trace_distance=tr,
        E_psi=float(e_psi),
        E_phi=float(e_phi),
        grad_q_sq=grad_q_norm(state, one_body),
    )
    return report.validate()


# -- dense kron-matrix route (the oracle) -------------------------------------


def dense_p_matrices(phi: np.ndarray, n: int) -> list[np.ndarray]:
    """[p_1, ..., p_N] as explicit d^N x d^N matrices."""
    phi = np.asarray(phi, dtype=np.complex128).ravel()
    d = len(phi)
    p = np.outer(phi, np.conj(phi))
    eye = np.eye(d)
    out = []
    for i in range(n):
        mat = np.ones((1, 1), dtype=np.complex128)
        for j in range(n):
            mat = np.kron(mat, p if j == i else eye)
        out.append(mat)
    return out

def dense_sector_projectors(phi: np.ndarray, n: int) -> list[np.ndarray]:
    """[P_{0,N}, ..., P_{N,N}] as explicit matrices (2^N pattern sum)."""
    ps = dense_p_matrices(phi, n)
    dim = ps[0].shape[0]
    qs = [np.eye(dim) - p for p in ps]
    out = [np.zeros((dim, dim), dtype=np.complex128) for _ in range(n + 1)]
    for pattern in itertools.product((0, 1), repeat=n):
        mat = np.eye(dim, dtype=np.complex128)
        for i, is_q in enumerate(pattern):
            mat = mat @ (qs[i] if is_q else ps[i])
        out[sum(pattern)] += mat
    return out


def dense_hat_matrix(f: WeightFunction, phi: np.ndarray, n: int) -> np.ndarray:
    projs = dense_sector_projectors(phi, n)
    return sum(f.values[k] * projs[k] for k in range(n + 1))
