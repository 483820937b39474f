"""Problem definition: pair interactions, external potential, model spec.

The pair interaction is a spherically symmetric profile w on R^3 split into
a singular part w_s (finite L^s norm) and a bounded part w_inf.  Bounded
kinds have compact support and an empty singular part; the Coulomb kind is
split at a fixed radius into singular core and bounded tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import integrate

from .errors import ConfigError
from .grids import ConfinedDomain, FreeDomain, ProductDomain

__all__ = ["InteractionProfile", "ExternalPotential", "ModelSpec", "measured_f_eps"]

_KINDS = ("gaussian-bump", "compact-polynomial-bump", "coulomb", "tabulated")


@dataclass(frozen=True)
class InteractionProfile:
    """Radial two-body potential w(|r|) with its singular/bounded split.

    Parameters
    ----------
    kind : one of gaussian-bump, compact-polynomial-bump, coulomb, tabulated
    amplitude : overall strength
    radius : support radius (bounded kinds truncate there; for coulomb it is
        the radius separating the singular core from the bounded tail)
    sigma : gaussian width (gaussian-bump only)
    singular_exponent : declared s with w_s in L^s (coulomb/tabulated)
    table : (radii, values) arrays for the tabulated kind, linear interp
    """

    kind: str
    amplitude: float = 1.0
    radius: float = 1.0
    sigma: float | None = None
    singular_exponent: float | None = None
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown interaction kind {self.kind!r}")
        if self.radius <= 0:
            raise ConfigError("support radius must be positive")
        if self.kind == "gaussian-bump" and self.sigma is None:
            object.__setattr__(self, "sigma", self.radius / 3.0)
        if self.kind == "coulomb" and self.singular_exponent is None:
            object.__setattr__(self, "singular_exponent", 1.8)
        if self.kind == "tabulated" and self.table is None:
            raise ConfigError("tabulated interaction needs a (radii, values) table")

    # -- radial profile -----------------------------------------------------

    def radial(self, r):
        """w(|r|), vectorized over r >= 0."""
        r = np.asarray(r, dtype=float)
        A = self.amplitude
        if self.kind == "gaussian-bump":
            out = A * np.exp(-(r**2) / (2 * self.sigma**2))
            return np.where(r <= self.radius, out, 0.0)
        if self.kind == "compact-polynomial-bump":
            u = np.clip(r / self.radius, 0.0, 1.0)
            return A * np.where(r <= self.radius, (1 - u**2) ** 2, 0.0)
        if self.kind == "coulomb":
            with np.errstate(divide="ignore"):
                return np.where(r > 0, A / np.maximum(r, 1e-300), np.inf)
        radii, values = self.table
        return A * np.interp(r, radii, values, left=values[0], right=0.0)

    @property
    def is_bounded(self) -> bool:
        return self.kind != "coulomb"

    def sup_norm(self) -> float:
        """sup |w| (bounded part only for coulomb: sup outside the core)."""
        if self.kind == "coulomb":
            return self.amplitude / self.radius
        r = np.linspace(0.0, self.radius, 4097)
        return float(np.max(np.abs(self.radial(r))))

    def integral3(self) -> float:
        """Integral of w over R^3; rejects the non-integrable coulomb kind."""
        if self.kind == "coulomb":
            raise ConfigError("coulomb interaction is not integrable on R^3")
        val, _ = integrate.quad(
            lambda r: 4 * np.pi * r**2 * self.radial(r), 0.0, self.radius, limit=200
        )
        return float(val)

    def ls_norm_singular(self, s: float | None = None) -> float:
        """||w_s||_{L^s(R^3)} of the singular part (0 for bounded kinds)."""
        if self.is_bounded:
            return 0.0
        s = self.singular_exponent if s is None else s
        if s * 1.0 >= 3.0:
            raise ConfigError("coulomb core is not in L^s for s >= 3")
        val, _ = integrate.quad(
            lambda r: 4 * np.pi * r**2 * np.abs(self.radial(r)) ** s,
            0.0,
            self.radius,
            limit=200,
        )
        return float(val ** (1.0 / s))

    def to_dict(self) -> dict:
        d = asdict(self)
        if d.get("table") is not None:
            d["table"] = [list(map(float, d["table"][0])), list(map(float, d["table"][1]))]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionProfile":
        d = dict(d)
        if d.get("table") is not None:
            d["table"] = (np.asarray(d["table"][0], float), np.asarray(d["table"][1], float))
        return cls(**d)


@dataclass(frozen=True)
class ExternalPotential:
    """V(t, x, eps*y) = amplitude * cos(omega t) * exp(-(|x|^2+|eps y|^2)/(2 sigma^2)).

    ``kind='none'`` is the zero potential.  The time dependence is smooth
    and bounded together with its derivatives, which is all the regularity
    the bound machinery assumes of an external field.
    """

    kind: str = "none"
    amplitude: float = 0.0
    sigma: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ConfigError(f"unknown potential kind {self.kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or self.amplitude == 0.0

    def _envelope(self, t: float) -> float:
        return self.amplitude * np.cos(self.omega * t)

    def values_free(self, t: float, free: FreeDomain) -> np.ndarray:
        """V(t, x, 0) on the free grid."""
        if self.is_zero:
            return np.zeros(free.shape)
        xs = free.meshgrid()
        r2 = sum(x**2 for x in xs)
        return self._envelope(t) * np.exp(-r2 / (2 * self.sigma**2))

    def values_product(self, t: float, domain: ProductDomain) -> np.ndarray:
        """V(t, x, eps*y) on the full one-body grid."""
        if self.is_zero:
            return np.zeros(domain.shape)
        eps = domain.eps
        xs = domain.free.meshgrid()
        ys = domain.confined.meshgrid()
        r2 = sum(x**2 for x in xs)
        r2 = r2.reshape(r2.shape + (1,) * domain.confined.dim)
        y2 = sum((eps * y) ** 2 for y in ys)
        return self._envelope(t) * np.exp(-(r2 + y2) / (2 * self.sigma**2))

    def sup_norm(self, t: float) -> float:
        return abs(self._envelope(t))

    def dot_sup_norm(self, t: float) -> float:
        return abs(self.amplitude * self.omega * np.sin(self.omega * t))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExternalPotential":
        return cls(**d)


_REGIMES = ("hartree-theta0", "nls-theta")


@dataclass(frozen=True)
class ModelSpec:
    """Full problem definition for one run.

    ``regime`` selects the interaction scaling: ``hartree-theta0`` uses the
    unscaled kernel w(x, eps y) with a 1/(N-1) prefactor, ``nls-theta`` the
    short-range rescaled kernel with a 1/N prefactor.  The coupling length is
    a = eps^2/N for two confined directions and a = eps/N for one.
    """

    free: FreeDomain
    confined: ConfinedDomain
    n_particles: int
    interaction: InteractionProfile
    regime: str = "hartree-theta0"
    theta: float = 0.0
    nu: float | None = None
    potential: ExternalPotential = field(default_factory=ExternalPotential)
    mode_index: int = 0

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.n_particles < 1:
            raise ConfigError("need at least one particle")
        if self.regime == "hartree-theta0":
            if self.theta != 0.0:
                raise ConfigError("hartree regime requires theta = 0")
        else:
            if not 0.0 < self.theta < 1.0:
                raise ConfigError("nls regime requires theta in (0, 1)")
        if self.nu is not None and self.nu <= 0:
            raise ConfigError("nu must be positive")

    @property
    def eps(self) -> float:
        return self.confined.eps

    @property
    def domain(self) -> ProductDomain:
        return ProductDomain(self.free, self.confined)

    @property
    def coupling_length(self) -> float:
        """a = eps^2/N (two confined directions) or eps/N (one)."""
        if self.confined.dim == 2:
            return self.eps**2 / self.n_particles
        return self.eps / self.n_particles

    @property
    def pair_prefactor(self) -> float:
        """Prefactor applied to the sampled kernel at Hamiltonian assembly."""
        if self.regime == "hartree-theta0":
            return 1.0 / (self.n_particles - 1) if self.n_particles > 1 else 0.0
        return 1.0 / self.n_particles

    def with_particles(self, n: int, eps: float | None = None) -> "ModelSpec":
        confined = self.confined
        if eps is not None:
            confined = ConfinedDomain(confined.intervals, confined.points, eps=eps)
        return ModelSpec(
            free=self.free,
            confined=confined,
            n_particles=n,
            interaction=self.interaction,
            regime=self.regime,
            theta=self.theta,
            nu=self.nu,
            potential=self.potential,
            mode_index=self.mode_index,
        )


def measured_f_eps(profile: InteractionProfile, eps: float, free: FreeDomain,
                   confined: ConfinedDomain, refine: int = 4) -> float:
    """Measured convergence defect f(eps) of w(x, eps y) towards w(x, 0).

    Returns max of the L^1 defect of the singular part and the sup defect of
    the bounded part over Omega_f x (difference set of Omega_c), evaluated on
    a ``refine``-times finer tensor grid.
    """
    axes = [np.linspace(-L / 2, L / 2, refine * n, endpoint=False)
            for L, n in zip(free.extents, free.points)]
    for (c, d), n in zip(confined.intervals, confined.points):
        w = d - c
        axes.append(np.linspace(-w, w, 2 * refine * n + 1))
    grids_ = np.meshgrid(*axes, indexing="ij")
    d_f = free.dim
    x2 = sum(g**2 for g in grids_[:d_f])
    y2 = sum(g**2 for g in grids_[d_f:])
    r_eps = np.sqrt(x2 + eps**2 * y2)
    r_0 = np.sqrt(x2)
    if profile.is_bounded:
        diff = np.abs(profile.radial(r_eps) - profile.radial(r_0))
        return float(np.max(diff))
    # singular kind: L^1 defect of the core plus sup defect of the tail
    w_eps = profile.radial(r_eps)
    w_0 = profile.radial(r_0)
    core = r_0 < profile.radius
    cell = float(np.prod([a[1] - a[0] for a in axes]))
    finite = np.isfinite(w_eps) & np.isfinite(w_0)
    l1 = float(np.sum(np.abs(w_eps - w_0)[core & finite]) * cell)
    sup = float(np.max(np.abs(w_eps - w_0)[~core & finite]))
    return max(l1, sup)
