"""Discretized geometry for the cylinder Omega = Omega_f x Omega_c.

Free directions live on a padded periodic box and are handled with FFTs;
confined directions carry a hard-wall (Dirichlet) condition and are handled
with a type-I discrete sine transform, so the boundary condition is exact.
Quadrature is uniform-weight, consistent with the transform sampling.

All operations here are pure functions of immutable inputs; grid functions
are value-like and safe to share between threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

__all__ = [
    "FreeDomain",
    "ConfinedDomain",
    "ProductDomain",
    "GridFunction",
    "laplacian_free",
    "laplacian_confined",
    "inner_product",
    "norm",
    "to_spectral",
    "from_spectral",
    "kinetic_multiplier",
    "sobolev_h2_norm",
    "write_mfl1",
    "read_mfl1",
]

POSITION = "position"
SPECTRAL = "spectral"


class DomainMismatchError(ValueError):
    """Raised when an operation combines functions on different grids."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FreeDomain:
    """Periodic surrogate for the unconfined directions.

    Axis ``a`` covers ``[-extent[a]/2, extent[a]/2)`` with ``points[a]``
    equispaced nodes.  Point counts must be powers of two (FFT contract).
    """

    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(L) for L in self.extents))
        object.__setattr__(self, "points", tuple(int(n) for n in self.points))
        if not 1 <= len(self.extents) <= 2:
            raise ValueError("free dimension must be 1 or 2")
        if len(self.points) != len(self.extents):
            raise ValueError("points/extents length mismatch")
        for L, n in zip(self.extents, self.points):
            if L <= 0:
                raise ValueError("extent must be positive")
            if n < 8 or not _is_power_of_two(n):
                raise ValueError("free point count must be a power of two >= 8")

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def axis_nodes(self, a: int) -> np.ndarray:
        L, n = self.extents[a], self.points[a]
        h = L / n
        return -L / 2 + h * np.arange(n)

    def axis_wavenumbers(self, a: int) -> np.ndarray:
        h = self.spacings[a]
        return 2.0 * np.pi * sfft.fftfreq(self.points[a], d=h)

    def meshgrid(self):
        return np.meshgrid(*(self.axis_nodes(a) for a in range(self.dim)), indexing="ij")


@dataclass(frozen=True)
class ConfinedDomain:
    """Hard-wall directions, squeezed by the confinement strength eps.

    Each axis covers the open interval (c, d) with ``points[a]`` interior
    nodes at spacing ``h = (d - c)/(points[a] + 1)``; the wavefunction
    vanishes at c and d by construction of the sine basis.
    """

    intervals: tuple[tuple[float, float], ...]
    points: tuple[int, ...]
    eps: float = 1.0

    def __post_init__(self):
        object.__setattr__(
            self, "intervals", tuple((float(c), float(d)) for c, d in self.intervals)
        )
        object.__setattr__(self, "points", tuple(int(n) for n in self.points))
        object.__setattr__(self, "eps", float(self.eps))
        if not 1 <= len(self.intervals) <= 2:
            raise ValueError("confined dimension must be 1 or 2")
        if len(self.points) != len(self.intervals):
            raise ValueError("points/intervals length mismatch")
        for (c, d), n in zip(self.intervals, self.points):
            if not (c < 0.0 < d):
                raise ValueError("interval must satisfy c < 0 < d")
            if n < 2:
                raise ValueError("need at least 2 interior nodes per confined axis")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(d - c for c, d in self.intervals)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(w / (n + 1) for w, n in zip(self.widths, self.points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def axis_nodes(self, a: int) -> np.ndarray:
        (c, _), h = self.intervals[a], self.spacings[a]
        return c + h * (1 + np.arange(self.points[a]))

    def axis_eigenvalues(self, a: int) -> np.ndarray:
        """Dirichlet Laplacian eigenvalues (m pi / width)^2, sine index m >= 1."""
        w = self.widths[a]
        m = 1 + np.arange(self.points[a])
        return (m * np.pi / w) ** 2

    def meshgrid(self):
        return np.meshgrid(*(self.axis_nodes(a) for a in range(self.dim)), indexing="ij")


@dataclass(frozen=True)
class ProductDomain:
    """Full geometry Omega = Omega_f x Omega_c (free axes first)."""

    free: FreeDomain
    confined: ConfinedDomain

    @property
    def shape(self) -> tuple[int, ...]:
        return self.free.shape + self.confined.shape

    @property
    def cell_volume(self) -> float:
        return self.free.cell_volume * self.confined.cell_volume

    @property
    def eps(self) -> float:
        return self.confined.eps


Domain = FreeDomain | ConfinedDomain | ProductDomain


def _domain_axes(domain):
    """(free axis indices, confined axis indices) of the value array."""
    if isinstance(domain, FreeDomain):
        return tuple(range(domain.dim)), ()
    if isinstance(domain, ConfinedDomain):
        return (), tuple(range(domain.dim))
    return (
        tuple(range(domain.free.dim)),
        tuple(range(domain.free.dim, domain.free.dim + domain.confined.dim)),
    )


@dataclass(frozen=True)
class GridFunction:
    """Complex samples on a domain, tagged position- or spectral-space."""

    domain: Domain
    values: np.ndarray
    space: str = POSITION

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.domain.shape:
            raise ValueError(
                f"value shape {values.shape} does not match grid {self.domain.shape}"
            )
        if self.space not in (POSITION, SPECTRAL):
            raise ValueError("space must be 'position' or 'spectral'")
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, domain: Domain, func) -> "GridFunction":
        """Sample ``func(*coords)`` on the grid.

        For confined axes the function is also evaluated at the walls and
        rejected if it does not vanish there (|f| > 1e-12), since the sine
        representation silently assumes the hard-wall condition.
        """
        free_ax, conf_ax = _domain_axes(domain)
        if isinstance(domain, ProductDomain):
            axes = [domain.free.axis_nodes(a) for a in range(domain.free.dim)]
            axes += [domain.confined.axis_nodes(a) for a in range(domain.confined.dim)]
            confined = domain.confined
        elif isinstance(domain, ConfinedDomain):
            axes = [domain.axis_nodes(a) for a in range(domain.dim)]
            confined = domain
        else:
            axes = [domain.axis_nodes(a) for a in range(domain.dim)]
            confined = None
        grids = np.meshgrid(*axes, indexing="ij")
        values = np.asarray(func(*grids), dtype=np.complex128)

        if confined is not None:
            for local_a, axis in enumerate(conf_ax):
                for wall in confined.intervals[local_a]:
                    probe = [g.copy() for g in grids]
                    probe[axis] = np.full_like(probe[axis], wall)
                    boundary = np.asarray(func(*probe), dtype=np.complex128)
                    if np.max(np.abs(boundary)) > 1e-12:
                        raise ValueError(
                            "sampled function does not vanish on the hard wall "
                            f"(confined axis {local_a}, wall {wall})"
                        )
        return cls(domain, values)

    def copy_with(self, values, space=None) -> "GridFunction":
        return GridFunction(self.domain, values, self.space if space is None else space)


def _require_same(f: GridFunction, g: GridFunction):
    if f.domain != g.domain:
        raise DomainMismatchError("grid functions live on different domains")
    if f.space != g.space:
        raise DomainMismatchError("grid functions live in different spaces")


# -- unitary transforms ------------------------------------------------------
#
# Spectral coefficients are scaled so that the plain euclidean norm of the
# coefficient array equals the L^2(Omega) norm of the sampled function
# (uniform-weight quadrature); Parseval then holds to roundoff.


def _free_scale(domain: FreeDomain, a: int) -> float:
    return np.sqrt(domain.spacings[a] / domain.points[a])


def _conf_scale(domain: ConfinedDomain, a: int) -> float:
    n = domain.points[a]
    return np.sqrt(domain.spacings[a] / (2.0 * (n + 1)))


def to_spectral(f: GridFunction) -> GridFunction:
    if f.space == SPECTRAL:
        return f
    d = f.domain
    free_ax, conf_ax = _domain_axes(d)
    free = d if isinstance(d, FreeDomain) else getattr(d, "free", None)
    conf = d if isinstance(d, ConfinedDomain) else getattr(d, "confined", None)
    scale = 1.0
    v = f.values
    if free_ax:
        v = sfft.fftn(v, axes=free_ax)
        scale *= float(np.prod([_free_scale(free, la) for la in range(len(free_ax))]))
    for local_a, axis in enumerate(conf_ax):
        v = sfft.dst(v, type=1, axis=axis)
        scale *= _conf_scale(conf, local_a)
    return f.copy_with(v * scale, space=SPECTRAL)


def from_spectral(f: GridFunction) -> GridFunction:
    if f.space == POSITION:
        return f
    d = f.domain
    free_ax, conf_ax = _domain_axes(d)
    free = d if isinstance(d, FreeDomain) else getattr(d, "free", None)
    conf = d if isinstance(d, ConfinedDomain) else getattr(d, "confined", None)
    scale = 1.0
    v = f.values
    if free_ax:
        v = sfft.ifftn(v, axes=free_ax)
        scale /= float(np.prod([_free_scale(free, la) for la in range(len(free_ax))]))
    for local_a, axis in enumerate(conf_ax):
        v = sfft.idst(v, type=1, axis=axis)
        scale /= _conf_scale(conf, local_a)
    return f.copy_with(v * scale, space=POSITION)


def kinetic_multiplier(domain: Domain, eps: float | None = None) -> np.ndarray:
    """Multiplier of -Delta_x - eps^-2 Delta_y on the spectral grid.

    With ``eps=None`` the confined weight is taken from the domain; pass
    ``eps=1.0`` for the plain (unweighted) Laplacian multiplier.
    """
    free_ax, conf_ax = _domain_axes(domain)
    free = domain if isinstance(domain, FreeDomain) else getattr(domain, "free", None)
    conf = domain if isinstance(domain, ConfinedDomain) else getattr(domain, "confined", None)
    if eps is None:
        eps = conf.eps if conf is not None else 1.0
    total = np.zeros(domain.shape)
    for local_a, axis in enumerate(free_ax):
        k2 = free.axis_wavenumbers(local_a) ** 2
        shape = [1] * len(domain.shape)
        shape[axis] = len(k2)
        total = total + k2.reshape(shape)
    for local_a, axis in enumerate(conf_ax):
        lam = conf.axis_eigenvalues(local_a) / eps**2
        shape = [1] * len(domain.shape)
        shape[axis] = len(lam)
        total = total + lam.reshape(shape)
    return total


def _apply_multiplier(f: GridFunction, mult: np.ndarray) -> GridFunction:
    spec = to_spectral(f)
    out = spec.copy_with(spec.values * mult)
    return out if f.space == SPECTRAL else from_spectral(out)


def laplacian_free(f: GridFunction) -> GridFunction:
    """-Delta on the periodic free directions, exact for band-limited input."""
    if not isinstance(f.domain, FreeDomain):
        raise DomainMismatchError("laplacian_free expects a FreeDomain function")
    return _apply_multiplier(f, kinetic_multiplier(f.domain))


def laplacian_confined(f: GridFunction, eps: float | None = None) -> GridFunction:
    """-eps^-2 Delta with Dirichlet walls, via the sine-series multiplier."""
    if not isinstance(f.domain, ConfinedDomain):
        raise DomainMismatchError("laplacian_confined expects a ConfinedDomain function")
    return _apply_multiplier(f, kinetic_multiplier(f.domain, eps=eps))


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    """L^2 scalar product, conjugate-linear in the first slot."""
    _require_same(f, g)
    s = np.vdot(f.values, g.values)
    if f.space == POSITION:
        s *= f.domain.cell_volume
    return complex(s)


def norm(f: GridFunction) -> float:
    return float(np.sqrt(inner_product(f, f).real))


def sobolev_h2_norm(f: GridFunction) -> float:
    """||f||_{H^2} via the multiplier (1 + |k|^2); geometric, no eps weight."""
    spec = to_spectral(f)
    mult = 1.0 + kinetic_multiplier(f.domain, eps=1.0)
    return float(np.linalg.norm(spec.values * mult))


# -- MFL1 binary container ---------------------------------------------------
#
# Layout (little endian):
#   magic "MFL1"
#   u32 space (0 position, 1 spectral)
#   u32 kind  (0 free, 1 confined, 2 product)
#   u32 d_f, u32 d_c, u32 n_particles
#   u32 point count per free axis, then per confined axis
#   f64 eps
#   f64 extent per free axis; f64 pair (c, d) per confined axis
#   data: complex samples as interleaved f64 (re, im), row-major, with the
#   per-particle axis blocks repeated n_particles times.

_MAGIC = b"MFL1"
_KINDS = {"free": 0, "confined": 1, "product": 2}


def _domain_kind(domain) -> int:
    if isinstance(domain, FreeDomain):
        return _KINDS["free"]
    if isinstance(domain, ConfinedDomain):
        return _KINDS["confined"]
    return _KINDS["product"]


def write_mfl1(path, domain: Domain, values: np.ndarray, space: str = POSITION,
               n_particles: int = 1):
    """Serialize samples over ``domain ** n_particles`` to the MFL1 container."""
    values = np.ascontiguousarray(values, dtype=np.complex128)
    free = domain if isinstance(domain, FreeDomain) else getattr(domain, "free", None)
    conf = domain if isinstance(domain, ConfinedDomain) else getattr(domain, "confined", None)
    d_f = free.dim if free is not None else 0
    d_c = conf.dim if conf is not None else 0
    if values.shape != domain.shape * n_particles:
        raise ValueError("value shape does not match domain ** n_particles")
    head = [_MAGIC]
    head.append(struct.pack("<5I", 0 if space == POSITION else 1,
                            _domain_kind(domain), d_f, d_c, n_particles))
    counts = (free.points if free is not None else ()) + (conf.points if conf is not None else ())
    head.append(struct.pack(f"<{len(counts)}I", *counts))
    head.append(struct.pack("<d", conf.eps if conf is not None else 1.0))
    geom = list(free.extents) if free is not None else []
    if conf is not None:
        for c, d in conf.intervals:
            geom += [c, d]
    head.append(struct.pack(f"<{len(geom)}d", *geom))
    payload = values.astype("<c16").tobytes(order="C")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(head))
        fh.write(payload)
    import os

    os.replace(tmp, path)


def read_mfl1(path):
    """Read an MFL1 container; returns (domain, values, space, n_particles)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError("not an MFL1 container")
    off = 4
    space_flag, kind, d_f, d_c, n_particles = struct.unpack_from("<5I", raw, off)
    off += 20
    counts = struct.unpack_from(f"<{d_f + d_c}I", raw, off)
    off += 4 * (d_f + d_c)
    (eps,) = struct.unpack_from("<d", raw, off)
    off += 8
    geom = struct.unpack_from(f"<{d_f + 2 * d_c}d", raw, off)
    off += 8 * (d_f + 2 * d_c)
    free = FreeDomain(tuple(geom[:d_f]), tuple(counts[:d_f])) if d_f else None
    conf = None
    if d_c:
        intervals = tuple(
            (geom[d_f + 2 * a], geom[d_f + 2 * a + 1]) for a in range(d_c)
        )
        conf = ConfinedDomain(intervals, tuple(counts[d_f:]), eps=eps)
    if kind == _KINDS["free"]:
        domain: Domain = free
    elif kind == _KINDS["confined"]:
        domain = conf
    else:
        domain = ProductDomain(free, conf)
    values = np.frombuffer(raw[off:], dtype="<c16").astype(np.complex128)
    values = values.reshape(domain.shape * n_particles)
    space = POSITION if space_flag == 0 else SPECTRAL
    return domain, values, space, n_particles
