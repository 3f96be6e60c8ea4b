"""Atomic-site generation around a substitutional impurity, plus isotope sampling.

Supported crystals are wurtzite ZnO (impurity on a Zn site) and diamond-cubic
Si.  Sites are generated deterministically out to a cutoff radius with the
impurity at the origin; the impurity site itself is excluded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .constants import DEFAULT_LATTICE, LatticeSpec, MaterialParams

# Refuse to build environments whose site count would exceed this bound.
MAX_SITES = 5_000_000


class CutoffTooLarge(ValueError):
    """Requested cutoff would generate more sites than the memory bound."""


class EnvironmentMismatch(ValueError):
    """An isotope assignment was paired with a different environment."""


@dataclass
class LatticeEnvironment:
    """Atomic sites within ``cutoff`` of the impurity (which sits at the origin).

    Arrays are parallel: ``elements[i]`` occupies ``positions[i]`` at radial
    ``distances[i]``.  Sites are ordered by element (registry order), then by
    distance, then lexicographically by position, so the layout is a stable
    contract for seeded sampling.
    """

    crystal: str
    cutoff: float  # nm
    elements: np.ndarray   # (N,) unicode
    positions: np.ndarray  # (N, 3) nm
    distances: np.ndarray  # (N,) nm
    spec: LatticeSpec = field(repr=False, default=None)

    @property
    def n_sites(self) -> int:
        return len(self.distances)

    def element_slices(self) -> dict:
        """Map element -> index array of its sites (contiguous by construction)."""
        out = {}
        for elem in dict.fromkeys(self.elements.tolist()):
            out[elem] = np.flatnonzero(self.elements == elem)
        return out


@dataclass(frozen=True)
class IsotopeAssignment:
    """One sampled isotope mass per site, parallel to ``env`` arrays."""

    masses: np.ndarray  # (N,) amu
    seed: int
    env: LatticeEnvironment


def _site_density(spec: LatticeSpec) -> float:
    """Atoms per nm^3 for the crystal."""
    if spec.crystal == "wurtzite":
        v_cell = spec.a**2 * spec.c * np.sqrt(3.0) / 2.0
        return 4.0 / v_cell
    if spec.crystal == "diamond":
        return 8.0 / spec.a**3
    raise ValueError(f"unknown crystal {spec.crystal!r}")


def cell_volume(spec: LatticeSpec) -> float:
    """Unit-cell volume in nm^3."""
    if spec.crystal == "wurtzite":
        return spec.a**2 * spec.c * np.sqrt(3.0) / 2.0
    return spec.a**3


def _order_sites(elements, positions, distances, element_order):
    """Stable site ordering: element, then distance, then position."""
    parts = []
    for elem in element_order:
        m = elements == elem
        pos, dist = positions[m], distances[m]
        order = np.lexsort((pos[:, 2], pos[:, 1], pos[:, 0], dist))
        parts.append((np.full(m.sum(), elem, dtype=elements.dtype),
                      pos[order], dist[order]))
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]))


def _wurtzite_sites(spec: LatticeSpec, cutoff: float):
    a, c, u = spec.a, spec.c, spec.u
    a1 = np.array([a, 0.0, 0.0])
    a2 = np.array([-a / 2.0, a * np.sqrt(3.0) / 2.0, 0.0])
    a3 = np.array([0.0, 0.0, c])
    basis = [("Zn", np.array([1 / 3, 2 / 3, 0.0])),
             ("Zn", np.array([2 / 3, 1 / 3, 0.5])),
             ("O", np.array([1 / 3, 2 / 3, u])),
             ("O", np.array([2 / 3, 1 / 3, 0.5 + u]))]
    n12 = int(np.ceil(cutoff / (a * np.sqrt(3.0) / 2.0))) + 2
    n3 = int(np.ceil(cutoff / c)) + 2
    i1, i2, i3 = np.meshgrid(np.arange(-n12, n12 + 1),
                             np.arange(-n12, n12 + 1),
                             np.arange(-n3, n3 + 1), indexing="ij")
    cells = (i1[..., None] * a1 + i2[..., None] * a2
             + i3[..., None] * a3).reshape(-1, 3)
    origin = a1 / 3.0 + 2.0 * a2 / 3.0  # cartesian position of the first Zn
    elems, pos_parts, dist_parts = [], [], []
    for elem, frac in basis:
        pos = cells + frac[0] * a1 + frac[1] * a2 + frac[2] * a3 - origin
        d = np.linalg.norm(pos, axis=1)
        keep = (d <= cutoff) & (d > 1e-9)
        elems.append(np.full(keep.sum(), elem, dtype="<U2"))
        pos_parts.append(pos[keep])
        dist_parts.append(d[keep])
    return (np.concatenate(elems), np.concatenate(pos_parts),
            np.concatenate(dist_parts))


def _diamond_sites(spec: LatticeSpec, cutoff: float):
    a = spec.a
    fcc = np.array([[0, 0, 0], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
    basis = np.concatenate([fcc, fcc + 0.25])
    n = int(np.ceil(cutoff / a)) + 2
    i1, i2, i3 = np.meshgrid(*[np.arange(-n, n + 1)] * 3, indexing="ij")
    cells = np.stack([i1, i2, i3], axis=-1).reshape(-1, 3) * a
    pos = (cells[:, None, :] + basis[None, :, :] * a).reshape(-1, 3)
    d = np.linalg.norm(pos, axis=1)
    keep = (d <= cutoff) & (d > 1e-9)
    return (np.full(keep.sum(), "Si", dtype="<U2"), pos[keep], d[keep])


def generate_sites(crystal: str, cutoff: float = None,
                   spec: LatticeSpec = None) -> LatticeEnvironment:
    """Generate all atomic sites within ``cutoff`` nm of the impurity.

    Parameters
    ----------
    crystal : str
        "ZnO" or "Si".
    cutoff : float, optional
        Radius in nm; defaults to the registry value for the crystal.
    spec : LatticeSpec, optional
        Override of lattice constants (tests, sensitivity studies).

    Returns
    -------
    LatticeEnvironment
        Sites ordered by (element, distance, position); the impurity site
        at the origin is excluded.
    """
    if spec is None:
        try:
            spec = DEFAULT_LATTICE[crystal]
        except KeyError:
            raise ValueError(f"unknown crystal {crystal!r}") from None
    if cutoff is None:
        cutoff = spec.default_cutoff
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    est = _site_density(spec) * 4.0 / 3.0 * np.pi * cutoff**3
    if est > MAX_SITES:
        raise CutoffTooLarge(
            f"cutoff {cutoff} nm implies ~{est:.2e} sites (bound {MAX_SITES})"
        )
    if spec.crystal == "wurtzite":
        elements, positions, distances = _wurtzite_sites(spec, cutoff)
    else:
        elements, positions, distances = _diamond_sites(spec, cutoff)
    elements, positions, distances = _order_sites(
        elements, positions, distances, spec.elements)
    return LatticeEnvironment(crystal=crystal, cutoff=float(cutoff),
                              elements=elements, positions=positions,
                              distances=distances, spec=spec)


def draw_masses(env: LatticeEnvironment, params: MaterialParams,
                rng: np.random.Generator) -> np.ndarray:
    """Draw one isotope mass per site from natural abundances.

    Consumes exactly one uniform per site, in site order, so the draw is a
    pure function of the generator state and the environment layout.
    """
    masses = np.empty(env.n_sites)
    u = rng.random(env.n_sites)
    for elem, idx in env.element_slices().items():
        table = params.isotope_table[elem]
        mass_values = np.array([e.mass for e in table])
        cum = np.cumsum([e.abundance for e in table])
        choice = np.searchsorted(cum, u[idx])
        # guard the pathological u == sum(abundances) edge draw
        np.clip(choice, 0, len(table) - 1, out=choice)
        masses[idx] = mass_values[choice]
    return masses


def sample_isotopes(env: LatticeEnvironment, params: MaterialParams,
                    seed: int) -> IsotopeAssignment:
    """Sample an isotope assignment for every site, deterministic under seed."""
    for elem in env.element_slices():
        if elem not in params.isotope_table:
            raise ValueError(f"no abundance table for element {elem!r}")
    rng = np.random.default_rng(seed)
    return IsotopeAssignment(masses=draw_masses(env, params, rng),
                             seed=seed, env=env)


def export_sites(env: LatticeEnvironment, path) -> None:
    """Write the site list as CSV for debugging/plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        fh.write(f"# crystal={env.crystal} cutoff(nm)={env.cutoff}\n")
        writer.writerow(["element", "x (nm)", "y (nm)", "z (nm)", "distance (nm)"])
        for i in range(env.n_sites):
            x, y, z = env.positions[i]
            writer.writerow([env.elements[i], f"{x:.6f}", f"{y:.6f}",
                             f"{z:.6f}", f"{env.distances[i]:.6f}"])


def lattice_spec(crystal: str) -> LatticeSpec:
    """Registry lattice constants for a crystal."""
    try:
        return DEFAULT_LATTICE[crystal]
    except KeyError:
        raise ValueError(f"unknown crystal {crystal!r}") from None
