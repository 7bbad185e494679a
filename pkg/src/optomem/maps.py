"""Coupling-coefficient maps over the membrane-placement plane.

Grid scans of the expansion coefficients, classification of the regions
where higher-order coupling is non-negligible, and membrane-thickness
sweeps of the average width of those regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gridio
from .model import DomainError, coupling_fields
from .params import PhysicalParams

#: ratio threshold above which quadratic/cross coupling matters for a
#: mechanical amplitude of 10^6.5 zero-point units and a 10% force correction
DEFAULT_AMPLITUDE_SCALE = 10.0 ** 6.5
DEFAULT_FRACTION = 0.1


@dataclass(frozen=True)
class GridSpec:
    """Square scan window in units of the optical wavelength."""

    q1_range: tuple[float, float] = (0.25, 0.75)
    q2_range: tuple[float, float] = (0.25, 0.75)
    resolution: int = 256
    cell_centered: bool = True

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("grid resolution must be at least 16 per axis")

    def axis(self, which: int) -> np.ndarray:
        lo, hi = self.q1_range if which == 1 else self.q2_range
        n = self.resolution
        if self.cell_centered:
            step = (hi - lo) / n
            return lo + step * (np.arange(n) + 0.5)
        return np.linspace(lo, hi, n)

    @property
    def cell_size(self) -> float:
        lo, hi = self.q1_range
        return (hi - lo) / self.resolution


@dataclass
class CouplingMap:
    """Per-cell expansion coefficients on a placement grid.

    Arrays are indexed [i, j] for (Q1_i, Q2_j); cells where the model
    raised a DomainError hold NaN and are counted in `holes`.
    """

    grid: GridSpec
    delta_omega0: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    gt: np.ndarray
    params_hash: str
    holes: int = 0

    def ratio(self, name: str) -> np.ndarray:
        """|g12/g1|, |g22/g2|, |gt/g1| or |gt/g2| with NaN at zero couplings."""
        num = {"g12/g1": self.g12, "g22/g2": self.g22,
               "gt/g1": self.gt, "gt/g2": self.gt}[name]
        den = self.g2 if name.endswith("g2") else self.g1
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(num / den)


def scan_plane(params: PhysicalParams, grid: GridSpec | None = None,
               h_q: float = 1e-3) -> CouplingMap:
    """Evaluate the second-order expansion on every grid cell.

    Deterministic for fixed params and grid; evaluation is vectorized and
    independent per cell.
    """
    grid = grid or GridSpec()
    lam = params.wavelength
    Q1, Q2 = np.meshgrid(grid.axis(1) * lam, grid.axis(2) * lam, indexing="ij")
    try:
        dw0, g1, g2, g12, g22, gt = coupling_fields(params, Q1, Q2, h_q)
        holes = 0
    except DomainError:
        # fall back to per-cell evaluation, recording failing cells as holes
        shape = Q1.shape
        dw0, g1, g2 = (np.full(shape, np.nan) for _ in range(3))
        g12, g22, gt = (np.full(shape, np.nan) for _ in range(3))
        holes = 0
        for idx in np.ndindex(shape):
            try:
                vals = coupling_fields(params, Q1[idx], Q2[idx], h_q)
            except DomainError:
                holes += 1
                continue
            dw0[idx], g1[idx], g2[idx], g12[idx], g22[idx], gt[idx] = (
                float(v) for v in vals)
    return CouplingMap(grid=grid, delta_omega0=np.asarray(dw0),
                       g1=np.asarray(g1), g2=np.asarray(g2),
                       g12=np.asarray(g12), g22=np.asarray(g22),
                       gt=np.asarray(gt),
                       params_hash=gridio.params_digest(params), holes=holes)


CRITERIA = ("g12/g1", "g22/g2", "gt/g1", "gt/g2")


@dataclass
class RegionMask:
    """Boolean grids marking where each coupling-ratio criterion exceeds
    the threshold, plus hole-corrected area fractions."""

    grid: GridSpec
    threshold: float
    masks: dict[str, np.ndarray]
    union: np.ndarray
    fractions: dict[str, float]
    union_fraction: float
    holes: int


def classify_regions(cmap: CouplingMap,
                     amplitude_scale: float = DEFAULT_AMPLITUDE_SCALE,
                     fraction: float = DEFAULT_FRACTION) -> RegionMask:
    """Mark cells where any second-order coupling ratio exceeds
    ``fraction / amplitude_scale``.

    `amplitude_scale` is the assumed dimensionless mechanical amplitude,
    `fraction` the tolerated relative force correction.
    """
    if amplitude_scale <= 0.0:
        raise ValueError("amplitude_scale must be positive")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    threshold = fraction / amplitude_scale
    valid = np.isfinite(cmap.g1) & np.isfinite(cmap.g2)
    n_valid = int(valid.sum())
    masks = {}
    fractions = {}
    union = np.zeros_like(valid)
    for name in CRITERIA:
        ratio = cmap.ratio(name)
        mask = valid & (ratio > threshold)
        masks[name] = mask
        fractions[name] = mask.sum() / n_valid if n_valid else 0.0
        union |= mask
    return RegionMask(grid=cmap.grid, threshold=threshold, masks=masks,
                      union=union, fractions=fractions,
                      union_fraction=union.sum() / n_valid if n_valid else 0.0,
                      holes=int((~valid).sum()))


def average_stripe_width(mask: np.ndarray, cell_size: float) -> float:
    """Length-weighted average width 2*A/P of a stripe-shaped mask.

    A is the masked area and P the masked-boundary length, both measured
    with periodic wrap-around (the scan window is one full period), so
    stripes crossing the window edge contribute no spurious boundary.
    For a straight stripe of width w this returns exactly w.
    """
    area = mask.sum() * cell_size**2
    if area == 0.0:
        return 0.0
    edges = 0
    for axis in (0, 1):
        edges += int((mask != np.roll(mask, 1, axis=axis)).sum())
    perimeter = edges * cell_size
    return 2.0 * area / perimeter if perimeter else math.sqrt(area)


def region_width_sweep(params: PhysicalParams, Lz_values,
                       grid: GridSpec | None = None,
                       amplitude_scale: float = DEFAULT_AMPLITUDE_SCALE,
                       fraction: float = DEFAULT_FRACTION) -> list[dict]:
    """Average width of the high-order-coupling region vs membrane thickness.

    For each thickness the reflectivity, masses and zero-point amplitudes
    are recomputed and the |g_j2/g_j| criteria re-evaluated; the returned
    width is in wavelength units (see average_stripe_width).
    """
    results = []
    for Lz in Lz_values:
        if Lz <= 0.0:
            raise ValueError("membrane thickness must be positive")
        pz = params.with_(Lz=Lz)
        cmap = scan_plane(pz, grid)
        regions = classify_regions(cmap, amplitude_scale, fraction)
        quad_mask = regions.masks["g12/g1"] | regions.masks["g22/g2"]
        width = average_stripe_width(quad_mask, cmap.grid.cell_size)
        R, phi = pz.reflectivity()
        results.append({"Lz": Lz, "R": R, "phi": phi, "width": width,
                        "union_fraction": regions.union_fraction})
    return results


def write_map(path, cmap: CouplingMap, regions: RegionMask | None = None) -> None:
    """Emit a coupling map (and optional masks) in the shared table format."""
    grid = cmap.grid
    Q1, Q2 = np.meshgrid(grid.axis(1), grid.axis(2), indexing="ij")
    columns = ["Q1_over_lambda", "Q2_over_lambda", "delta_omega0",
               "g1", "g2", "g12", "g22", "gt"]
    blocks = [Q1, Q2, cmap.delta_omega0, cmap.g1, cmap.g2,
              cmap.g12, cmap.g22, cmap.gt]
    if regions is not None:
        for name in CRITERIA:
            columns.append("mask_" + name.replace("/", "_over_"))
            blocks.append(regions.masks[name].astype(float))
        columns.append("mask_union")
        blocks.append(regions.union.astype(float))
    data = np.column_stack([b.ravel() for b in blocks])
    header = {
        "params_hash": cmap.params_hash,
        "grid": f"{grid.q1_range}x{grid.q2_range}@{grid.resolution}",
        "holes": cmap.holes,
    }
    if regions is not None:
        header["threshold"] = regions.threshold
        header["union_fraction"] = regions.union_fraction
    gridio.write_table(path, header, columns, data)
