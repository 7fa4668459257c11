"""Sectorized DFT beam codebooks and the coarse-to-fine beam hierarchy.

A codebook quantizes one 120-degree sector into an X1 x X2 angular grid:

    theta_k = theta_min + (120 / X1) * k      k = 0..X1-1   (azimuth)
    phi_l   = -90 + (180 / X2) * l            l = 0..X2-1   (elevation)

Each grid point gets the beamforming matrix with generators
a = exp(j*pi*sin(theta)) and b = exp(-j*pi*cos(theta)*cos(phi)); entry
(r, c) of the m x n matrix is a**(m-1-r) * b**c.  The matrix is unfolded
row-major into a length-M vector aligned with the geometry module's
Kronecker flattening (columns follow the fastest non-singleton axis) and
normalized to unit l2 norm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import UpaGeometry

SECTOR_THETA_MIN = {1: -30.0, 2: 90.0, 3: 210.0}
SECTOR_SPAN_DEG = 120.0
ELEVATION_MIN = -90.0
ELEVATION_SPAN_DEG = 180.0


@dataclass(frozen=True)
class BeamEntry:
    index: int
    grid_azimuth: float
    grid_elevation: float
    vector: np.ndarray


@dataclass(frozen=True)
class Codebook:
    sector_id: int
    resolution: tuple
    theta_min: float
    beams: tuple

    def __post_init__(self):
        x1, x2 = self.resolution
        if len(self.beams) != x1 * x2:
            raise ValueError(f"expected {x1 * x2} beams, got {len(self.beams)}")

    @property
    def beam_count(self) -> int:
        return len(self.beams)

    @property
    def matrix(self) -> np.ndarray:
        """All beam vectors stacked, shape (beam_count, M)."""
        return np.stack([b.vector for b in self.beams])


def angle_grid(x1: int, x2: int, theta_min: float):
    """Row-major (theta, phi) pairs over the sector grid."""
    if x1 < 1 or x2 < 1:
        raise ValueError("grid resolution must be >= 1 per axis")
    pairs = []
    for k in range(x1):
        theta = theta_min + SECTOR_SPAN_DEG / x1 * k
        for l in range(x2):
            phi = ELEVATION_MIN + ELEVATION_SPAN_DEG / x2 * l
            pairs.append((theta, phi))
    return pairs


def bf_matrix(theta_deg: float, phi_deg: float, m: int, n: int) -> np.ndarray:
    """Unnormalized m x n beamforming matrix for one grid direction."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    theta = math.radians(theta_deg)
    phi = math.radians(phi_deg)
    a = np.exp(1j * math.pi * math.sin(theta))
    b = np.exp(-1j * math.pi * math.cos(theta) * math.cos(phi))
    row_powers = a ** (m - 1 - np.arange(m))
    col_powers = b ** np.arange(n)
    return np.outer(row_powers, col_powers)


def _planar_dims(geom: UpaGeometry):
    """(rows, cols) of the 2-D unfolding; cols follow the fastest non-unit axis."""
    counts = [geom.m_x, geom.m_y, geom.m_z]
    non_unit = [c for c in counts if c > 1]
    if len(non_unit) > 2:
        raise DataError(f"geometry {counts} has three non-unit axes; no 2-D unfolding")
    if len(non_unit) == 2:
        return non_unit[1], non_unit[0]
    if len(non_unit) == 1:
        return 1, non_unit[0]
    return 1, 1


def build_codebook(sector_id: int, resolution, geom: UpaGeometry) -> Codebook:
    """DFT codebook for one sector at resolution (X1, X2)."""
    if sector_id not in SECTOR_THETA_MIN:
        raise ValueError(f"sector_id must be one of {sorted(SECTOR_THETA_MIN)}, got {sector_id}")
    x1, x2 = resolution
    theta_min = SECTOR_THETA_MIN[sector_id]
    m, n = _planar_dims(geom)
    beams = []
    for index, (theta, phi) in enumerate(angle_grid(x1, x2, theta_min)):
        vec = bf_matrix(theta, phi, m, n).reshape(-1)
        vec = vec / np.linalg.norm(vec)
        beams.append(BeamEntry(index=index, grid_azimuth=theta, grid_elevation=phi, vector=vec))
    return Codebook(sector_id=sector_id, resolution=(x1, x2), theta_min=theta_min, beams=tuple(beams))


def parent_child_map(coarse: Codebook, fine: Codebook):
    """Map each coarse beam index to the fine beams inside its angular cell.

    Cells are half-open along both axes, so the mapping is a partition of
    the fine codebook.  Uses exact integer arithmetic: the fine grid point
    k' of an X1'-grid falls in coarse cell floor(k' * X1 / X1').
    """
    if coarse.sector_id != fine.sector_id:
        raise DataError("parent/child codebooks must share a sector")
    cx1, cx2 = coarse.resolution
    fx1, fx2 = fine.resolution
    if fx1 < cx1 or fx2 < cx2:
        raise DataError("fine resolution must be >= coarse resolution per axis")
    children = {i: [] for i in range(coarse.beam_count)}
    for kf in range(fx1):
        kc = kf * cx1 // fx1
        for lf in range(fx2):
            lc = lf * cx2 // fx2
            children[kc * cx2 + lc].append(kf * fx2 + lf)
    return children


def save_codebook(cb: Codebook, path) -> None:
    """JSON export with interleaved re/im float64 vector entries."""
    payload = {
        "sector": cb.sector_id,
        "resolution": list(cb.resolution),
        "theta_min": cb.theta_min,
        "beams": [
            {
                "index": b.index,
                "theta": b.grid_azimuth,
                "phi": b.grid_elevation,
                "vector": [x for c in b.vector for x in (c.real, c.imag)],
            }
            for b in cb.beams
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_codebook(path) -> Codebook:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    beams = []
    for rec in payload["beams"]:
        flat = np.asarray(rec["vector"], dtype=np.float64)
        beams.append(
            BeamEntry(
                index=int(rec["index"]),
                grid_azimuth=float(rec["theta"]),
                grid_elevation=float(rec["phi"]),
                vector=flat[0::2] + 1j * flat[1::2],
            )
        )
    return Codebook(
        sector_id=int(payload["sector"]),
        resolution=tuple(payload["resolution"]),
        theta_min=float(payload["theta_min"]),
        beams=tuple(beams),
    )
