"""Uniform planar array geometry and steering-vector algebra.

Angle conventions (shared by the whole package, documented once here):

* Angles cross API boundaries in degrees and are converted to radians
  exactly once, inside this module.
* ``azimuth`` is the horizontal bearing measured from the +x axis,
  normalized into [-180, 180).
* ``elevation`` is measured from the array boresight (+z) axis direction
  cosine convention: the per-axis direction cosines used in the phase
  progressions are

      g_x = sin(el) * cos(az),   g_y = sin(el) * sin(az),   g_z = cos(el),

  with elevation restricted to [-90, 90].  Ray generators produce
  elevations relative to the downtilted broadside (see
  ``scenario.departure_angles``), which always land inside this range for
  ground-level UEs.
* Kronecker ordering of the full array response is fixed as z (x) y (x) x;
  the flattened element index is therefore
  ``(n_z * m_y + n_y) * m_x + n_x`` with x the fastest axis.  Codebook
  unfolding (``codebook.build_codebook``) follows the same ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AnglePair:
    """Departure direction in degrees: azimuth in [-180, 180), elevation in [-90, 90]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = ((float(self.azimuth) + 180.0) % 360.0) - 180.0
        object.__setattr__(self, "azimuth", az)
        el = float(self.elevation)
        if not -90.0 <= el <= 90.0:
            raise ValueError(f"elevation {el} outside [-90, 90]")
        object.__setattr__(self, "elevation", el)


@dataclass(frozen=True)
class UpaGeometry:
    """Element counts per axis plus spacing in wavelengths (carrier-free)."""

    m_x: int
    m_y: int
    m_z: int = 1
    spacing: float = 0.5

    def __post_init__(self):
        for name in ("m_x", "m_y", "m_z"):
            n = getattr(self, name)
            if not (isinstance(n, (int, np.integer)) and n >= 1):
                raise ValueError(f"{name} must be a positive integer, got {n!r}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")

    @property
    def num_elements(self) -> int:
        return self.m_x * self.m_y * self.m_z


def _direction_cosine(angles: AnglePair, axis: str) -> float:
    az = math.radians(angles.azimuth)
    el = math.radians(angles.elevation)
    if axis == "x":
        return math.sin(el) * math.cos(az)
    if axis == "y":
        return math.sin(el) * math.sin(az)
    if axis == "z":
        return math.cos(el)
    raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")


def steering_axis(angles: AnglePair, count: int, axis: str, spacing: float = 0.5) -> np.ndarray:
    """1-D steering vector along one array axis.

    Element n carries phase 2*pi*spacing*n*g(angles) where g is the
    direction cosine of the chosen axis; element 0 is always 1+0j.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    g = _direction_cosine(angles, axis)
    phases = 2.0 * math.pi * spacing * g * np.arange(count)
    return np.exp(1j * phases)


def array_response(angles: AnglePair, geom: UpaGeometry) -> np.ndarray:
    """Full UPA response a_z (x) a_y (x) a_x, length geom.num_elements."""
    a_x = steering_axis(angles, geom.m_x, "x", geom.spacing)
    a_y = steering_axis(angles, geom.m_y, "y", geom.spacing)
    a_z = steering_axis(angles, geom.m_z, "z", geom.spacing)
    return np.kron(np.kron(a_z, a_y), a_x)
