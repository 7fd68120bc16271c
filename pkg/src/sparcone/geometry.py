"""Truncated-cone geometry for plank-based conformal arrays.

Lengths are expressed in wavelengths at the design frequency unless a
function takes an explicit ``wavelength`` argument or a ``_m`` suffix says
meters.  Angles cross the API in degrees; radians are internal only.

The cone axis is z.  Planks lie along the slant, base elements on the major
circle of radius ``R`` in the z = 0 plane; an element at along-plank offset
``l`` sits at cylindrical radius ``R - l*cos(theta_s)`` and height
``l*sin(theta_s)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
SPEED_OF_LIGHT = 299_792_458.0


def wrap_phase(phase):
    """Wrap phase values to the interval [-pi, pi)."""
    wrapped = (np.asarray(phase, dtype=float) + np.pi) % TWO_PI - np.pi
    return float(wrapped) if np.ndim(phase) == 0 else wrapped


def direction_vector(theta_deg, phi_deg):
    """Unit propagation vector(s) for polar angle theta, azimuth phi.

    Broadcasts over both angle arguments; the result has shape
    ``broadcast_shape + (3,)``.
    """
    theta = np.radians(np.asarray(theta_deg, dtype=float))
    phi = np.radians(np.asarray(phi_deg, dtype=float))
    theta, phi = np.broadcast_arrays(theta, phi)
    return np.stack(
        (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)),
        axis=-1,
    )


def cone_radii(n_planks, d_c, plank_length, theta_s_deg):
    """Minor and major base radii of the plank-carrying cone.

    The minor-base circumference carries ``n_planks`` planks at arc spacing
    ``d_c``, hence ``r = n_planks * d_c / (2 pi)``; the major radius follows
    from the slant, ``R = r + plank_length * cos(theta_s)``.

    Returns
    -------
    (r, R) : tuple of float
        Minor and major base radii, wavelengths.
    """
    if n_planks <= 0 or d_c <= 0:
        raise ValueError("n_planks and d_c must be positive")
    if plank_length < 0:
        raise ValueError("plank_length must be non-negative")
    if not 0.0 < theta_s_deg < 90.0:
        raise ValueError("theta_s_deg must lie in (0, 90)")
    r = n_planks * d_c / TWO_PI
    return r, r + plank_length * math.cos(math.radians(theta_s_deg))


@dataclass(frozen=True)
class ConeGeometry:
    """Truncated-cone parameters and the plank placement grid.

    Parameters
    ----------
    theta_s_deg : float
        Cone slant angle from the z-axis, degrees, in (0, 90).
    n_planks : int
        Number of identical planks closing the full azimuth (>= 3).
    d_c : float
        Inter-plank arc spacing along the minor base, wavelengths.
    plank_length : float
        Along-plank aperture length l, wavelengths.
    minor_radius : float, optional
        Override for the derived minor radius ``r`` (used to reproduce a
        externally specified cone while keeping the same planks).
    """

    theta_s_deg: float
    n_planks: int
    d_c: float
    plank_length: float
    minor_radius: float | None = None

    def __post_init__(self):
        if not 0.0 < self.theta_s_deg < 90.0:
            raise ValueError("theta_s_deg must lie in (0, 90)")
        if self.n_planks < 3:
            raise ValueError("n_planks must be at least 3")
        if self.d_c <= 0:
            raise ValueError("d_c must be positive")
        if self.plank_length < 0:
            raise ValueError("plank_length must be non-negative")
        if self.minor_radius is not None and self.minor_radius <= 0:
            raise ValueError("minor_radius override must be positive")

    @property
    def r(self):
        """Minor base radius, wavelengths."""
        if self.minor_radius is not None:
            return self.minor_radius
        return self.n_planks * self.d_c / TWO_PI

    @property
    def R(self):
        """Major base radius, wavelengths; R = r + l*cos(theta_s) exactly."""
        return self.r + self.plank_length * math.cos(math.radians(self.theta_s_deg))

    @property
    def psi_c(self):
        """Angular pitch between adjacent planks, radians (2*pi/N)."""
        return TWO_PI / self.n_planks


def plank_element_positions(geom: ConeGeometry, offsets, plank_index=0):
    """Cartesian element positions of one plank on the cone surface.

    Parameters
    ----------
    geom : ConeGeometry
    offsets : array_like
        Ascending along-plank offsets l_m in [0, plank_length], wavelengths.
    plank_index : int
        Plank number n in [0, n_planks); the plank azimuth is n*psi_c.

    Returns
    -------
    ndarray, shape (len(offsets), 3)
        Columns x, y, z in wavelengths at the design frequency.
    """
    offsets = np.asarray(offsets, dtype=float)
    if offsets.ndim != 1:
        raise ValueError("offsets must be one-dimensional")
    if np.any(np.diff(offsets) <= 0) and offsets.size > 1:
        raise ValueError("offsets must be strictly ascending")
    if offsets.size and (offsets[0] < 0 or offsets[-1] > geom.plank_length + 1e-12):
        raise ValueError("offsets must lie within [0, plank_length]")
    if not 0 <= plank_index < geom.n_planks:
        raise ValueError("plank_index out of range")
    cos_s = math.cos(math.radians(geom.theta_s_deg))
    sin_s = math.sin(math.radians(geom.theta_s_deg))
    rho = geom.R - offsets * cos_s  # cylindrical radius of each element
    azimuth = plank_index * geom.psi_c
    return np.column_stack(
        (rho * math.cos(azimuth), rho * math.sin(azimuth), offsets * sin_s)
    )


def steering_phase(position, theta_deg, phi_deg, wavelength=1.0):
    """Steering phase shift for element(s) toward a beam direction.

    Returns ``-(2 pi / wavelength) * (r . u)`` wrapped to [-pi, pi), where
    ``u`` is the unit vector of the steering direction.  ``position`` may be
    a single (3,) vector or an (..., 3) array.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    position = np.asarray(position, dtype=float)
    u = direction_vector(theta_deg, phi_deg)
    phase = -(TWO_PI / wavelength) * (position @ u)
    return wrap_phase(phase)


def plank_frame_to_global_deg(theta_prime_deg, theta_s_deg):
    """Map plank-frame elevation (broadside = 90 deg) to global polar angle.

    The plank broadside points along theta = theta_s, so
    theta = theta' - (90 - theta_s).
    """
    return np.asarray(theta_prime_deg, dtype=float) - (90.0 - theta_s_deg)


def global_to_plank_frame_deg(theta_deg, theta_s_deg):
    """Inverse of :func:`plank_frame_to_global_deg`."""
    return np.asarray(theta_deg, dtype=float) + (90.0 - theta_s_deg)


def export_geometry_json(geom: ConeGeometry, offsets, wavelength_m, path):
    """Write the full cone element list as a JSON document.

    One record per element with plank index, element index and Cartesian
    coordinates in meters (positions are designed in wavelengths and scale
    with the design-frequency wavelength ``wavelength_m``).
    """
    elements = []
    for n in range(geom.n_planks):
        pos = plank_element_positions(geom, offsets, n) * wavelength_m
        for m, (x, y, z) in enumerate(pos):
            elements.append(
                {"plank": n, "element": m, "x_m": float(x), "y_m": float(y), "z_m": float(z)}
            )
    doc = {
        "theta_s_deg": geom.theta_s_deg,
        "n_planks": geom.n_planks,
        "d_c_wl": geom.d_c,
        "plank_length_wl": geom.plank_length,
        "minor_radius_wl": geom.r,
        "major_radius_wl": geom.R,
        "wavelength_m": float(wavelength_m),
        "elements": elements,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def load_geometry_json(path):
    """Load a geometry export; returns (ConeGeometry, offsets, positions_m).

    ``positions_m`` has shape (n_planks, n_elements, 3).
    """
    with open(path) as fh:
        doc = json.load(fh)
    geom = ConeGeometry(
        theta_s_deg=doc["theta_s_deg"],
        n_planks=doc["n_planks"],
        d_c=doc["d_c_wl"],
        plank_length=doc["plank_length_wl"],
        minor_radius=doc["minor_radius_wl"],
    )
    records = sorted(doc["elements"], key=lambda e: (e["plank"], e["element"]))
    n_elem = len(records) // geom.n_planks
    pos = np.array([[rec["x_m"], rec["y_m"], rec["z_m"]] for rec in records])
    pos = pos.reshape(geom.n_planks, n_elem, 3)
    sin_s = math.sin(math.radians(geom.theta_s_deg))
    offsets = pos[0, :, 2] / doc["wavelength_m"] / sin_s
    return geom, offsets, pos
