"""Array-factor evaluation and pattern descriptors.

Elevation cuts are sampled in the polar angle theta (degrees, ascending in
[0, 180]); 2D patterns live on the direction-cosine-like grid
``v = sin(theta) sin(phi)``, ``w = cos(theta)`` restricted to the closed unit
disk (forward hemisphere, phi in [-90, 90] relative to a reference azimuth).

Scalar descriptors follow the usual conventions: SLL is the highest lobe
outside the main lobe in dB below the peak, HPBW is the -3 dB width, and the
cut directivity uses the rotationally-symmetric linear-array formula
``D = 2 |F_peak|^2 / integral(|F|^2 du)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

TWO_PI = 2.0 * math.pi
HALF_POWER_DB = -3.0  # edge level on the 10*log10 power scale


class DegeneratePatternError(ValueError):
    """Pattern has no resolvable main-lobe structure for the measurement."""


@dataclass
class PatternCut:
    """Complex field samples along an elevation cut.

    ``angles_deg`` must be strictly increasing within [0, 180]; ``values``
    are the complex field samples; ``wavelength`` records the wavelength the
    cut was evaluated at (same unit as the element positions).
    """

    angles_deg: np.ndarray
    values: np.ndarray
    wavelength: float = 1.0

    def __post_init__(self):
        self.angles_deg = np.asarray(self.angles_deg, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.angles_deg.ndim != 1 or self.angles_deg.shape != self.values.shape:
            raise ValueError("angles and values must be 1D arrays of equal length")
        if self.angles_deg.size < 1:
            raise ValueError("empty cut")
        if self.angles_deg[0] < 0 or self.angles_deg[-1] > 180.0:
            raise ValueError("cut angles must lie within [0, 180] degrees")
        if self.angles_deg.size > 1 and np.any(np.diff(self.angles_deg) <= 0):
            raise ValueError("cut angles must be strictly increasing")

    @property
    def power(self):
        return np.abs(self.values) ** 2

    def normalized(self):
        """Copy of the cut scaled to unit peak magnitude."""
        peak = np.abs(self.values).max()
        if peak == 0:
            raise DegeneratePatternError("cannot normalize an all-zero cut")
        return PatternCut(self.angles_deg.copy(), self.values / peak, self.wavelength)


@dataclass
class Pattern2D:
    """Complex field on the (v, w) unit disk; NaN marks points off the disk.

    ``values[i, j]`` corresponds to ``(v[i], w[j])``.
    """

    v: np.ndarray
    w: np.ndarray
    values: np.ndarray
    wavelength: float = 1.0

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.v.size, self.w.size):
            raise ValueError("values must have shape (len(v), len(w))")

    @property
    def mask(self):
        """Boolean disk mask (True where the pattern is defined)."""
        vv, ww = np.meshgrid(self.v, self.w, indexing="ij")
        return vv**2 + ww**2 <= 1.0 + 1e-12

    @property
    def power(self):
        return np.abs(self.values) ** 2

    def normalized(self):
        peak = np.nanmax(np.abs(self.values))
        if not peak > 0:
            raise DegeneratePatternError("cannot normalize an all-zero pattern")
        return Pattern2D(self.v.copy(), self.w.copy(), self.values / peak, self.wavelength)


@dataclass
class BeamMetrics:
    """Scalar pattern descriptors; NaN marks values not computed/absent."""

    sll_db: float = math.nan
    sll_el_db: float = math.nan
    directivity_dbi: float = math.nan
    hpbw_az_deg: float = math.nan
    hpbw_el_deg: float = math.nan
    chi: float = math.nan


def _positions_of(layout):
    positions = getattr(layout, "positions", layout)
    return np.asarray(positions, dtype=float)


def array_factor_cut(layout, weights, angles_deg, wavelength=1.0):
    """Elevation-cut array factor of a linear (plank) array.

    F(theta_k) = sum_m w_m exp{j (2 pi / wavelength) xi_m cos(theta_k)};
    steering is expected to be folded into the complex weights.  The result
    is not normalized.
    """
    positions = _positions_of(layout)
    weights = np.asarray(weights, dtype=complex)
    if positions.shape != weights.shape:
        raise ValueError("layout and weights must have matching lengths")
    angles_deg = np.asarray(angles_deg, dtype=float)
    u = np.cos(np.radians(angles_deg))
    phase = (TWO_PI / wavelength) * np.outer(u, positions)
    values = np.exp(1j * phase) @ weights
    return PatternCut(angles_deg, values, wavelength)


def _grid_directions(v, w, phi0_deg=0.0):
    """Unit vectors for disk points of the (v, w) grid; NaN off the disk.

    The grid azimuth is measured from the reference azimuth ``phi0_deg``:
    a global rotation of the whole map.
    """
    vv, ww = np.meshgrid(v, w, indexing="ij")
    ux2 = 1.0 - vv**2 - ww**2
    mask = ux2 >= -1e-12
    ux = np.sqrt(np.clip(ux2, 0.0, None))
    # rotate (ux, vv) by phi0 about z
    phi0 = math.radians(phi0_deg)
    gx = ux * math.cos(phi0) - vv * math.sin(phi0)
    gy = ux * math.sin(phi0) + vv * math.cos(phi0)
    directions = np.stack((gx, gy, ww), axis=-1)
    return directions, mask


def _theta_phi_of_grid(v, w):
    """Spherical angles (deg) of grid points in the pattern's own frame."""
    vv, ww = np.meshgrid(v, w, indexing="ij")
    theta = np.degrees(np.arccos(np.clip(ww, -1.0, 1.0)))
    sin_t = np.sqrt(np.clip(1.0 - ww**2, 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(sin_t > 0, vv / np.where(sin_t > 0, sin_t, 1.0), 0.0)
    phi = np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))
    return theta, phi


def pattern_2d(positions, weights, wavelength=1.0, resolution=301,
               element_pattern=None, phi0_deg=0.0, chunk=8192):
    """Far-field pattern over the (v, w) unit disk.

    Parameters
    ----------
    positions : (P, 3) array
        Element positions, wavelengths at the design frequency.
    weights : (P,) complex array
        Element weights with steering phases already applied.
    wavelength : float
        Evaluation wavelength in the same unit as ``positions`` (1.0 is the
        design frequency).
    resolution : int
        Number of samples per axis of the square grid (odd keeps v = 0 and
        w = 0 lines on the grid).
    element_pattern : callable, optional
        ``element_pattern(theta_deg, phi_deg)`` factor applied pointwise;
        angles are in the map's own frame (azimuth relative to ``phi0_deg``).
    phi0_deg : float
        Reference azimuth of the map (v = 0 plane).
    """
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    weights = np.asarray(weights, dtype=complex).reshape(-1)
    if positions.shape[0] != weights.shape[0]:
        raise ValueError("positions and weights must have matching lengths")
    v = np.linspace(-1.0, 1.0, resolution)
    w = np.linspace(-1.0, 1.0, resolution)
    directions, mask = _grid_directions(v, w, phi0_deg)
    dirs_flat = directions[mask]  # (G, 3)
    values = np.full(mask.shape, np.nan + 0j)
    out = np.empty(dirs_flat.shape[0], dtype=complex)
    k = TWO_PI / wavelength
    for start in range(0, dirs_flat.shape[0], chunk):
        block = dirs_flat[start:start + chunk]
        out[start:start + chunk] = np.exp(1j * k * (block @ positions.T)) @ weights
    if element_pattern is not None:
        theta, phi = _theta_phi_of_grid(v, w)
        out = out * np.asarray(element_pattern(theta[mask], phi[mask]), dtype=complex)
    values[mask] = out
    return Pattern2D(v, w, values, wavelength)


def _crossing(x, db, i, j, level_db):
    """Linear interpolation of the level crossing between samples i and j."""
    if db[j] == db[i]:
        return x[j]
    frac = (level_db - db[i]) / (db[j] - db[i])
    return x[i] + frac * (x[j] - x[i])


def _half_power_edges(x, power, peak_index):
    """(left, right) -3 dB edge coordinates around the peak, or None."""
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / power[peak_index])
    level = HALF_POWER_DB
    left = right = None
    for i in range(peak_index, 0, -1):
        if db[i - 1] < level <= db[i]:
            left = _crossing(x, db, i, i - 1, level)
            break
    for i in range(peak_index, len(x) - 1):
        if db[i + 1] < level <= db[i]:
            right = _crossing(x, db, i, i + 1, level)
            break
    if left is None or right is None:
        return None
    return left, right


def _main_lobe_bounds(power, peak_index):
    """Index range (lo, hi) of the main lobe, delimited by the first local
    minima on each side of the peak that fall at least 3 dB below it."""
    floor = power[peak_index] * 10.0 ** (HALF_POWER_DB / 10.0)
    lo = 0
    for i in range(peak_index - 1, 0, -1):
        if power[i] <= power[i - 1] and power[i] <= power[i + 1] and power[i] < floor:
            lo = i
            break
    hi = len(power) - 1
    for i in range(peak_index + 1, len(power) - 1):
        if power[i] <= power[i - 1] and power[i] <= power[i + 1] and power[i] < floor:
            hi = i
            break
    return lo, hi


def _cut_sll_db(power, peak_index):
    lo, hi = _main_lobe_bounds(power, peak_index)
    candidates = []
    if lo > 0:
        candidates.append(power[:lo + 1].max())
    if hi < len(power) - 1:
        candidates.append(power[hi:].max())
    if not candidates:
        return math.nan
    side = max(candidates)
    if side <= 0:
        return math.nan
    return 10.0 * math.log10(side / power[peak_index])


def _cut_directivity_dbi(angles_deg, power):
    u = np.cos(np.radians(angles_deg))
    order = np.argsort(u)
    integral = np.trapezoid(power[order], u[order])
    if integral <= 0:
        return math.nan
    return 10.0 * math.log10(2.0 * power.max() / integral)


def _metrics_cut(cut: PatternCut, steer_deg) -> BeamMetrics:
    power = cut.power
    peak_index = int(np.argmax(power))
    if power[peak_index] <= 0:
        raise DegeneratePatternError("all-zero cut")
    sll = _cut_sll_db(power, peak_index)
    edges = _half_power_edges(cut.angles_deg, power, peak_index)
    hpbw = (edges[1] - edges[0]) if edges is not None else math.nan
    return BeamMetrics(
        sll_db=sll,
        sll_el_db=sll,
        directivity_dbi=_cut_directivity_dbi(cut.angles_deg, power),
        hpbw_el_deg=hpbw,
    )


def elevation_cut(pattern: Pattern2D) -> PatternCut:
    """Extract the v = 0 elevation cut of a 2D pattern as a PatternCut."""
    i0 = int(np.argmin(np.abs(pattern.v)))
    w_line = pattern.w
    vals = pattern.values[i0, :]
    good = np.isfinite(vals.real)
    theta = np.degrees(np.arccos(np.clip(w_line[good], -1.0, 1.0)))
    order = np.argsort(theta)
    return PatternCut(theta[order], vals[good][order], pattern.wavelength)


def _metrics_2d(pattern: Pattern2D, steer) -> BeamMetrics:
    power = pattern.power
    finite = np.isfinite(power)
    if not finite.any():
        raise DegeneratePatternError("empty 2D pattern")
    pwork = np.where(finite, power, -np.inf)
    peak_flat = int(np.argmax(pwork))
    ipk, jpk = np.unravel_index(peak_flat, power.shape)
    peak = power[ipk, jpk]
    if not peak > 0:
        raise DegeneratePatternError("all-zero 2D pattern")

    # main lobe: connected region above -3 dB that contains the peak
    above = pwork >= peak * 10.0 ** (HALF_POWER_DB / 10.0)
    labels, _ = ndimage.label(above)
    main_label = labels[ipk, jpk]
    main_region = labels == main_label

    # sidelobes: local maxima outside the main-lobe region
    local_max = (pwork == ndimage.maximum_filter(pwork, size=3)) & finite
    side = local_max & ~main_region
    sll_db = math.nan
    if side.any():
        side_peak = power[side].max()
        if side_peak > 0:
            sll_db = 10.0 * math.log10(side_peak / peak)

    # elevation cut (v = 0)
    sll_el_db = math.nan
    hpbw_el = math.nan
    try:
        cut = elevation_cut(pattern)
        cm = _metrics_cut(cut, None)
        sll_el_db, hpbw_el = cm.sll_el_db, cm.hpbw_el_deg
    except (DegeneratePatternError, ValueError):
        pass

    # azimuth -3 dB width along the w = w_peak grid line, converted to degrees
    hpbw_az = math.nan
    row = power[:, jpk]
    good = np.isfinite(row)
    if good.sum() >= 3:
        vline = pattern.v[good]
        pline = row[good]
        ip = int(np.argmax(pline))
        edges = _half_power_edges(vline, pline, ip)
        sin_t = math.sqrt(max(0.0, 1.0 - pattern.w[jpk] ** 2))
        if edges is not None and sin_t > 0:
            lo = math.degrees(math.asin(np.clip(edges[0] / sin_t, -1.0, 1.0)))
            hi = math.degrees(math.asin(np.clip(edges[1] / sin_t, -1.0, 1.0)))
            hpbw_az = hi - lo
    return BeamMetrics(
        sll_db=sll_db,
        sll_el_db=sll_el_db,
        hpbw_az_deg=hpbw_az,
        hpbw_el_deg=hpbw_el,
    )


def metrics(pattern, steer=None) -> BeamMetrics:
    """Scalar descriptors of a cut or 2D pattern.

    For cuts the directivity uses the linear-array formula; for 2D patterns
    the directivity requires full-sphere quadrature over the radiating
    elements and is left NaN here (see :func:`directivity_sphere`).  A
    pattern without any sidelobe reports SLL as NaN rather than failing.
    """
    if isinstance(pattern, PatternCut):
        return _metrics_cut(pattern, steer)
    if isinstance(pattern, Pattern2D):
        return _metrics_2d(pattern, steer)
    raise TypeError("pattern must be a PatternCut or Pattern2D")


def directivity_sphere(positions, weights, wavelength=1.0, element_pattern=None,
                       step_deg=1.0, chunk=16384):
    """Peak directivity in dBi via full-sphere quadrature.

    Uses a midpoint rule on a step_deg x step_deg (theta, phi) grid:
    ``D = 4 pi U_max / sum(U sin(theta) dtheta dphi)``.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    weights = np.asarray(weights, dtype=complex).reshape(-1)
    n_t = max(2, int(round(180.0 / step_deg)))
    n_p = max(2, int(round(360.0 / step_deg)))
    theta = (np.arange(n_t) + 0.5) * (180.0 / n_t)
    phi = -180.0 + (np.arange(n_p) + 0.5) * (360.0 / n_p)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    dirs = np.stack(
        (
            np.sin(np.radians(tt)) * np.cos(np.radians(pp)),
            np.sin(np.radians(tt)) * np.sin(np.radians(pp)),
            np.cos(np.radians(tt)),
        ),
        axis=-1,
    ).reshape(-1, 3)
    k = TWO_PI / wavelength
    intensity = np.empty(dirs.shape[0])
    for start in range(0, dirs.shape[0], chunk):
        block = dirs[start:start + chunk]
        field = np.exp(1j * k * (block @ positions.T)) @ weights
        intensity[start:start + chunk] = np.abs(field) ** 2
    if element_pattern is not None:
        gain = np.asarray(element_pattern(tt.reshape(-1), pp.reshape(-1)), dtype=complex)
        intensity *= np.abs(gain) ** 2
    sin_t = np.sin(np.radians(tt)).reshape(-1)
    d_omega = math.radians(180.0 / n_t) * math.radians(360.0 / n_p)
    total = np.sum(intensity * sin_t) * d_omega
    if total <= 0:
        return math.nan
    return 10.0 * math.log10(4.0 * math.pi * intensity.max() / total)


def chi_cut(reference: PatternCut, actual: PatternCut) -> float:
    """Power pattern matching error between two peak-normalized cuts.

    chi = integral(| |Fr|^2 - |Fa|^2 |, theta) / integral(|Fr|^2, theta)
    with trapezoidal quadrature on the shared angle grid.  Both cuts must be
    peak-normalized by the caller; no rescaling happens here.
    """
    if reference.angles_deg.shape != actual.angles_deg.shape or not np.allclose(
        reference.angles_deg, actual.angles_deg, atol=1e-9
    ):
        raise ValueError("cuts must share the same angle grid")
    theta = np.radians(reference.angles_deg)
    p_ref = reference.power
    p_act = actual.power
    denom = np.trapezoid(p_ref, theta)
    if denom <= 0:
        raise ValueError("reference cut has zero power")
    return float(np.trapezoid(np.abs(p_ref - p_act), theta) / denom)


def chi_2d(reference: Pattern2D, actual: Pattern2D) -> float:
    """2D power matching error over the (v, w) unit disk (trapezoidal)."""
    if reference.values.shape != actual.values.shape or not (
        np.allclose(reference.v, actual.v) and np.allclose(reference.w, actual.w)
    ):
        raise ValueError("patterns must share the same grid")
    p_ref = np.where(np.isfinite(reference.power), reference.power, 0.0)
    p_act = np.where(np.isfinite(actual.power), actual.power, 0.0)
    num = np.trapezoid(np.trapezoid(np.abs(p_ref - p_act), reference.w, axis=1), reference.v)
    den = np.trapezoid(np.trapezoid(p_ref, reference.w, axis=1), reference.v)
    if den <= 0:
        raise ValueError("reference pattern has zero power")
    return float(num / den)


def local_mismatch(reference: Pattern2D, actual: Pattern2D, floor=1e-12):
    """Pointwise mismatch Delta = | |Fr|^2 - |Fa|^2 | / |Fr|^2 on the disk.

    Points where the reference power falls below ``floor`` times its peak
    (or off the disk) are returned as NaN rather than raising.
    """
    if reference.values.shape != actual.values.shape:
        raise ValueError("patterns must share the same grid")
    p_ref = reference.power
    p_act = actual.power
    defined = np.isfinite(p_ref) & np.isfinite(p_act)
    peak = np.nanmax(p_ref)
    defined &= p_ref >= floor * peak
    delta = np.full(p_ref.shape, np.nan)
    delta[defined] = np.abs(p_ref[defined] - p_act[defined]) / p_ref[defined]
    return delta


# ---------------------------------------------------------------------------
# file exports (CSV cut, CSV grid with header)

def export_cut_csv(cut: PatternCut, path, db=False):
    """Write a cut as CSV: theta_deg, re, im, power_db (dB re peak)."""
    peak = np.abs(cut.values).max()
    ref = peak**2 if peak > 0 else 1.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_deg", "re", "im", "power_db"])
        for theta, val in zip(cut.angles_deg, cut.values):
            p = abs(val) ** 2 / ref
            p_db = 10.0 * math.log10(p) if p > 0 else -math.inf
            if db:
                writer.writerow([repr(float(theta)), repr(float(p_db)), "", ""])
            else:
                writer.writerow(
                    [repr(float(theta)), repr(val.real), repr(val.imag), repr(float(p_db))]
                )


def load_cut_csv(path) -> PatternCut:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if header[:2] != ["theta_deg", "re"]:
        raise ValueError(f"{path}: unexpected cut CSV header {header!r}")
    theta = np.array([float(r[0]) for r in rows])
    values = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    return PatternCut(theta, values)


def export_grid_csv(pattern: Pattern2D, path, frequency_hz=None, beam_index=None, db=False):
    """Write a 2D pattern as CSV with a commented header.

    Header lines record grid dimensions, frequency and beam index; data rows
    are ``v, w, re, im`` (or ``v, w, power_db`` when ``db``); off-disk points
    are omitted.
    """
    with open(path, "w", newline="") as fh:
        fh.write(f"# grid {pattern.v.size} {pattern.w.size}\n")
        fh.write(f"# frequency_hz {repr(float(frequency_hz)) if frequency_hz else 'none'}\n")
        fh.write(f"# beam {beam_index if beam_index is not None else 'none'}\n")
        fh.write(f"# wavelength {repr(float(pattern.wavelength))}\n")
        writer = csv.writer(fh)
        if db:
            writer.writerow(["v", "w", "power_db"])
            peak = np.nanmax(np.abs(pattern.values)) ** 2
        else:
            writer.writerow(["v", "w", "re", "im"])
        for i, v in enumerate(pattern.v):
            for j, w in enumerate(pattern.w):
                val = pattern.values[i, j]
                if not np.isfinite(val.real):
                    continue
                if db:
                    p = abs(val) ** 2 / peak
                    p_db = 10.0 * math.log10(p) if p > 0 else -math.inf
                    writer.writerow([repr(float(v)), repr(float(w)), repr(float(p_db))])
                else:
                    writer.writerow(
                        [repr(float(v)), repr(float(w)), repr(val.real), repr(val.imag)]
                    )


def load_grid_csv(path) -> Pattern2D:
    with open(path, newline="") as fh:
        header = {}
        pos = 0
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                header[key] = value
                pos = fh.tell()
            else:
                break
        fh.seek(pos)
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [row for row in reader if row]
    if columns[:2] != ["v", "w"] or "re" not in columns:
        raise ValueError(f"{path}: unexpected grid CSV header {columns!r}")
    nv, nw = (int(x) for x in header["grid"].split())
    v = np.linspace(-1.0, 1.0, nv)
    w = np.linspace(-1.0, 1.0, nw)
    values = np.full((nv, nw), np.nan + 0j)
    iv = {repr(float(x)): i for i, x in enumerate(v)}
    iw = {repr(float(x)): j for j, x in enumerate(w)}
    for row in rows:
        values[iv[row[0]], iw[row[1]]] = complex(float(row[2]), float(row[3]))
    wavelength = float(header.get("wavelength", "1.0"))
    return Pattern2D(v, w, values, wavelength)
