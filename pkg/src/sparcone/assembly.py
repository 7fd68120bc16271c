"""Sector assembly of the conical array and band/frequency analysis.

A sector is a contiguous run of identical planks operated together; each
beam of the plan is steered per element to its global direction
(elevation from the plank-frame plan mapped through the slant angle, azimuth
at the sector center).  Element positions are fixed in meters at the design
frequency; steering phases are recomputed at each evaluation frequency
(true-time-delay behaviour, no beam squint), while the plank excitations
stay frequency-flat complex weights.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import (
    ConeGeometry,
    SPEED_OF_LIGHT,
    direction_vector,
    plank_element_positions,
    plank_frame_to_global_deg,
)
from .pattern import (
    BeamMetrics,
    Pattern2D,
    chi_2d,
    directivity_sphere,
    metrics,
    pattern_2d,
)
from .reference import BeamPlan, PlankLayout, TaperWeights
from .solver import ExcitationSet

TWO_PI = 2.0 * math.pi


class ElementPatternFormatError(ValueError):
    """Tabulated element-pattern file is malformed."""


@dataclass(frozen=True)
class FrequencyPlan:
    """Design frequency and the band frequencies to evaluate, Hz."""

    design_hz: float
    evaluate_hz: tuple

    def __post_init__(self):
        object.__setattr__(self, "evaluate_hz", tuple(float(f) for f in self.evaluate_hz))
        if self.design_hz <= 0 or any(f <= 0 for f in self.evaluate_hz):
            raise ValueError("frequencies must be positive")

    @property
    def wavelength_m(self):
        return SPEED_OF_LIGHT / self.design_hz

    @property
    def f_min(self):
        return min(self.evaluate_hz)

    @property
    def f_max(self):
        return max(self.evaluate_hz)

    def relative_wavelength(self, frequency_hz):
        """Wavelength at ``frequency_hz`` in design-wavelength units."""
        if frequency_hz <= 0:
            raise ValueError("frequency must be positive")
        return self.design_hz / frequency_hz


class ElementPattern:
    """Embedded/active element pattern factor e(theta, phi).

    Either the isotropic marker or a tabulated complex gain over a
    rectangular (theta, phi) grid in degrees with bilinear interpolation.
    Queries outside a tabulated grid raise ``ValueError``.
    """

    def __init__(self, theta_deg=None, phi_deg=None, gain=None):
        if gain is None:
            self._interp = None
            self.theta_deg = self.phi_deg = self.gain = None
            return
        theta_deg = np.asarray(theta_deg, dtype=float)
        phi_deg = np.asarray(phi_deg, dtype=float)
        gain = np.asarray(gain, dtype=complex)
        if gain.shape != (theta_deg.size, phi_deg.size):
            raise ElementPatternFormatError("gain grid shape does not match axes")
        if not np.all(np.isfinite(gain)):
            raise ElementPatternFormatError("gain grid contains non-finite values")
        self.theta_deg = theta_deg
        self.phi_deg = phi_deg
        self.gain = gain
        self._interp = RegularGridInterpolator(
            (theta_deg, phi_deg), gain, method="linear", bounds_error=True
        )

    @classmethod
    def isotropic(cls):
        return cls()

    @property
    def is_isotropic(self):
        return self._interp is None

    def __call__(self, theta_deg, phi_deg):
        theta_deg = np.asarray(theta_deg, dtype=float)
        phi_deg = np.asarray(phi_deg, dtype=float)
        if self.is_isotropic:
            shape = np.broadcast_shapes(theta_deg.shape, phi_deg.shape)
            return np.ones(shape, dtype=complex)
        pts = np.stack(np.broadcast_arrays(theta_deg, phi_deg), axis=-1)
        return self._interp(pts)


def load_element_pattern(path) -> ElementPattern:
    """Load a tabulated element pattern from CSV.

    Expected header ``theta_deg,phi_deg,mag_db,phase_deg`` and a complete
    rectangular grid (row-major in theta).  Parse failures report the line
    number; an incomplete/non-rectangular grid is a format error.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ElementPatternFormatError(f"{path}: empty file") from None
        expected = ["theta_deg", "phi_deg", "mag_db", "phase_deg"]
        if [h.strip() for h in header] != expected:
            raise ElementPatternFormatError(
                f"{path}: line 1: expected header {','.join(expected)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ElementPatternFormatError(f"{path}: line {lineno}: expected 4 fields")
            try:
                rows.append(tuple(float(x) for x in row))
            except ValueError as exc:
                raise ElementPatternFormatError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ElementPatternFormatError(f"{path}: no data rows")
    data = np.array(rows)
    theta = np.unique(data[:, 0])
    phi = np.unique(data[:, 1])
    if theta.size * phi.size != data.shape[0]:
        raise ElementPatternFormatError(
            f"{path}: grid is not rectangular "
            f"({theta.size} x {phi.size} axes but {data.shape[0]} rows)"
        )
    gain = np.full((theta.size, phi.size), np.nan + 0j)
    t_index = {t: i for i, t in enumerate(theta)}
    p_index = {p: j for j, p in enumerate(phi)}
    for t, p, mag_db, phase_deg in rows:
        gain[t_index[t], p_index[p]] = 10.0 ** (mag_db / 20.0) * np.exp(
            1j * math.radians(phase_deg)
        )
    if np.any(np.isnan(gain)):
        raise ElementPatternFormatError(f"{path}: grid has duplicate or missing points")
    return ElementPattern(theta, phi, gain)


@dataclass
class SectorConfig:
    """Vertical-sector partition of the cone.

    ``sector_count * width_deg == 360`` and ``planks_per_sector`` is the
    rounded share of the N planks; sector azimuths are the sector centers.
    """

    width_deg: float
    sector_count: int
    planks_per_sector: int
    sector_azimuths_deg: np.ndarray
    azimuth_taper: TaperWeights | None = None

    @classmethod
    def from_width(cls, geom: ConeGeometry, width_deg, azimuth_taper=None):
        if width_deg <= 0 or width_deg > 360:
            raise ValueError("sector width must lie in (0, 360]")
        sector_count = round(360.0 / width_deg)
        if abs(sector_count * width_deg - 360.0) > 1e-9:
            raise ValueError("sector width must divide 360 degrees")
        planks = round(geom.n_planks * width_deg / 360.0)
        if planks < 1:
            raise ValueError("sector narrower than one plank pitch")
        if azimuth_taper is not None and azimuth_taper.count != planks:
            raise ValueError("azimuth taper length must equal planks_per_sector")
        psi_c_deg = math.degrees(geom.psi_c)
        azimuths = np.array(
            [psi_c_deg * (s * planks + (planks - 1) / 2.0) for s in range(sector_count)]
        )
        return cls(
            width_deg=float(width_deg),
            sector_count=sector_count,
            planks_per_sector=planks,
            sector_azimuths_deg=azimuths,
            azimuth_taper=azimuth_taper,
        )


@dataclass
class AssembledArray:
    """One sector's element positions with per-beam steered weights.

    ``base_weights`` carry the azimuth taper and the steering-stripped plank
    excitations; steering phases are frequency-dependent and applied by
    :meth:`weights_at`.
    """

    positions: np.ndarray          # (P, 3), wavelengths at the design frequency
    base_weights: np.ndarray       # (B, P) complex, no steering
    steer_theta_deg: np.ndarray    # (B,) global polar steering angles
    steer_phi_deg: float           # sector azimuth

    @property
    def element_count(self):
        return self.positions.shape[0]

    @property
    def n_beams(self):
        return self.base_weights.shape[0]

    def weights_at(self, relative_wavelength=1.0):
        """Per-beam element weights including steering at the wavelength."""
        u = direction_vector(self.steer_theta_deg, self.steer_phi_deg)  # (B, 3)
        phase = -(TWO_PI / relative_wavelength) * (self.positions @ u.T)  # (P, B)
        return self.base_weights * np.exp(1j * phase).T

    @property
    def weights(self):
        """Design-frequency weights (steering included)."""
        return self.weights_at(1.0)


def assemble_sector(geom: ConeGeometry, layout: PlankLayout, excitations: ExcitationSet,
                    sector: SectorConfig, beams: BeamPlan, sector_index=0) -> AssembledArray:
    """Populate one vertical sector with identical planks.

    Every plank of the sector carries the same per-beam plank excitations;
    per-element steering (recomputed per beam from the element's own global
    position) points all beams at the sector azimuth.  The plank-frame
    steering phase already contained in the solved excitations is stripped
    first so that per-element steering is applied exactly once.
    """
    if not 0 <= sector_index < sector.sector_count:
        raise ValueError("sector_index out of range")
    if excitations.count != layout.count:
        raise ValueError("excitations support does not match the layout")
    if excitations.n_beams != beams.count:
        raise ValueError("excitations and beam plan disagree on the beam count")

    # strip the plank-frame steering phase from the plank excitations
    steer_u = np.cos(np.radians(beams.steer_deg))  # (B,)
    strip = np.exp(1j * TWO_PI * np.outer(steer_u, layout.positions))  # (B, M)
    plank_weights = excitations.weights * strip

    taper = (
        sector.azimuth_taper.amplitudes
        if sector.azimuth_taper is not None
        else np.ones(sector.planks_per_sector)
    )
    first = sector_index * sector.planks_per_sector
    plank_ids = [(first + i) % geom.n_planks for i in range(sector.planks_per_sector)]
    positions = np.vstack(
        [plank_element_positions(geom, layout.positions, n) for n in plank_ids]
    )
    base = np.hstack([t * plank_weights for t in taper])  # (B, Nc*M)
    theta_global = plank_frame_to_global_deg(beams.steer_deg, geom.theta_s_deg)
    return AssembledArray(
        positions=positions,
        base_weights=base,
        steer_theta_deg=theta_global,
        steer_phi_deg=float(sector.sector_azimuths_deg[sector_index]),
    )


def evaluate_assembly(assembly: AssembledArray, frequency_hz, plan: FrequencyPlan,
                      element_pattern=None, resolution=301, beam_indices=None,
                      directivity_step_deg=1.0, with_directivity=True):
    """Per-beam 2D patterns and descriptors at one frequency.

    Patterns are evaluated on the (v, w) disk with azimuth relative to the
    sector center.  Directivity uses full-sphere quadrature and can be
    switched off (``with_directivity=False``) when only the map is needed.

    Returns a list of (Pattern2D, BeamMetrics), one entry per requested beam.
    """
    if assembly.element_count == 0:
        raise ValueError("empty assembly")
    rel_wl = plan.relative_wavelength(frequency_hz)
    weights = assembly.weights_at(rel_wl)
    indices = range(assembly.n_beams) if beam_indices is None else beam_indices
    results = []
    for b in indices:
        p2d = pattern_2d(
            assembly.positions,
            weights[b],
            wavelength=rel_wl,
            resolution=resolution,
            element_pattern=element_pattern,
            phi0_deg=assembly.steer_phi_deg,
        )
        m = metrics(p2d, (assembly.steer_theta_deg[b], 0.0))
        if with_directivity:
            m.directivity_dbi = directivity_sphere(
                assembly.positions,
                weights[b],
                wavelength=rel_wl,
                element_pattern=element_pattern,
                step_deg=directivity_step_deg,
            )
        results.append((p2d, m))
    return results


@dataclass
class SweepRow:
    """One (beam, frequency) record of a band sweep."""

    beam: int
    frequency_hz: float
    chi: float
    sll_db: float
    sll_el_db: float
    d_dbi: float
    hpbw_az_deg: float
    hpbw_el_deg: float


def frequency_sweep(assembly: AssembledArray, reference_assembly: AssembledArray,
                    plan: FrequencyPlan, element_pattern=None, resolution=301,
                    beam_indices=None, with_directivity=True):
    """Band sweep of the assembly against a reference assembly.

    For every evaluation frequency and beam, computes the 2D matching error
    between the peak-normalized patterns of ``assembly`` and
    ``reference_assembly`` plus the descriptor set of ``assembly``.
    """
    if assembly.n_beams != reference_assembly.n_beams:
        raise ValueError("assemblies must share the beam plan")
    rows = []
    indices = list(range(assembly.n_beams)) if beam_indices is None else list(beam_indices)
    for f in plan.evaluate_hz:
        actual = evaluate_assembly(
            assembly, f, plan, element_pattern, resolution, indices,
            with_directivity=with_directivity,
        )
        reference = evaluate_assembly(
            reference_assembly, f, plan, element_pattern, resolution, indices,
            with_directivity=False,
        )
        for (b, (p_act, m_act)), (p_ref, _) in zip(zip(indices, actual), reference):
            chi = chi_2d(p_ref.normalized(), p_act.normalized())
            m_act.chi = chi
            rows.append(
                SweepRow(
                    beam=b + 1,
                    frequency_hz=float(f),
                    chi=chi,
                    sll_db=m_act.sll_db,
                    sll_el_db=m_act.sll_el_db,
                    d_dbi=m_act.directivity_dbi,
                    hpbw_az_deg=m_act.hpbw_az_deg,
                    hpbw_el_deg=m_act.hpbw_el_deg,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# file exports

def export_assembly_manifest_json(assembly: AssembledArray, geom: ConeGeometry,
                                  sector: SectorConfig, beams: BeamPlan, path):
    doc = {
        "geometry": {
            "theta_s_deg": geom.theta_s_deg,
            "n_planks": geom.n_planks,
            "d_c_wl": geom.d_c,
            "plank_length_wl": geom.plank_length,
            "minor_radius_wl": geom.r,
            "major_radius_wl": geom.R,
        },
        "sector": {
            "width_deg": sector.width_deg,
            "sector_count": sector.sector_count,
            "planks_per_sector": sector.planks_per_sector,
            "azimuth_deg": float(assembly.steer_phi_deg),
            "azimuth_tapered": sector.azimuth_taper is not None,
        },
        "beams": [
            {
                "beam": b + 1,
                "steer_plank_deg": float(beams.steer_deg[b]),
                "steer_global_deg": float(assembly.steer_theta_deg[b]),
            }
            for b in range(beams.count)
        ],
        "element_count": int(assembly.element_count),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def load_assembly_manifest_json(path):
    with open(path) as fh:
        return json.load(fh)


def export_elements_csv(assembly: AssembledArray, wavelength_m, path):
    """Element table: index, position in meters and design wavelengths."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["element", "x_m", "y_m", "z_m", "x_wl", "y_wl", "z_wl"])
        for i, (x, y, z) in enumerate(assembly.positions):
            writer.writerow(
                [
                    i,
                    repr(float(x * wavelength_m)), repr(float(y * wavelength_m)),
                    repr(float(z * wavelength_m)),
                    repr(float(x)), repr(float(y)), repr(float(z)),
                ]
            )


def load_elements_csv(path):
    """Load an element table; returns positions in design wavelengths."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return np.array([[float(r["x_wl"]), float(r["y_wl"]), float(r["z_wl"])] for r in rows])


def export_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["beam", "frequency_hz", "chi", "sll_db", "sll_el_db", "d_dbi",
             "hpbw_az_deg", "hpbw_el_deg"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.beam, repr(float(r.frequency_hz)), repr(float(r.chi)),
                    repr(float(r.sll_db)), repr(float(r.sll_el_db)), repr(float(r.d_dbi)),
                    repr(float(r.hpbw_az_deg)), repr(float(r.hpbw_el_deg)),
                ]
            )


def load_sweep_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for r in reader:
            rows.append(
                SweepRow(
                    beam=int(r["beam"]), frequency_hz=float(r["frequency_hz"]),
                    chi=float(r["chi"]), sll_db=float(r["sll_db"]),
                    sll_el_db=float(r["sll_el_db"]), d_dbi=float(r["d_dbi"]),
                    hpbw_az_deg=float(r["hpbw_az_deg"]), hpbw_el_deg=float(r["hpbw_el_deg"]),
                )
            )
    return rows
