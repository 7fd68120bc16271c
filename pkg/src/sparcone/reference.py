"""Reference plank synthesis and -3 dB beam stacking.

The reference plank is a fully-populated uniform linear array tapered with a
Taylor n-bar line-source distribution.  Its steered patterns are
shift-invariant in u = cos(theta'), which makes the elevation beam plan a
pure bookkeeping exercise: beams are stacked so each one crosses its
neighbours exactly at the -3 dB level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .pattern import (
    DegeneratePatternError,
    PatternCut,
    _half_power_edges,
)

TWO_PI = 2.0 * math.pi


class CoverageInfeasibleError(ValueError):
    """Requested beam stack runs outside the visible range u in [-1, 1]."""


@dataclass
class PlankLayout:
    """Along-plank element coordinates, wavelengths, ascending from 0."""

    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1 or self.positions.size < 1:
            raise ValueError("positions must be a non-empty 1D array")
        if self.positions[0] != 0.0:
            raise ValueError("first element must sit at the plank origin")
        if self.positions.size > 1 and np.any(np.diff(self.positions) <= 0):
            raise ValueError("positions must be strictly increasing")

    @classmethod
    def uniform(cls, count, spacing):
        """Fully-populated layout of ``count`` elements spaced ``spacing``."""
        if count < 1 or spacing <= 0:
            raise ValueError("count must be >= 1 and spacing positive")
        return cls(spacing * np.arange(count))

    @property
    def count(self):
        return self.positions.size

    @property
    def span(self):
        """Aperture length (first-to-last element distance)."""
        return float(self.positions[-1])

    @property
    def gaps(self):
        return np.diff(self.positions)


@dataclass
class TaperWeights:
    """Per-element amplitude taper, symmetric and normalized to peak 1."""

    amplitudes: np.ndarray
    sll_db: float
    n_bar: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if np.any(self.amplitudes <= 0):
            raise ValueError("taper amplitudes must be positive")

    @property
    def count(self):
        return self.amplitudes.size


def _taylor_coefficients(sll_db, n_bar):
    """Cosine-series coefficients F_m of the Taylor n-bar line source."""
    ratio = 10.0 ** (-sll_db / 20.0)
    A = math.acosh(ratio) / math.pi
    if n_bar < A**2 + 0.25:
        raise ValueError(
            f"n_bar={n_bar} too small for SLL={sll_db} dB "
            f"(requires n_bar >= A^2 + 1/4 = {A**2 + 0.25:.2f})"
        )
    sigma2 = n_bar**2 / (A**2 + (n_bar - 0.5) ** 2)
    m = np.arange(1, n_bar)
    coeffs = np.empty(n_bar - 1)
    for i, mi in enumerate(m):
        numerator = np.prod(1.0 - mi**2 / (sigma2 * (A**2 + (m - 0.5) ** 2)))
        denominator = np.prod(1.0 - mi**2 / np.delete(m, i) ** 2)
        coeffs[i] = ((-1.0) ** (mi + 1) / 2.0) * numerator / denominator
    return coeffs


def taylor_taper(count, sll_db, n_bar) -> TaperWeights:
    """Sampled Taylor n-bar line-source taper for a uniform array.

    The continuous distribution (period equal to ``count`` element spacings)
    is sampled at the element abscissae ``(i - (count-1)/2) / count`` and
    normalized to unit peak.  The synthesized broadside pattern carries
    ``n_bar - 1`` near-constant sidelobes at the design level.

    Parameters
    ----------
    count : int
        Number of elements (>= 2).
    sll_db : float
        Design sidelobe level, dB (negative, e.g. -30).
    n_bar : int
        Number of near-in sidelobes held at the design level, >= 2.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    if sll_db >= 0:
        raise ValueError("sll_db must be negative")
    if n_bar < 2:
        raise ValueError("n_bar must be at least 2")
    coeffs = _taylor_coefficients(sll_db, n_bar)
    x = (np.arange(count) - (count - 1) / 2.0) / count
    harmonics = np.arange(1, n_bar)
    w = 1.0 + 2.0 * np.sum(
        coeffs[:, None] * np.cos(TWO_PI * harmonics[:, None] * x[None, :]), axis=0
    )
    return TaperWeights(w / w.max(), sll_db=sll_db, n_bar=n_bar)


def reference_pattern(layout: PlankLayout, taper: TaperWeights, steer_deg,
                      sample_angles_deg) -> PatternCut:
    """Steered reference pattern of the fully-populated plank.

    F(theta_k) = sum_i a_i exp{j 2 pi xi_i (cos(theta_k) - cos(steer))},
    normalized to unit peak (the exact peak value sum(a_i) is attained at the
    steering angle, so normalization does not depend on the sample grid).
    """
    if layout.count != taper.count:
        raise ValueError("layout and taper must have matching element counts")
    angles = np.asarray(sample_angles_deg, dtype=float)
    du = np.cos(np.radians(angles)) - math.cos(math.radians(steer_deg))
    phases = TWO_PI * np.outer(du, layout.positions)
    values = np.exp(1j * phases) @ taper.amplitudes
    return PatternCut(angles, values / taper.amplitudes.sum())


def halfpower_width_u(cut: PatternCut) -> float:
    """Half of the -3 dB main-lobe width measured in u = cos(theta').

    Edges are located on the 10*log10 power scale with linear interpolation
    between adjacent samples.  Invariant under any positive rescaling of the
    cut.
    """
    power = cut.power
    peak_index = int(np.argmax(power))
    if power[peak_index] <= 0:
        raise DegeneratePatternError("all-zero cut")
    u = np.cos(np.radians(cut.angles_deg))
    edges = _half_power_edges(u, power, peak_index)
    if edges is None:
        raise DegeneratePatternError("no -3 dB crossing around the main lobe")
    return abs(edges[1] - edges[0]) / 2.0


@dataclass
class BeamPlan:
    """Elevation beam stack with exact -3 dB crossovers.

    Angles are in the plank frame (broadside = 90 deg).  By construction
    ``right_edge_deg[b] == left_edge_deg[b+1]`` bit-exactly.
    """

    steer_deg: np.ndarray
    left_edge_deg: np.ndarray
    right_edge_deg: np.ndarray
    delta_u: float

    def __post_init__(self):
        self.steer_deg = np.asarray(self.steer_deg, dtype=float)
        self.left_edge_deg = np.asarray(self.left_edge_deg, dtype=float)
        self.right_edge_deg = np.asarray(self.right_edge_deg, dtype=float)
        if not (self.steer_deg.shape == self.left_edge_deg.shape == self.right_edge_deg.shape):
            raise ValueError("steer and edge arrays must have equal lengths")
        if self.steer_deg.size > 1 and np.any(np.diff(self.steer_deg) <= 0):
            raise ValueError("steer angles must be strictly increasing")

    @property
    def count(self):
        return self.steer_deg.size

    @property
    def hpbw_deg(self):
        """-3 dB beamwidth of each beam (right edge minus left edge)."""
        return self.right_edge_deg - self.left_edge_deg

    @property
    def coverage_deg(self):
        """Achieved -3 dB coverage span in the plank frame."""
        return float(self.right_edge_deg[-1] - self.left_edge_deg[0])


def stack_beams(cut_broadside: PatternCut, start_left_edge_deg, count) -> BeamPlan:
    """Stack ``count`` beams with -3 dB crossovers from a starting edge.

    Uses the shift-invariance of the reference pattern in u-space: with du
    the measured half -3 dB width of the broadside cut, beam b is centered
    at u_b = cos(start) - (2b - 1) du and its edges sit at u_b +- du.

    Raises
    ------
    CoverageInfeasibleError
        If any beam center or edge would leave the visible range [-1, 1].
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if not 0.0 < start_left_edge_deg < 180.0:
        raise ValueError("start edge must lie inside (0, 180) degrees")
    du = halfpower_width_u(cut_broadside)
    u_start = math.cos(math.radians(start_left_edge_deg))
    edges_u = u_start - 2.0 * du * np.arange(count + 1)
    centers_u = (edges_u[:-1] + edges_u[1:]) / 2.0
    if np.any(np.abs(centers_u) > 1.0) or np.any(np.abs(edges_u) > 1.0):
        raise CoverageInfeasibleError(
            f"{count} beams of half-width {du:.4f} from {start_left_edge_deg} deg "
            "do not fit in the visible range"
        )
    steer = np.degrees(np.arccos(centers_u))
    left = np.degrees(np.arccos(edges_u[:-1]))
    right = np.degrees(np.arccos(edges_u[1:]))
    return BeamPlan(steer_deg=steer, left_edge_deg=left, right_edge_deg=right, delta_u=du)


# ---------------------------------------------------------------------------
# file exports

def export_beam_plan_json(plan: BeamPlan, path):
    doc = {
        "count": int(plan.count),
        "delta_u": float(plan.delta_u),
        "beams": [
            {
                "beam": b + 1,
                "steer_deg": float(plan.steer_deg[b]),
                "left_edge_deg": float(plan.left_edge_deg[b]),
                "right_edge_deg": float(plan.right_edge_deg[b]),
                "hpbw_deg": float(plan.hpbw_deg[b]),
            }
            for b in range(plan.count)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def load_beam_plan_json(path) -> BeamPlan:
    with open(path) as fh:
        doc = json.load(fh)
    beams = sorted(doc["beams"], key=lambda b: b["beam"])
    return BeamPlan(
        steer_deg=np.array([b["steer_deg"] for b in beams]),
        left_edge_deg=np.array([b["left_edge_deg"] for b in beams]),
        right_edge_deg=np.array([b["right_edge_deg"] for b in beams]),
        delta_u=doc["delta_u"],
    )


def export_layout_json(layout: PlankLayout, wavelength_m, path, taper: TaperWeights = None):
    doc = {
        "count": int(layout.count),
        "wavelength_m": float(wavelength_m),
        "positions_wl": [float(x) for x in layout.positions],
        "positions_m": [float(x * wavelength_m) for x in layout.positions],
    }
    if taper is not None:
        doc["taper"] = {
            "sll_db": float(taper.sll_db),
            "n_bar": int(taper.n_bar),
            "amplitudes": [float(a) for a in taper.amplitudes],
        }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def load_layout_json(path):
    """Load a layout export; returns (PlankLayout, TaperWeights | None)."""
    with open(path) as fh:
        doc = json.load(fh)
    layout = PlankLayout(np.array(doc["positions_wl"]))
    taper = None
    if "taper" in doc:
        t = doc["taper"]
        taper = TaperWeights(np.array(t["amplitudes"]), t["sll_db"], t["n_bar"])
    return layout, taper
