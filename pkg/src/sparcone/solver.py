"""Joint multi-beam sparse placement and excitation recovery.

The B reference beams are matched over a common candidate lattice of Q
positions.  Each beam contributes one real-valued regression task of
dimension 2K (stacked real/imaginary samples) against the 2K x 2Q block
dictionary ``[[Re A, -Im A], [Im A, Re A]]`` acting on stacked
real/imaginary weights; the real and imaginary columns of one lattice
position are tied to a single precision hyperparameter, and all B tasks
share the full hyperparameter vector, which forces a common position
support while leaving each beam its own complex excitations.

Hyperparameters are estimated by sequential marginal-likelihood (evidence)
maximization in the style of fast relevance-vector-machine learning: each
iteration adds, re-estimates or deletes the one tied pair whose update
yields the largest aggregate evidence increase over all tasks.  The task
noise precision is integrated out under a Gamma(beta1, beta2) hyper-prior,
so each task contributes a Student-t marginal; the assumed matching noise
variance ``sigma`` whitens the data before the solve.

Per-beam weights on the retained support are the posterior means
``[diag(a) + A^T A]^-1 A^T F`` and re-combine into complex excitations.
"""

from __future__ import annotations

import json
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .pattern import PatternCut, array_factor_cut, chi_cut
from .reference import PlankLayout, reference_pattern

TWO_PI = 2.0 * math.pi

_ALPHA_RATIOS = np.logspace(-9.0, 9.0, 37)  # coarse bracket for the 1D evidence search
_REFINE_STEPS = 60

# Empirical factor mapping the per-sample matching variance sigma to the
# whitening level of this formulation (the equilibrium mean-square misfit of
# the solve sits near SIGMA_CALIBRATION * 2*beta2 * sigma).  Calibrated once
# against the 22-element reference benchmark and left fixed.
_SIGMA_CALIBRATION = 20.0


class DegenerateSolutionError(RuntimeError):
    """The solver retained no lattice position (empty support)."""


class NumericalRankError(np.linalg.LinAlgError):
    """Linear system is numerically singular; carries a condition estimate."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class CandidateLattice:
    """Uniform grid of Q candidate element positions spanning [0, span]."""

    count: int
    span: float

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("lattice needs at least 2 candidate positions")
        if self.span <= 0:
            raise ValueError("lattice span must be positive")

    @property
    def positions(self):
        return np.linspace(0.0, self.span, self.count)

    @property
    def spacing(self):
        return self.span / (self.count - 1)


@dataclass(frozen=True)
class SolverConfig:
    """Control parameters of the multi-task solver.

    ``sigma`` is the assumed matching-error variance per complex pattern
    sample (the knob trading accuracy against sparseness); ``beta1`` and
    ``beta2`` are the shape/rate of the Gamma hyper-prior on the task noise
    precision; ``k_samples`` sets the number of pattern samples when targets
    are generated internally.
    """

    sigma: float = 1e-5
    beta1: float = 1e-1
    beta2: float = 5e-1
    k_samples: int = 44
    tol: float = 1e-8
    max_iter: int = 5000
    prune_threshold: float = 1e-8
    angle_grid: str = "edge-refined"

    def __post_init__(self):
        if self.sigma <= 0 or self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("sigma, beta1 and beta2 must be positive")
        if self.k_samples < 1:
            raise ValueError("k_samples must be at least 1")
        if self.angle_grid not in ("edge-refined", "uniform-u", "uniform-theta"):
            raise ValueError(
                "angle_grid must be 'edge-refined', 'uniform-u' or 'uniform-theta'"
            )


@dataclass
class SteeringMatrix:
    """Complex steering matrix and its realified block form.

    ``complex_matrix[k, q] = exp{j (2 pi / wavelength) xi_q cos(theta_k)}``;
    ``real_block`` is the 2K x 2Q matrix [[Re, -Im], [Im, Re]].
    """

    complex_matrix: np.ndarray
    real_block: np.ndarray
    angles_deg: np.ndarray
    positions: np.ndarray


@dataclass
class ExcitationSet:
    """Per-beam complex weights sharing one position support.

    ``support`` indexes the candidate lattice; ``positions`` are the
    corresponding along-plank coordinates (wavelengths); ``weights`` has
    shape (B, M).
    """

    support: np.ndarray
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=int)
        self.positions = np.asarray(self.positions, dtype=float)
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=complex))
        if self.weights.shape[1] != self.positions.size or self.positions.size != self.support.size:
            raise ValueError("support, positions and weights must agree in size")

    @property
    def n_beams(self):
        return self.weights.shape[0]

    @property
    def count(self):
        return self.positions.size

    def amplitudes(self):
        return np.abs(self.weights)

    def phases_deg(self):
        return np.degrees(np.angle(self.weights))


@dataclass
class SolverDiagnostics:
    """Solve trace: shared hyperparameters, iterations, evidence, residuals."""

    hyperparameters: np.ndarray
    iterations: int
    log_evidence: float
    residual_norms: np.ndarray
    converged: bool
    evidence_trace: list = field(default_factory=list)


def sample_angles_deg(k, kind="edge-refined"):
    """K elevation sample angles covering the visible range.

    ``uniform-u`` spaces samples uniformly in u = cos(theta) over [-1, 1]
    (ascending in theta); ``uniform-theta`` spaces them uniformly in theta.
    The default ``edge-refined`` grid is uniform in u with up to four extra
    samples per visible-space edge placed inside the outermost u cell:
    sparse layouts with mean spacing above half a wavelength develop
    quantization-lobe skirts at u = +-1 that a plain uniform grid cannot
    pin down between samples.
    """
    if k == 1:
        return np.array([90.0])
    if kind == "uniform-u":
        u = np.linspace(1.0, -1.0, k)
    elif kind == "uniform-theta":
        return np.linspace(0.0, 180.0, k)
    elif kind == "edge-refined":
        n_edge = min(4, k // 6)
        core = np.linspace(1.0, -1.0, k - 2 * n_edge)
        if n_edge:
            cell = core[0] - core[1]
            pads = (np.arange(1, n_edge + 1) / (n_edge + 1.0)) * cell
            u = np.sort(np.concatenate([core, 1.0 - pads, -1.0 + pads]))[::-1]
        else:
            u = core
    else:
        raise ValueError("kind must be 'edge-refined', 'uniform-u' or 'uniform-theta'")
    return np.degrees(np.arccos(np.clip(u, -1.0, 1.0)))


def build_steering_matrix(lattice: CandidateLattice, sample_angles, wavelength=1.0) -> SteeringMatrix:
    """Steering matrix over the candidate lattice at the sample angles."""
    angles = np.asarray(sample_angles, dtype=float)
    if angles.ndim != 1 or angles.size < 1:
        raise ValueError("sample_angles must be a non-empty 1D array")
    positions = lattice.positions
    u = np.cos(np.radians(angles))
    complex_matrix = np.exp(1j * (TWO_PI / wavelength) * np.outer(u, positions))
    re, im = complex_matrix.real, complex_matrix.imag
    real_block = np.block([[re, -im], [im, re]])
    return SteeringMatrix(complex_matrix, real_block, angles, positions)


def realify(values):
    """Stack complex sample vectors as real vectors [Re; Im] (last axis)."""
    values = np.asarray(values, dtype=complex)
    return np.concatenate((values.real, values.imag), axis=-1)


def posterior_mean(real_matrix, shared_hyperparams, data):
    """Posterior mean weights ``[diag(a) + A^T A]^-1 A^T F``.

    Hyperparameter entries of +inf suppress their columns exactly (zero
    weight).  Raises :class:`NumericalRankError` with a condition estimate
    when the reduced system is numerically singular.
    """
    A = np.asarray(real_matrix, dtype=float)
    a = np.asarray(shared_hyperparams, dtype=float)
    f = np.asarray(data, dtype=float)
    if A.ndim != 2 or a.shape != (A.shape[1],) or f.shape != (A.shape[0],):
        raise ValueError("inconsistent dimensions")
    if np.any(a < 0):
        raise ValueError("hyperparameters must be non-negative")
    weights = np.zeros(A.shape[1])
    keep = np.isfinite(a)
    if not keep.any():
        return weights
    Ak = A[:, keep]
    H = Ak.T @ Ak + np.diag(a[keep])
    rhs = Ak.T @ f
    try:
        chol = sla.cho_factor(H, lower=True)
        weights[keep] = sla.cho_solve(chol, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalRankError(
            "posterior system is numerically singular",
            condition=float(np.linalg.cond(H)),
        ) from exc
    return weights


class _EvidenceModel:
    """Per-iteration quantities of the aggregated Student-t evidence.

    All arrays are indexed by lattice position (group) q; each group ties
    the two realified columns q and q + Q.
    """

    def __init__(self, lam1, lam2, u1sq, u2sq, denom, n_tasks, kappa):
        self.lam1 = lam1
        self.lam2 = lam2
        self.u1sq = u1sq
        self.u2sq = u2sq
        self.denom = denom  # (Q, B): 2*beta2 + leave-one-out data term
        self.n_tasks = n_tasks
        self.kappa = kappa

    def delta(self, alpha):
        """Evidence change from giving each group precision alpha (vectorized)."""
        a = alpha[:, None]
        r = self.u1sq / (a + self.lam1[:, None]) + self.u2sq / (a + self.lam2[:, None])
        x = np.clip(r / self.denom, 0.0, 1.0 - 1e-12)
        log_det = np.log1p(self.lam1 / alpha) + np.log1p(self.lam2 / alpha)
        return -0.5 * self.n_tasks * log_det - self.kappa * np.log1p(-x).sum(axis=1)

    def maximize(self):
        """Best precision per group and the evidence change it achieves."""
        scale = np.maximum(self.lam1, 1e-300)
        table = np.empty((scale.size, _ALPHA_RATIOS.size))
        for t, ratio in enumerate(_ALPHA_RATIOS):
            table[:, t] = self.delta(scale * ratio)
        best = np.argmax(table, axis=1)
        lo = np.log(scale * _ALPHA_RATIOS[np.maximum(best - 1, 0)])
        hi = np.log(scale * _ALPHA_RATIOS[np.minimum(best + 1, _ALPHA_RATIOS.size - 1)])
        for _ in range(_REFINE_STEPS):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            keep_lo = self.delta(np.exp(m1)) < self.delta(np.exp(m2))
            lo = np.where(keep_lo, m1, lo)
            hi = np.where(keep_lo, hi, m2)
        alpha = np.exp((lo + hi) / 2.0)
        return alpha, self.delta(alpha)


def _symmetric_eigen_2x2(a, b, c):
    """Eigenvalues/rotation of symmetric [[a, c], [c, b]] (vectorized)."""
    mean = 0.5 * (a + b)
    half = np.sqrt(np.maximum(0.25 * (a - b) ** 2 + c**2, 0.0))
    lam1 = np.maximum(mean + half, 0.0)
    lam2 = np.maximum(mean - half, 0.0)
    t1 = lam1 - a
    norm = np.hypot(c, t1)
    safe = norm > 1e-300
    cos_psi = np.where(safe, np.divide(c, norm, where=safe, out=np.ones_like(norm)), 1.0)
    sin_psi = np.where(safe, np.divide(t1, norm, where=safe, out=np.zeros_like(norm)), 0.0)
    return lam1, lam2, cos_psi, sin_psi


def mt_bcs_solve(matrix: SteeringMatrix, targets, config: SolverConfig):
    """Solve the multi-beam sparse recovery problem.

    Parameters
    ----------
    matrix : SteeringMatrix
        Dictionary over the candidate lattice.
    targets : (B, 2K) array
        Realified reference-pattern samples, one row per beam (see
        :func:`realify`); peak-normalized by the caller.
    config : SolverConfig

    Returns
    -------
    (ExcitationSet, SolverDiagnostics)

    Raises
    ------
    DegenerateSolutionError
        If no lattice position is retained (e.g. all-zero targets).
    """
    phi = matrix.real_block
    n_rows, n_cols = phi.shape
    n_groups = n_cols // 2
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n_tasks = targets.shape[0]
    if targets.shape[1] != n_rows:
        raise ValueError("each target must have length 2K (realified)")

    # Whiten by the r.m.s. norm of the assumed K-sample noise vector
    # (per-sample variance sigma), so the evidence stops rewarding basis
    # additions once the mean-square sample misfit reaches the sigma level.
    n_samples = n_rows // 2
    scale = 1.0 / math.sqrt(_SIGMA_CALIBRATION * n_samples * config.sigma)
    t = targets * scale
    kappa = config.beta1 + 0.5 * n_rows

    gram = phi.T @ phi
    col_norm2 = np.diag(gram).copy()
    cross0 = gram[np.arange(n_groups), np.arange(n_groups) + n_groups].copy()
    phit = phi.T @ t.T  # (2Q, B)
    t_norm2 = np.einsum("bk,bk->b", t, t)

    alpha = np.full(n_groups, np.inf)
    groups: list[int] = []
    trace: list[float] = []
    converged = False
    iterations = 0

    def group_cols(group_list):
        cols = np.empty(2 * len(group_list), dtype=int)
        cols[0::2] = group_list
        cols[1::2] = np.asarray(group_list, dtype=int) + n_groups
        return cols

    for iterations in range(1, config.max_iter + 1):
        if groups:
            cols = group_cols(groups)
            alpha_cols = np.repeat(alpha[groups], 2)
            H = gram[np.ix_(cols, cols)] + np.diag(alpha_cols)
            chol = sla.cho_factor(H, lower=True)
            sigma_post = sla.cho_solve(chol, np.eye(cols.size))
            P = gram[:, cols]
            T1 = P @ sigma_post
            s_col = col_norm2 - np.einsum("ij,ij->i", T1, P)
            s_cross = cross0 - np.einsum("ij,ij->i", T1[:n_groups], P[n_groups:])
            mu = sigma_post @ phit[cols]
            q_mat = phit - P @ mu
            g_task = t_norm2 - np.einsum("cb,cb->b", phit[cols], mu)
            log_det_b = 2.0 * np.log(np.diag(chol[0])).sum() - np.log(alpha_cols).sum()
        else:
            s_col = col_norm2.copy()
            s_cross = cross0.copy()
            q_mat = phit.copy()
            g_task = t_norm2.copy()
            log_det_b = 0.0

        evidence = -0.5 * n_tasks * log_det_b - kappa * np.log(
            config.beta2 + 0.5 * g_task
        ).sum()
        if trace and evidence < trace[-1] - 1e-7 * (1.0 + abs(trace[-1])):
            raise RuntimeError("evidence decreased; numerical breakdown in solver")
        trace.append(float(evidence))

        s_a = s_col[:n_groups].copy()
        s_b = s_col[n_groups:].copy()
        s_c = s_cross.copy()
        q1 = q_mat[:n_groups].copy()
        q2 = q_mat[n_groups:].copy()
        denom = np.broadcast_to(2.0 * config.beta2 + g_task, (n_groups, n_tasks)).copy()

        unreliable = np.zeros(n_groups, dtype=bool)
        if groups:
            # leave-one-group-out statistics for the active pairs
            ga = np.asarray(groups, dtype=int)
            ag = alpha[ga]
            a_, b_, c_ = s_a[ga], s_b[ga], s_c[ga]
            e11 = 1.0 - a_ / ag
            e22 = 1.0 - b_ / ag
            e12 = -c_ / ag
            det = e11 * e22 - e12 * e12
            # det -> 0 means the pair is retained with negligible prior
            # precision; its leave-out statistics cancel catastrophically,
            # so skip updates of such groups this iteration
            unreliable[ga[det < 1e-9]] = True
            det = np.maximum(det, 1e-300)
            q1a, q2a = q1[ga], q2[ga]
            q1_out = (e22[:, None] * q1a - e12[:, None] * q2a) / det[:, None]
            q2_out = (-e12[:, None] * q1a + e11[:, None] * q2a) / det[:, None]
            quad = (
                (ag[:, None] - a_[:, None]) * q1_out**2
                - 2.0 * c_[:, None] * q1_out * q2_out
                + (ag[:, None] - b_[:, None]) * q2_out**2
            )
            prod = a_ * b_ - c_ * c_
            s_a[ga] = (a_ - prod / ag) / det
            s_b[ga] = (b_ - prod / ag) / det
            s_c[ga] = c_ / det
            q1[ga] = q1_out
            q2[ga] = q2_out
            denom[ga] = denom[ga] + quad / ag[:, None] ** 2

        lam1, lam2, cos_psi, sin_psi = _symmetric_eigen_2x2(s_a, s_b, s_c)
        u1 = cos_psi[:, None] * q1 + sin_psi[:, None] * q2
        u2 = -sin_psi[:, None] * q1 + cos_psi[:, None] * q2
        model = _EvidenceModel(lam1, lam2, u1**2, u2**2, denom, n_tasks, kappa)
        alpha_star, gain_star = model.maximize()

        delta = np.where(gain_star > 0.0, gain_star, -np.inf)
        action_alpha = alpha_star.copy()
        is_delete = np.zeros(n_groups, dtype=bool)
        if groups:
            ga = np.asarray(groups, dtype=int)
            current = model.delta(np.where(np.isfinite(alpha), alpha, 1.0))[ga]
            re_gain = gain_star[ga] - current
            del_gain = -current
            better_delete = del_gain > re_gain
            delta[ga] = np.where(better_delete, del_gain, re_gain)
            is_delete[ga[better_delete]] = True
        delta[unreliable] = -np.inf

        best = int(np.argmax(delta))
        best_gain = delta[best]
        if not np.isfinite(best_gain) or best_gain <= config.tol * max(1.0, abs(evidence)):
            converged = True
            break

        if is_delete[best]:
            groups.remove(best)
            alpha[best] = np.inf
        elif np.isfinite(alpha[best]):
            alpha[best] = action_alpha[best]
        else:
            groups.append(best)
            alpha[best] = action_alpha[best]

    if not groups:
        raise DegenerateSolutionError("solver retained no lattice position")

    support = np.array(sorted(groups), dtype=int)
    cols = group_cols(list(support))
    w = np.empty((cols.size, n_tasks))
    alpha_cols = np.repeat(alpha[support], 2)
    for b in range(n_tasks):
        w[:, b] = posterior_mean(phi[:, cols], alpha_cols, t[b])
    w /= scale  # undo the whitening
    gamma = (w[0::2] + 1j * w[1::2]).T  # (B, M)

    # prune positions whose weights are negligible for every beam
    amp = np.abs(gamma)
    rel = amp / np.maximum(amp.max(axis=1, keepdims=True), 1e-300)
    keep = (rel >= config.prune_threshold).any(axis=0)
    if not keep.all():
        support = support[keep]
        cols = group_cols(list(support))
        alpha_cols = np.repeat(alpha[support], 2)
        gamma = np.empty((n_tasks, support.size), dtype=complex)
        for b in range(n_tasks):
            w_b = posterior_mean(phi[:, cols], alpha_cols, t[b]) / scale
            gamma[b] = w_b[0::2] + 1j * w_b[1::2]

    excitations = ExcitationSet(
        support=support,
        positions=matrix.positions[support],
        weights=gamma,
    )
    residuals = np.array(
        [
            np.linalg.norm(targets[b] - phi[:, cols] @ np.column_stack(
                (gamma[b].real, gamma[b].imag)
            ).reshape(-1))
            for b in range(n_tasks)
        ]
    )
    diagnostics = SolverDiagnostics(
        hyperparameters=alpha,
        iterations=iterations,
        log_evidence=trace[-1],
        residual_norms=residuals,
        converged=converged,
        evidence_trace=trace,
    )
    return excitations, diagnostics


def _peak_magnitude(cut: PatternCut):
    """Peak |F| of a sampled cut, refined by parabolic interpolation in u."""
    mag = np.abs(cut.values)
    i = int(np.argmax(mag))
    if i == 0 or i == mag.size - 1:
        return float(mag[i])
    u = np.cos(np.radians(cut.angles_deg[i - 1:i + 2]))
    y = mag[i - 1:i + 2]
    h1, h2 = u[1] - u[0], u[2] - u[1]
    s1, s2 = (y[1] - y[0]) / h1, (y[2] - y[1]) / h2
    curvature = 2.0 * (s2 - s1) / (h1 + h2)
    if curvature >= 0:
        return float(y[1])
    slope = (s1 * h2 + s2 * h1) / (h1 + h2)
    return float(y[1] - slope**2 / (2.0 * curvature))


def sparsify(reference_patterns, lattice: CandidateLattice, config: SolverConfig,
             fine_reference=None):
    """End-to-end sparse plank synthesis against B reference beams.

    Parameters
    ----------
    reference_patterns : sequence of PatternCut
        Peak-normalized reference beams, all sampled at the same K angles
        (these samples are the solve targets).
    lattice : CandidateLattice
    config : SolverConfig
    fine_reference : sequence of PatternCut, optional
        Densely sampled peak-normalized reference beams used for the
        matching-error quadrature; defaults to the solve samples.

    Returns
    -------
    (PlankLayout, ExcitationSet, ndarray, SolverDiagnostics)
        Retained layout (re-origined to 0), per-beam excitations rescaled to
        unit synthesized peak, the per-beam matching errors chi, and the
        solve diagnostics.
    """
    cuts = list(reference_patterns)
    if not cuts:
        raise ValueError("need at least one reference pattern")
    angles = cuts[0].angles_deg
    for cut in cuts[1:]:
        if cut.angles_deg.shape != angles.shape or not np.allclose(cut.angles_deg, angles):
            raise ValueError("all reference patterns must share the same angle grid")
    matrix = build_steering_matrix(lattice, angles)
    targets = realify(np.stack([cut.values for cut in cuts]))
    excitations, diagnostics = mt_bcs_solve(matrix, targets, config)

    eval_refs = list(fine_reference) if fine_reference is not None else cuts
    eval_angles = eval_refs[0].angles_deg
    chi = np.empty(len(cuts))
    for b, ref in enumerate(eval_refs):
        synth = array_factor_cut(excitations.positions, excitations.weights[b], eval_angles)
        scale = _peak_magnitude(synth)
        excitations.weights[b] /= scale
        synth = PatternCut(eval_angles, synth.values / scale)
        chi[b] = chi_cut(ref, synth)

    layout = PlankLayout(excitations.positions - excitations.positions[0])
    return layout, excitations, chi, diagnostics


@dataclass
class ParetoPoint:
    """One evaluated solver configuration in the (M, chi) plane."""

    m: int
    chi: float
    q: int
    k: int
    sigma: float
    beta1: float
    beta2: float
    converged: bool
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def pareto_front(points):
    """Non-dominated subset minimizing both M and chi (ties kept)."""
    valid = [p for p in points if p.ok]
    front = []
    for p in valid:
        dominated = any(
            (q.m <= p.m and q.chi <= p.chi and (q.m < p.m or q.chi < p.chi))
            for q in valid
        )
        if not dominated:
            front.append(p)
    return sorted(front, key=lambda p: (p.m, p.chi))


def make_reference_targets(layout, taper, beam_plan, k, kind="edge-refined"):
    """Reference beam cuts sampled at K solver angles."""
    angles = sample_angles_deg(k, kind)
    return [
        reference_pattern(layout, taper, steer, angles) for steer in beam_plan.steer_deg
    ]


def _run_pareto_point(args):
    layout, taper, beam_plan, span, q_count, config, fine = args
    lattice = CandidateLattice(q_count, span)
    cuts = make_reference_targets(layout, taper, beam_plan, config.k_samples, config.angle_grid)
    try:
        _, exc, chi, diag = sparsify(cuts, lattice, config, fine_reference=fine)
        return ParetoPoint(
            m=int(exc.count), chi=float(chi.mean()), q=q_count, k=config.k_samples,
            sigma=config.sigma, beta1=config.beta1, beta2=config.beta2,
            converged=bool(diag.converged),
        )
    except (DegenerateSolutionError, NumericalRankError, np.linalg.LinAlgError,
            RuntimeError, ValueError) as exc_info:
        return ParetoPoint(
            m=0, chi=math.nan, q=q_count, k=config.k_samples, sigma=config.sigma,
            beta1=config.beta1, beta2=config.beta2, converged=False,
            error=f"{type(exc_info).__name__}: {exc_info}",
        )


def pareto_sweep(reference_layout, taper, beam_plan, grid, *, span=None,
                 workers=1, fine_samples=2001):
    """Sweep solver configurations and trace the (M, chi) trade-off.

    Parameters
    ----------
    reference_layout, taper, beam_plan
        The reference design whose beams every grid point must match.
    grid : iterable of (q_count, SolverConfig)
        Lattice size and solver configuration per point.
    span : float, optional
        Lattice span; defaults to the reference aperture.
    workers : int
        Process count for concurrent evaluation; results are merged in grid
        order so the output is independent of scheduling.

    Returns
    -------
    (points, front) : (list of ParetoPoint, list of ParetoPoint)
        Every evaluated point (failed runs carry ``error``) and the
        non-dominated frontier.
    """
    span = reference_layout.span if span is None else span
    entries = list(grid)
    if not entries:
        raise ValueError("grid must contain at least one configuration")
    fine_angles = np.linspace(0.0, 180.0, fine_samples)
    fine = [
        reference_pattern(reference_layout, taper, steer, fine_angles)
        for steer in beam_plan.steer_deg
    ]
    jobs = [
        (reference_layout, taper, beam_plan, span, int(q_count), config, fine)
        for q_count, config in entries
    ]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_run_pareto_point, jobs))
    else:
        points = [_run_pareto_point(job) for job in jobs]
    return points, pareto_front(points)


# ---------------------------------------------------------------------------
# file exports

def export_excitations_json(excitations: ExcitationSet, wavelength_m, path,
                            steer_deg=None):
    doc = {
        "count": int(excitations.count),
        "wavelength_m": float(wavelength_m),
        "support": [int(s) for s in excitations.support],
        "positions_wl": [float(x) for x in excitations.positions],
        "positions_m": [float(x * wavelength_m) for x in excitations.positions],
        "beams": [
            {
                "beam": b + 1,
                "steer_deg": (float(steer_deg[b]) if steer_deg is not None else None),
                "amplitude": [float(a) for a in np.abs(excitations.weights[b])],
                "phase_deg": [float(p) for p in np.degrees(np.angle(excitations.weights[b]))],
            }
            for b in range(excitations.n_beams)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def load_excitations_json(path) -> ExcitationSet:
    with open(path) as fh:
        doc = json.load(fh)
    beams = sorted(doc["beams"], key=lambda b: b["beam"])
    weights = np.array(
        [
            np.array(b["amplitude"]) * np.exp(1j * np.radians(b["phase_deg"]))
            for b in beams
        ]
    )
    return ExcitationSet(
        support=np.array(doc["support"], dtype=int),
        positions=np.array(doc["positions_wl"]),
        weights=weights,
    )


def export_pareto_csv(points, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "chi", "q", "k", "sigma", "beta1", "beta2", "converged", "error"])
        for p in points:
            writer.writerow(
                [
                    p.m, repr(float(p.chi)), p.q, p.k, repr(float(p.sigma)),
                    repr(float(p.beta1)), repr(float(p.beta2)), int(p.converged),
                    p.error or "",
                ]
            )


def load_pareto_csv(path):
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            points.append(
                ParetoPoint(
                    m=int(row["m"]), chi=float(row["chi"]), q=int(row["q"]),
                    k=int(row["k"]), sigma=float(row["sigma"]), beta1=float(row["beta1"]),
                    beta2=float(row["beta2"]), converged=bool(int(row["converged"])),
                    error=row["error"] or None,
                )
            )
    return points
