"""Photoluminescence spectrum from the quantum regression formula, peak finding and tracking.

S(omega) is the two-sided transform of <a+(tau) a(0)>, evaluated as 2 Re of the one-sided
transform. Both methods work inside the coherence sector N_i - N_j = -1 that holds a rho_ss.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from lmfit.models import ConstantModel, LorentzianModel
from scipy import linalg, signal
from scipy.optimize import linear_sum_assignment

from .errors import DefectiveEigenbasisError, FitError, NoPeaksError
from .liouville import Superoperator, sector_indices, vec
from .operators import DensityMatrix, bare_operators

logger = logging.getLogger(__name__)

# eigenvector condition number above which the resolvent is not trusted
COND_MAX = 1e8
DEFAULT_POINTS = 2001
DEFAULT_HALF_SPAN_G = 6.0
DEFAULT_DTAU = 0.05
RESIDUAL_FLAG = 0.02


@dataclass(frozen=True, eq=False)
class Spectrum:
    omega: np.ndarray
    intensity: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        intensity = np.asarray(self.intensity, dtype=float)
        if omega.ndim != 1 or omega.shape != intensity.shape:
            raise ValueError("omega and intensity must be 1-D arrays of equal length")
        if omega.size < 2 or np.any(np.diff(omega) <= 0):
            raise ValueError("omega grid must be strictly increasing")
        peak = np.abs(intensity).max()
        if intensity.min() < -1e-12 * peak:
            raise ValueError(f"spectrum has negative intensity {intensity.min():.3e} (max {peak:.3e})")
        if self.normalized and not np.isclose(intensity.max(), 1.0):
            raise ValueError("normalized spectrum must have maximum 1")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "intensity", intensity)

    def normalize(self) -> Spectrum:
        peak = self.intensity.max()
        if peak <= 0:
            raise ValueError("cannot normalize a spectrum without positive intensity")
        return Spectrum(self.omega, self.intensity / peak, normalized=True)

    @property
    def step(self) -> float:
        return float(np.median(np.diff(self.omega)))


@dataclass(frozen=True)
class Peak:
    center: float
    height: float
    fwhm: float

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be > 0, got {self.fwhm}")


@dataclass(frozen=True)
class LorentzianFit:
    peak: Peak
    background: float
    residual_norm: float
    relative_residual: float
    flagged: bool


@dataclass(frozen=True)
class PeakSample:
    T: float
    center: float
    fwhm: float
    height: float
    fwhm_halfheight: float
    merged: bool = False
    ambiguous: bool = False


@dataclass
class PeakTrajectory:
    label: str
    samples: list[PeakSample] = field(default_factory=list)

    def temperatures(self) -> np.ndarray:
        return np.array([s.T for s in self.samples])

    def centers(self) -> np.ndarray:
        return np.array([s.center for s in self.samples])

    def fwhms(self) -> np.ndarray:
        return np.array([s.fwhm for s in self.samples])


@dataclass(frozen=True)
class _Sector:
    """Generator restricted to N_i - N_j = -1, shifted by the frame -i omega_ref"""
    indices: np.ndarray
    block: np.ndarray
    omega_ref: float
    x0: np.ndarray
    readout: np.ndarray


def _emission_sector(gen: Superoperator, rho_ss: DensityMatrix) -> _Sector:
    space = gen.space
    ops = bare_operators(space)
    indices = sector_indices(space, -1)
    block = gen.block(indices)
    omega_ref = float(np.mean(np.imag(np.diag(block)))) if indices.size else 0.0
    shifted = block - 1j * omega_ref * np.eye(indices.size)
    x0 = vec(ops.a.mat @ rho_ss.mat)[indices]
    # tr(A X) = vec(A^T) . vec(X)
    readout = vec(ops.a.dag().mat.T)[indices]
    return _Sector(indices=indices, block=shifted, omega_ref=omega_ref, x0=x0, readout=readout)


def default_omega_grid(
    omega0: float,
    g: float,
    points: int = DEFAULT_POINTS,
    half_span: float = DEFAULT_HALF_SPAN_G,
) -> np.ndarray:
    """Uniform grid over [omega0 - half_span g, omega0 + half_span g]"""
    return np.linspace(omega0 - half_span * g, omega0 + half_span * g, points)


def correlation(gen: Superoperator, rho_ss: DensityMatrix, tau_grid: Sequence[float]) -> np.ndarray:
    """g(tau) = tr(a+ exp(L tau)[a rho_ss]) on a grid of tau >= 0"""
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus < 0):
        raise ValueError("tau grid must be non-negative")
    sector = _emission_sector(gen, rho_ss)
    order = np.argsort(taus, kind="stable")
    out = np.empty(taus.size, dtype=complex)
    x = sector.x0.copy()
    t_prev = 0.0
    for k in order:
        t = taus[k]
        if t > t_prev:
            x = linalg.expm(sector.block * (t - t_prev)) @ x
            t_prev = t
        out[k] = sector.readout @ x * np.exp(1j * sector.omega_ref * t)
    return out


@dataclass(frozen=True)
class SpectralMode:
    eigenvalue: complex
    weight: complex

    @property
    def position(self) -> float:
        return float(self.eigenvalue.imag)

    @property
    def linewidth(self) -> float:
        return float(-self.eigenvalue.real)

    @property
    def dominance(self) -> float:
        return float(abs(self.weight) / max(abs(self.eigenvalue.real), 1e-300))


def spectral_modes(gen: Superoperator, rho_ss: DensityMatrix) -> tuple[list[SpectralMode], float]:
    """Eigen-decomposition of the emission sector; returns modes (most dominant first)
    and the eigenvector condition number."""
    sector = _emission_sector(gen, rho_ss)
    mu, right = linalg.eig(sector.block)
    cond = float(np.linalg.cond(right))
    coeff = linalg.solve(right, sector.x0)
    weights = (sector.readout @ right) * coeff
    modes = [SpectralMode(complex(m + 1j * sector.omega_ref), complex(w)) for m, w in zip(mu, weights)]
    modes.sort(key=lambda mode: (-mode.dominance, mode.position))
    return modes, cond


def emission_spectrum(
    gen: Superoperator,
    rho_ss: DensityMatrix,
    omega_grid: Sequence[float],
    fallback: bool = True,
    normalize: bool = False,
) -> Spectrum:
    """S(omega) = 2 Re sum_k w_k / (i omega - lambda_k) over the emission-sector modes.

    Falls back to the time-domain method when the eigenbasis is near defective.
    """
    omega = np.asarray(omega_grid, dtype=float)
    sector = _emission_sector(gen, rho_ss)
    if np.abs(sector.x0).max(initial=0.0) < 1e-14:
        logger.warning("a rho_ss vanishes; spectrum is identically zero")
        return Spectrum(omega, np.zeros_like(omega))
    modes, cond = spectral_modes(gen, rho_ss)
    logger.debug(f"emission sector: {len(modes)} modes, eigenvector condition {cond:.3e}")
    if cond > COND_MAX:
        if not fallback:
            raise DefectiveEigenbasisError(
                f"eigenvector condition number {cond:.3e} exceeds {COND_MAX:.0e}", context={"cond": cond}
            )
        logger.warning(f"near-defective eigenbasis (cond={cond:.3e}); using time-domain spectrum")
        return time_domain_spectrum(gen, rho_ss, omega, normalize=normalize)
    lam = np.array([m.eigenvalue for m in modes])
    w = np.array([m.weight for m in modes])
    # shift both omega and lambda by the frame to keep the denominators well conditioned
    nu = omega - sector.omega_ref
    mu = lam - 1j * sector.omega_ref
    intensity = 2.0 * np.real(np.sum(w[None, :] / (1j * nu[:, None] - mu[None, :]), axis=1))
    spec = Spectrum(omega, intensity)
    return spec.normalize() if normalize else spec


def time_domain_spectrum(
    gen: Superoperator,
    rho_ss: DensityMatrix,
    omega_grid: Sequence[float],
    dtau: float = DEFAULT_DTAU,
    rtol: float = 1e-12,
    max_steps: int = 2_000_000,
    normalize: bool = False,
) -> Spectrum:
    """Trapezoid transform of the sampled correlation with the first end-point correction.

    The correlation is propagated in the rotating frame until the sector state has decayed
    by `rtol`.
    """
    omega = np.asarray(omega_grid, dtype=float)
    sector = _emission_sector(gen, rho_ss)
    step = linalg.expm(sector.block * dtau)
    x = sector.x0.copy()
    norm0 = np.linalg.norm(x)
    if norm0 < 1e-14:
        return Spectrum(omega, np.zeros_like(omega))
    samples = [sector.readout @ x]
    while np.linalg.norm(x) > rtol * norm0:
        if len(samples) >= max_steps:
            logger.warning(f"correlation truncated after {max_steps} steps (norm {np.linalg.norm(x) / norm0:.3e})")
            break
        x = step @ x
        samples.append(sector.readout @ x)
    g_rot = np.array(samples)
    logger.debug(f"time-domain spectrum: {g_rot.size} correlation samples, dtau={dtau}")
    taus = dtau * np.arange(g_rot.size)
    weights = np.ones(g_rot.size)
    weights[0] = 0.5
    slope0 = sector.readout @ (sector.block @ sector.x0)
    nu = omega - sector.omega_ref
    intensity = np.empty(omega.size)
    chunk = 64
    for start in range(0, nu.size, chunk):
        part = nu[start:start + chunk]
        phases = np.exp(-1j * np.outer(part, taus))
        trapezoid = dtau * (phases @ (weights * g_rot))
        correction = dtau ** 2 / 12.0 * (slope0 - 1j * part * g_rot[0])
        intensity[start:start + chunk] = 2.0 * np.real(trapezoid + correction)
    spec = Spectrum(omega, intensity)
    return spec.normalize() if normalize else spec


def _half_height_width(omega: np.ndarray, y: np.ndarray, i: int) -> float | None:
    """Width at half the peak height by walking outwards; None if a valley interrupts"""
    half = 0.5 * y[i]

    def walk(direction: int) -> float | None:
        j = i
        while 0 <= j + direction < y.size:
            k = j + direction
            if y[k] > y[j]:
                return None
            if y[k] <= half:
                frac = (y[j] - half) / (y[j] - y[k])
                return omega[j] + frac * (omega[k] - omega[j])
            j = k
        return None

    left, right = walk(-1), walk(+1)
    if left is None or right is None:
        return None
    return right - left


def find_peaks(s: Spectrum, min_prominence: float = 1e-3, max_peaks: int | None = 2) -> list[Peak]:
    """Local maxima with prominence >= min_prominence * max, sorted by center.

    In two-peak mode (max_peaks=2) only the most prominent ones are kept.
    """
    y = s.intensity
    peak_max = y.max()
    if peak_max <= 0:
        raise NoPeaksError("spectrum has no positive intensity")
    idx, props = signal.find_peaks(y, prominence=min_prominence * peak_max)
    if idx.size == 0:
        raise NoPeaksError("no peak passes the prominence filter")
    order = np.argsort(props["prominences"])[::-1]
    if max_peaks is not None:
        order = order[:max_peaks]
    idx = np.sort(idx[order])
    fallback_widths = signal.peak_widths(y, idx, rel_height=0.5)
    grid_index = np.arange(y.size)
    peaks = []
    for n, i in enumerate(idx):
        width = _half_height_width(s.omega, y, i)
        if width is None:
            left = np.interp(fallback_widths[2][n], grid_index, s.omega)
            right = np.interp(fallback_widths[3][n], grid_index, s.omega)
            width = right - left
        if width / s.step < 5:
            logger.warning(f"peak at {s.omega[i]:.4f} spans fewer than 5 grid points")
        peaks.append(Peak(center=float(s.omega[i]), height=float(y[i]), fwhm=float(width)))
    return peaks


def lorentzian_fit(
    s: Spectrum,
    peak: Peak,
    half_width: float | None = None,
    max_nfev: int = 2000,
    residual_flag: float = RESIDUAL_FLAG,
) -> LorentzianFit:
    """Least-squares single Lorentzian plus constant background around `peak`.

    The window defaults to +-2.5 FWHM of the initial estimate.
    """
    if half_width is None:
        half_width = 2.5 * peak.fwhm
    mask = np.abs(s.omega - peak.center) <= half_width
    if mask.sum() < 5:
        raise FitError(f"fit window around {peak.center:.4f} has fewer than 5 points")
    x = s.omega[mask] - peak.center
    y = s.intensity[mask]

    model = LorentzianModel() + ConstantModel()
    params = model.make_params(
        amplitude=peak.height * np.pi * peak.fwhm / 2,
        center=0.0,
        sigma=peak.fwhm / 2,
        c=float(min(y.min(), 0.0)),
    )
    params["sigma"].set(min=1e-12)
    result = model.fit(y, params, x=x, max_nfev=max_nfev, fit_kws={"xtol": 1e-13, "ftol": 1e-13})
    if not result.success:
        raise FitError(f"Lorentzian fit at {peak.center:.4f} did not converge: {result.message}")

    residual_norm = float(np.linalg.norm(result.residual))
    relative = residual_norm / max(float(np.linalg.norm(y)), 1e-300)
    fitted = Peak(
        center=float(result.params["center"].value + peak.center),
        height=float(result.params["height"].value),
        fwhm=float(result.params["fwhm"].value),
    )
    flagged = relative > residual_flag
    if flagged:
        logger.warning(f"poor single-Lorentzian fit at {fitted.center:.4f} (relative residual {relative:.3e})")
    return LorentzianFit(
        peak=fitted,
        background=float(result.params["c"].value),
        residual_norm=residual_norm,
        relative_residual=relative,
        flagged=flagged,
    )


def _measure(s: Spectrum, peaks: list[Peak], fit: bool) -> list[tuple[Peak, float]]:
    """Refine peaks by fitting; returns (peak, half-height fwhm) pairs"""
    out = []
    for k, p in enumerate(peaks):
        if not fit:
            out.append((p, p.fwhm))
            continue
        half_width = 2.5 * p.fwhm
        for other in peaks[:k] + peaks[k + 1:]:
            half_width = min(half_width, 0.5 * abs(other.center - p.center))
        try:
            out.append((lorentzian_fit(s, p, half_width=half_width).peak, p.fwhm))
        except FitError as e:
            logger.warning(f"{e}; keeping the half-height estimate")
            out.append((p, p.fwhm))
    return out


def track_peaks(
    sweep: Sequence[tuple[float, Spectrum]],
    bare_energies: Callable[[float], tuple[float, float]],
    min_prominence: float = 1e-3,
    fit: bool = True,
    tie_tol: float = 1e-6,
    labels: str = "continuity",
) -> tuple[PeakTrajectory, PeakTrajectory]:
    """Follow the C (cavity-like) and X (exciton-like) peaks across a temperature sweep.

    Labels are seeded at the lowest temperature by proximity to the bare omega_c(T) and
    omega_x(T) and then carried by nearest-center continuity. With labels="bare" every
    temperature is labelled by proximity to the bare energies instead, the identification
    used when comparing with measured spectra; through the crossover C then stays on the
    cavity side rather than following the anticrossing branch.
    """
    if labels not in ("continuity", "bare"):
        raise ValueError(f"unknown peak labelling: {labels}")
    traj_c, traj_x = PeakTrajectory("C"), PeakTrajectory("X")
    previous: np.ndarray | None = None
    for T, spec in sorted(sweep, key=lambda item: item[0]):
        measured = _measure(spec, find_peaks(spec, min_prominence, max_peaks=2), fit)
        if previous is None or labels == "bare":
            reference = np.array(bare_energies(T))
        else:
            reference = previous
        centers = np.array([p.center for p, _ in measured])
        ambiguous = False
        if len(measured) == 1:
            chosen = [0, 0]
            merged = True
        else:
            cost = np.abs(reference[:, None] - centers[None, :])
            rows, cols = linear_sum_assignment(cost)
            chosen = [int(cols[list(rows).index(0)]), int(cols[list(rows).index(1)])]
            straight = cost[0, 0] + cost[1, 1]
            swapped = cost[0, 1] + cost[1, 0]
            ambiguous = abs(straight - swapped) < tie_tol
            merged = False
            if ambiguous:
                logger.warning(f"peak labels ambiguous at T={T} K")
        if merged:
            logger.warning(f"only one peak resolved at T={T} K; C and X marked merged")
        for traj, k in ((traj_c, chosen[0]), (traj_x, chosen[1])):
            p, half = measured[k]
            traj.samples.append(PeakSample(
                T=float(T), center=p.center, fwhm=p.fwhm, height=p.height,
                fwhm_halfheight=half, merged=merged, ambiguous=ambiguous,
            ))
        if merged and previous is not None:
            # keep the last resolved pair as the continuity reference
            continue
        previous = np.array([measured[chosen[0]][0].center, measured[chosen[1]][0].center])
    return traj_c, traj_x


def relative_deviation(a: Spectrum, b: Spectrum) -> float:
    """max |S_a - S_b| / max S_a on a shared grid"""
    if a.omega.shape != b.omega.shape or not np.allclose(a.omega, b.omega):
        raise ValueError("spectra are on different grids")
    return float(np.max(np.abs(a.intensity - b.intensity)) / a.intensity.max())


