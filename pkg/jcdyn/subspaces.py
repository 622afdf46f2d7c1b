"""One-photon transition sectors of the no-gain Liouvillian.

The sector (n, n-1) holds the coherences between rung n and rung n-1 of the JC ladder,
in the fixed order

    |n,0><n-1,0|,  |n-1,1><n-1,0|,  |n,0><n-2,1|,  |n-1,1><n-2,1|

(only the first two exist for n = 1). Matrices are negated so that Re(lambda) is a
linewidth and Im(lambda) a position relative to the cavity frequency.

Branch labels (s, s') are seeded at P_theta = 0 from the JC transition frequencies
-s' (R_n + s R_{n-1}) with R_m = sqrt(m g^2 + Delta^2 / 4) (n = 1: Delta/2 - s' R_1), so
that (-,-) and (-,+) are the pair that coalesces at the exceptional point of every rung.
Past the coalescence (or the avoided crossing when Delta != 0) the pair differs in
linewidth, and (-,-) always names the narrow, photon-like member.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.optimize import linear_sum_assignment

from .errors import LabelAmbiguityError
from .liouville import no_gain_liouvillian
from .operators import SystemParams, build_space

logger = logging.getLogger(__name__)

Source = Literal["oracle", "printed"]
Label = tuple[str, str]

LABELS_N1: list[Label] = [("-", "+"), ("-", "-")]
LABELS: list[Label] = [("+", "+"), ("+", "-"), ("-", "+"), ("-", "-")]
EP_PAIR: tuple[Label, Label] = (("-", "-"), ("-", "+"))

TIE_RTOL = 1e-7          # label ambiguity, relative to g
EP_GAP_RTOL = 1e-6       # coalescence, relative to g
EP_OVERLAP = 1 - 1e-4    # eigenvector parallelism required for an EP
SCAN_POINTS = 200
MAX_SUBDIVISION = 12


@dataclass(frozen=True)
class SubspaceParams:
    n: int
    g: float
    kappa: float
    gamma_x: float
    P_theta: float
    Delta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        for name in ("g", "kappa", "gamma_x", "P_theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_system(cls, n: int, params: SystemParams) -> SubspaceParams:
        return cls(n=n, g=params.g, kappa=params.kappa, gamma_x=params.gamma_x,
                   P_theta=params.P_theta, Delta=params.delta)


def ngl_matrix(p: SubspaceParams) -> np.ndarray:
    """The 4x4 one-photon transition matrix exactly as printed (kept for the comparison report)"""
    n = p.n
    om_n = p.g * math.sqrt(n)
    om_m = p.g * math.sqrt(n - 1)
    z = -n * p.P_theta + 4j * p.Delta
    corner = math.sqrt(n * (n - 1)) * p.P_theta
    return np.array([
        [(p.kappa - (2 * n - 1) * p.P_theta) / 2, -1j * om_m, 1j * om_n, 0],
        [-1j * om_m, (p.gamma_x + z) / 2, 0, 1j * om_n],
        [1j * om_n, 0, (2 * p.kappa + p.P_theta + np.conj(z) - p.gamma_x) / 2, -1j * om_m],
        [corner, 1j * om_n, -1j * om_m, p.kappa / 2],
    ], dtype=complex)


def coherence_components(n: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """(ket, bra) bare states of the sector, as ((photons, qd), (photons, qd))"""
    comps = [((n, 0), (n - 1, 0)), ((n - 1, 1), (n - 1, 0))]
    if n >= 2:
        comps += [((n, 0), (n - 2, 1)), ((n - 1, 1), (n - 2, 1))]
    return comps


def oracle_block(p: SubspaceParams, n_max: int | None = None) -> np.ndarray:
    """Restriction of the no-gain Liouvillian to the (n, n-1) sector, negated.

    Built in the frame omega_c = 0, omega_x = Delta, so no common offset remains.
    """
    space = build_space(n_max if n_max is not None else p.n + 1)
    if space.n_max < p.n:
        raise ValueError(f"n_max={space.n_max} cannot hold rung n={p.n}")
    params = SystemParams(g=p.g, kappa=p.kappa, gamma_x=p.gamma_x, P_x=0.0,
                          P_theta=p.P_theta, omega_x=p.Delta, omega_c=0.0)
    gen = no_gain_liouvillian(space, params)
    d = space.dim
    idx = [space.index(*ket) + space.index(*bra) * d for ket, bra in coherence_components(p.n)]
    return -gen.block(np.array(idx))


def _matrix(p: SubspaceParams, source: Source) -> np.ndarray:
    if source == "oracle":
        return oracle_block(p)
    if source == "printed":
        return ngl_matrix(p)
    raise ValueError(f"Unknown source: {source}")


def _labels_for(size: int) -> list[Label]:
    return LABELS_N1 if size == 2 else LABELS


def seed_frequencies(p: SubspaceParams, size: int) -> dict[Label, float]:
    """JC transition frequency (relative to omega_c) attached to every label"""
    def rung(m: int) -> float:
        return math.sqrt(m * p.g ** 2 + p.Delta ** 2 / 4)

    sign = {"+": 1.0, "-": -1.0}
    out = {}
    for s, sp in _labels_for(size):
        if p.n == 1:
            out[(s, sp)] = p.Delta / 2 - sign[sp] * rung(1)
        else:
            out[(s, sp)] = -sign[sp] * (rung(p.n) + sign[s] * rung(p.n - 1))
    return out


@dataclass(frozen=True, eq=False)
class TransitionEigen:
    n: int
    params: SubspaceParams
    source: str
    labels: list[Label]
    lam: np.ndarray
    eigvecs: np.ndarray          # columns, in the sector component order
    ambiguous: bool = False

    @property
    def omega(self) -> np.ndarray:
        return self.lam.imag

    @property
    def Gamma(self) -> np.ndarray:
        return self.lam.real

    def index(self, label: Label) -> int:
        return self.labels.index(label)

    def eigenvalue(self, label: Label) -> complex:
        return complex(self.lam[self.index(label)])

    def eigenvector(self, label: Label) -> np.ndarray:
        return self.eigvecs[:, self.index(label)]


def _sorted_eig(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs ordered by Re then Im ascending"""
    lam, vecs = linalg.eig(mat)
    order = np.lexsort((np.round(lam.imag, 12), np.round(lam.real, 12)))
    return lam[order], vecs[:, order]


def _min_gap(lam: np.ndarray) -> float:
    if lam.size < 2:
        return math.inf
    diff = np.abs(lam[:, None] - lam[None, :])
    return float(diff[~np.eye(lam.size, dtype=bool)].min())


def _seed(p: SubspaceParams, source: Source) -> TransitionEigen:
    """Labelled eigenpairs at P_theta = 0"""
    p0 = replace(p, P_theta=0.0)
    lam, vecs = _sorted_eig(_matrix(p0, source))
    labels = _labels_for(lam.size)
    targets = seed_frequencies(p0, lam.size)
    cost = np.abs(lam.imag[:, None] - np.array([targets[lb] for lb in labels])[None, :])
    rows, cols = linear_sum_assignment(cost)
    assigned = [labels[c] for c in cols[np.argsort(rows)]]
    order = [assigned.index(lb) for lb in labels]
    return TransitionEigen(n=p.n, params=p0, source=source, labels=labels,
                           lam=lam[order], eigvecs=vecs[:, order])


def _interpolate(a: SubspaceParams, b: SubspaceParams, t: float) -> SubspaceParams:
    def mix(x: float, y: float) -> float:
        return x + t * (y - x)

    return replace(b, g=mix(a.g, b.g), kappa=mix(a.kappa, b.kappa), gamma_x=mix(a.gamma_x, b.gamma_x),
                   P_theta=mix(a.P_theta, b.P_theta), Delta=mix(a.Delta, b.Delta))


def _step(prev: TransitionEigen, target: SubspaceParams, depth: int = 0) -> TransitionEigen:
    """Nearest-neighbour continuation of the labels from `prev` to `target`"""
    lam, vecs = _sorted_eig(_matrix(target, prev.source))
    cost = np.abs(prev.lam[:, None] - lam[None, :])
    rows, cols = linear_sum_assignment(cost)
    moved = cost[rows, cols].max()
    if moved > 0.5 * _min_gap(prev.lam) and depth < MAX_SUBDIVISION:
        middle = _step(prev, _interpolate(prev.params, target, 0.5), depth + 1)
        return _step(middle, target, depth + 1)
    order = cols[np.argsort(rows)]
    return _order_pair(TransitionEigen(n=prev.n, params=target, source=prev.source, labels=prev.labels,
                                       lam=lam[order], eigvecs=vecs[:, order]))


def _order_pair(e: TransitionEigen) -> TransitionEigen:
    """Once the EP pair has split in linewidth rather than in frequency, (-,-) is the narrower member.

    Continuation alone is adiabatic: past a detuned avoided crossing it hands the narrow,
    photon-like branch to whichever label the sign of Delta selects.
    """
    i, j = e.index(EP_PAIR[0]), e.index(EP_PAIR[1])
    d = e.lam[i] - e.lam[j]
    if abs(d.real) <= abs(d.imag) or d.real <= 0:
        return e
    order = np.arange(e.lam.size)
    order[[i, j]] = [j, i]
    return replace(e, lam=e.lam[order], eigvecs=e.eigvecs[:, order])


def _mark_ambiguity(e: TransitionEigen) -> TransitionEigen:
    tie = TIE_RTOL * max(e.params.g, 1e-12)
    if _min_gap(e.lam) < tie:
        return replace(e, ambiguous=True)
    return e


def _from_seed(p: SubspaceParams, source: Source, steps: int) -> TransitionEigen:
    e = _seed(p, source)
    for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
        e = _step(e, replace(p, P_theta=t * p.P_theta))
    return _mark_ambiguity(e)


def ngl_eigen(p: SubspaceParams, source: Source = "oracle", steps: int = 32) -> TransitionEigen:
    """Labelled eigenvalues of the (n, n-1) sector.

    Labels are seeded at P_theta = 0 and continued along P_theta up to p.P_theta.
    The seed frequencies are -s'(R_n + s R_{n-1}), not s g sqrt(n) - s' g sqrt(n-1); see the
    module docstring. Raises LabelAmbiguityError if two branches end within the tie tolerance.
    """
    e = _from_seed(p, source, steps)
    if e.ambiguous:
        raise LabelAmbiguityError(
            f"branches of sector n={p.n} coincide within tolerance at P_theta={p.P_theta}",
            context={"n": p.n, "P_theta": p.P_theta, "Delta": p.Delta},
        )
    return e


def track_branches(params: Sequence[SubspaceParams], source: Source = "oracle") -> list[TransitionEigen]:
    """Labelled eigenvalues along a sweep; ambiguity is recorded per point, not raised"""
    if not params:
        return []
    current = _from_seed(params[0], source, steps=32)
    if current.ambiguous:
        logger.warning(f"ambiguous labels at the start of the sweep (n={params[0].n})")
    out = [current]
    for p in params[1:]:
        current = _mark_ambiguity(_step(replace(current, ambiguous=False), p))
        if current.ambiguous:
            logger.debug(f"label ambiguity at n={p.n}, P_theta={p.P_theta:.6g}, Delta={p.Delta:.6g}")
        out.append(current)
    return out


@dataclass(frozen=True, eq=False)
class BareCoefficients:
    n: int
    C: np.ndarray   # C[alpha, beta] for |n-alpha, alpha><n-1-beta, beta|

    @property
    def c00_sq(self) -> float:
        return float(abs(self.C[0, 0]) ** 2)

    @property
    def c11_sq(self) -> float:
        return float(abs(self.C[1, 1]) ** 2)

    @property
    def c10_sq(self) -> float:
        return float(abs(self.C[1, 0]) ** 2)

    @property
    def c01_sq(self) -> float:
        return float(abs(self.C[0, 1]) ** 2)


def bare_coefficients(e: TransitionEigen, branch: Label = ("-", "-")) -> BareCoefficients:
    v = np.asarray(e.eigenvector(branch), dtype=complex)
    v = v / np.linalg.norm(v)
    c = np.zeros((2, 2), dtype=complex)
    c[0, 0], c[1, 0] = v[0], v[1]
    if v.size == 4:
        c[0, 1], c[1, 1] = v[2], v[3]
    return BareCoefficients(n=e.n, C=c)


@dataclass(frozen=True)
class ExceptionalPoint:
    n: int
    Delta: float
    P_crit: float
    omega_at_ep: float
    residual_gap: float
    overlap: float
    coalesced: bool


@dataclass(frozen=True)
class Coalescence:
    x: float
    pair: tuple[complex, complex]
    gap: float
    overlap: float
    interior: bool


def _nearest_pair(mat: np.ndarray, center: complex) -> tuple[np.ndarray, np.ndarray]:
    lam, vecs = linalg.eig(mat)
    order = np.argsort(np.abs(lam - center))[:2]
    return lam[order], vecs[:, order]


def _closest_pair(mat: np.ndarray) -> tuple[complex, complex]:
    lam = linalg.eigvals(mat)
    i, j = min(itertools.combinations(range(lam.size), 2), key=lambda ij: abs(lam[ij[0]] - lam[ij[1]]))
    return complex(lam[i]), complex(lam[j])


def find_coalescence(
    matrix_fn: Callable[[float], np.ndarray],
    interval: tuple[float, float],
    pair_fn: Callable[[np.ndarray], tuple[complex, complex]] | None = None,
    points: int = SCAN_POINTS,
) -> Coalescence:
    """Minimize the distance of an eigenvalue pair over a parameter interval.

    `pair_fn` receives the scan grid and returns the tracked pair at every grid point as an
    array of shape (points, 2); by default the two closest eigenvalues are used. The coarse
    minimum is refined by golden-section search on |(l_a - l_b)^2|, which is smooth
    through an exceptional point.
    """
    lo, hi = interval
    if not hi > lo:
        raise ValueError(f"empty search interval {interval}")
    grid = np.linspace(lo, hi, points)
    if pair_fn is None:
        pairs = np.array([_closest_pair(matrix_fn(x)) for x in grid])
    else:
        pairs = np.asarray(pair_fn(grid))
    gaps = np.abs(pairs[:, 0] - pairs[:, 1])
    i = int(np.argmin(gaps))
    interior = 0 < i < points - 1
    center = complex(pairs[i].mean())

    def objective(x: float) -> float:
        lam, _ = _nearest_pair(matrix_fn(x), center)
        return float(abs((lam[0] - lam[1]) ** 2))

    x_best = float(grid[i])
    if interior:
        try:
            result = optimize.minimize_scalar(
                objective, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                options={"xtol": 1e-14, "maxiter": 10_000},
            )
        except ValueError:
            # the tracked pair and the nearest pair disagree on the grid minimum
            result = optimize.minimize_scalar(
                objective, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                options={"xatol": 1e-14, "maxiter": 10_000},
            )
        if grid[i - 1] <= result.x <= grid[i + 1] and result.fun <= objective(x_best):
            x_best = float(result.x)
    lam, vecs = _nearest_pair(matrix_fn(x_best), center)
    va, vb = vecs[:, 0], vecs[:, 1]
    overlap = float(abs(np.vdot(va, vb)) / (np.linalg.norm(va) * np.linalg.norm(vb)))
    return Coalescence(x=x_best, pair=(complex(lam[0]), complex(lam[1])),
                       gap=float(abs(lam[0] - lam[1])), overlap=overlap, interior=interior)


def toy_ep_matrix(g: float, gamma: float) -> np.ndarray:
    """[[0, g], [g, i gamma]]: exceptional point at g = gamma / 2"""
    return np.array([[0.0, g], [g, 1j * gamma]], dtype=complex)


def exceptional_point(
    n: int,
    Delta: float,
    g: float,
    kappa: float,
    gamma_x: float,
    interval: tuple[float, float],
    points: int = SCAN_POINTS,
    source: Source = "oracle",
) -> ExceptionalPoint:
    """P_theta^(n) where lambda_{--} and lambda_{-+} of sector n coalesce.

    A gap minimum that does not close (or lies on the interval edge) is reported with
    coalesced=False as an avoided crossing.
    """
    base = SubspaceParams(n=n, g=g, kappa=kappa, gamma_x=gamma_x, P_theta=interval[0], Delta=Delta)

    def matrix_fn(P: float) -> np.ndarray:
        return _matrix(replace(base, P_theta=P), source)

    def pair_fn(grid: np.ndarray) -> np.ndarray:
        sweep = track_branches([replace(base, P_theta=float(P)) for P in grid], source)
        return np.array([[e.eigenvalue(EP_PAIR[0]), e.eigenvalue(EP_PAIR[1])] for e in sweep])

    found = find_coalescence(matrix_fn, interval, pair_fn, points)
    coalesced = found.interior and found.gap < EP_GAP_RTOL * g and found.overlap > EP_OVERLAP
    omega = float(np.mean([z.imag for z in found.pair]))
    if not coalesced:
        logger.warning(
            f"no coalescence for n={n}, Delta={Delta:.4g}: minimum gap {found.gap:.3e} at "
            f"P_theta={found.x:.6g} (avoided crossing)"
        )
    else:
        logger.info(f"EP n={n}, Delta={Delta:.4g}: P_theta={found.x:.10g}, omega={omega:.6g}")
    return ExceptionalPoint(n=n, Delta=Delta, P_crit=found.x, omega_at_ep=omega,
                            residual_gap=found.gap, overlap=found.overlap, coalesced=coalesced)


@dataclass(frozen=True, eq=False)
class DiscrepancyReport:
    params: SubspaceParams
    shift: complex
    permutation: tuple[int, ...]
    residuals: np.ndarray
    printed: np.ndarray = field(repr=False)
    oracle: np.ndarray = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))


def compare_printed_vs_oracle(p: SubspaceParams) -> DiscrepancyReport:
    """Match oracle eigenvalues to printed ones up to one global complex shift and a permutation"""
    printed = linalg.eigvals(ngl_matrix(p))
    oracle = linalg.eigvals(oracle_block(p))
    best = None
    for perm in itertools.permutations(range(printed.size), oracle.size):
        diff = printed[list(perm)] - oracle
        shift = diff.mean()
        residuals = diff - shift
        score = float(np.sum(np.abs(residuals) ** 2))
        if best is None or score < best[0]:
            best = (score, perm, shift, residuals)
    _, perm, shift, residuals = best
    return DiscrepancyReport(params=p, shift=complex(shift), permutation=tuple(perm),
                             residuals=residuals, printed=printed, oracle=oracle)


def classify_discrepancy(max_residuals: Sequence[float], g: float, tol: float = 1e-9) -> str:
    """'equivalent' if every comparison matches up to the frame shift, else 'structured'"""
    worst = max(max_residuals, default=0.0)
    return "equivalent" if worst <= tol * max(g, 1.0) else "structured"


def resonance_state_position(eigens: Sequence[TransitionEigen]) -> float:
    """Mean omega_{--} over the rungs n >= 2; the first rung does not take part"""
    values = [e.eigenvalue(("-", "-")).imag for e in eigens if e.n >= 2]
    if not values:
        raise ValueError("resonance state needs at least one rung with n >= 2")
    return float(np.mean(values))
