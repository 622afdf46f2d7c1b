"""Lindblad generators as dense superoperator matrices.

Vectorization is column stacking: vec(rho) concatenates the columns of rho, hence
vec(A rho B) = (B^T kron A) vec(rho).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateSteadyStateError, SolverError
from .operators import DensityMatrix, HilbertSpace, Operator, SystemParams, bare_operators, jc_hamiltonian

logger = logging.getLogger(__name__)

# smallest singular value must be this much below the next one for the SVD null vector
ISOLATION_RATIO = 1e3
# null-space dimension test, relative to the largest singular value
NULL_RTOL = 1e-12


def vec(mat: np.ndarray) -> np.ndarray:
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class Superoperator:
    space: HilbertSpace
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        side = self.space.dim ** 2
        if mat.shape != (side, side):
            raise ValueError(f"superoperator shape {mat.shape} does not match dim^2 = {side}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    def __add__(self, other: Superoperator) -> Superoperator:
        return Superoperator(self.space, self.mat + other.mat)

    def __mul__(self, scalar: complex) -> Superoperator:
        return Superoperator(self.space, self.mat * scalar)

    __rmul__ = __mul__

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Act on a dim x dim matrix, returning a dim x dim matrix"""
        return unvec(self.mat @ vec(rho), self.space.dim)

    def eigvals(self) -> np.ndarray:
        return linalg.eigvals(self.mat)

    def block(self, indices: np.ndarray) -> np.ndarray:
        return self.mat[np.ix_(indices, indices)]

    def trace_row(self) -> np.ndarray:
        """vec(I)^dagger L: vanishes for trace-preserving generators"""
        return vec(np.eye(self.space.dim)).conj() @ self.mat

    def swap(self) -> np.ndarray:
        """Permutation S with S vec(rho) = vec(rho^T); conj(S vec(rho)) = vec(rho^dagger)"""
        d = self.space.dim
        idx = np.arange(d * d).reshape((d, d), order="F").T.reshape(-1, order="F")
        return np.eye(d * d)[idx]


def excitation_numbers(space: HilbertSpace) -> np.ndarray:
    """N_exc eigenvalue n + alpha of each basis index"""
    idx = np.arange(space.dim)
    return idx // 2 + idx % 2


def sector_indices(space: HilbertSpace, shift: int) -> np.ndarray:
    """vec indices of the coherences |i><j| with N_i - N_j = shift"""
    n = excitation_numbers(space)
    rows, cols = np.meshgrid(np.arange(space.dim), np.arange(space.dim), indexing="ij")
    mask = (n[rows] - n[cols]) == shift
    flat = (rows + cols * space.dim)[mask]
    return np.sort(flat)


def is_phase_covariant(gen: Superoperator, atol: float = 0.0) -> bool:
    """True if the generator never couples coherence sectors with different N_i - N_j"""
    n = excitation_numbers(gen.space)
    d = gen.space.dim
    k = np.arange(d * d)
    shift = n[k % d] - n[k // d]
    coupled = shift[:, None] != shift[None, :]
    return bool(np.all(np.abs(gen.mat[coupled]) <= atol))


def _spre(space: HilbertSpace, a: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(space.dim), a)


def _spost(space: HilbertSpace, b: np.ndarray) -> np.ndarray:
    return np.kron(b.T, np.eye(space.dim))


def dissipator(x: Operator) -> Superoperator:
    """L_X(rho) = 2 X rho X^+ - X^+X rho - rho X^+X, without any rate prefactor"""
    space = x.space
    xdx = x.mat.conj().T @ x.mat
    mat = 2.0 * np.kron(x.mat.conj(), x.mat) - _spre(space, xdx) - _spost(space, xdx)
    return Superoperator(space, mat)


def commutator_superop(h: Operator) -> Superoperator:
    """rho -> -i [H, rho]"""
    return Superoperator(h.space, -1j * (_spre(h.space, h.mat) - _spost(h.space, h.mat)))


def number_superop(space: HilbertSpace) -> Superoperator:
    """rho -> [rho, N_exc]"""
    n_exc = bare_operators(space).N_exc.mat
    return Superoperator(space, _spost(space, n_exc) - _spre(space, n_exc))


def effective_hamiltonian(space: HilbertSpace, params: SystemParams) -> Operator:
    """K = H - i gamma_x s+s / 2 - i kappa a+a / 2"""
    ops = bare_operators(space)
    h = jc_hamiltonian(space, params.omega_x, params.omega_c, params.g)
    return h - (0.5j * params.gamma_x) * ops.n_exciton - (0.5j * params.kappa) * ops.n_phot


def full_liouvillian(space: HilbertSpace, params: SystemParams) -> Superoperator:
    """Generator of the driven-dissipative master equation including the pump and phonon channels"""
    ops = bare_operators(space)
    h = jc_hamiltonian(space, params.omega_x, params.omega_c, params.g)
    gen = commutator_superop(h)
    channels = [
        (params.kappa, ops.a),
        (params.gamma_x, ops.sigma),
        (params.P_x, ops.sigma.dag()),
        (params.P_theta, ops.sigma @ ops.a.dag()),
        (params.gamma_theta, ops.sigma.dag() @ ops.a),
    ]
    for rate, x in channels:
        if rate > 0:
            gen = gen + (rate / 2) * dissipator(x)
    return gen


def no_gain_liouvillian(space: HilbertSpace, params: SystemParams) -> Superoperator:
    """d rho/dt = -i (K rho - rho K^+) + (P_theta/2) L_{s a+}(rho), pump forced off.

    Not trace preserving; block diagonal over excitation-number coherence sectors.
    """
    if params.P_x != 0:
        logger.debug(f"no-gain generator ignores P_x={params.P_x}")
    k = effective_hamiltonian(space, params).mat
    mat = -1j * _spre(space, k) + 1j * _spost(space, k.conj().T)
    gen = Superoperator(space, mat)
    if params.P_theta > 0:
        ops = bare_operators(space)
        gen = gen + (params.P_theta / 2) * dissipator(ops.sigma @ ops.a.dag())
    return gen


def steady_state(gen: Superoperator) -> DensityMatrix:
    """Normalized null vector of a trace-preserving generator.

    Phase-covariant generators are solved inside the population sector N_i = N_j, which
    holds the steady state and is free of the large optical frequencies. Raises
    DegenerateSteadyStateError if the null space is not one dimensional.
    """
    space = gen.space
    d = space.dim
    if is_phase_covariant(gen):
        indices = sector_indices(space, 0)
    else:
        indices = np.arange(d * d)
    block = gen.block(indices)
    _, s, vh = linalg.svd(block)
    scale = max(s[0], 1.0)
    logger.debug(f"steady state: smallest singular values {s[-1]:.3e}, {s[-2]:.3e}")
    if s[-2] <= NULL_RTOL * scale:
        raise DegenerateSteadyStateError(
            f"null space of the generator has dimension > 1 (s[-2]={s[-2]:.3e})",
            context={"singular_values": s[-3:].tolist()},
        )
    if s[-2] >= ISOLATION_RATIO * max(s[-1], np.finfo(float).tiny):
        v_block = vh[-1].conj()
    else:
        logger.warning(
            f"null vector not isolated (s[-1]={s[-1]:.3e}, s[-2]={s[-2]:.3e}); "
            "solving with the trace constraint"
        )
        v_block = _constrained_solve(block, vec(np.eye(d))[indices])
    v = np.zeros(d * d, dtype=complex)
    v[indices] = v_block
    rho = unvec(v, d)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise SolverError("steady-state candidate has vanishing trace")
    try:
        return DensityMatrix.from_matrix(space, rho / tr)
    except ValueError as e:
        logger.error(f"steady state failed validation: {e}")
        raise SolverError(f"steady state failed validation: {e}") from e


def _constrained_solve(block: np.ndarray, trace_vec: np.ndarray) -> np.ndarray:
    """Replace one (redundant) row of L by the trace functional and solve L v = e_0"""
    system = np.array(block)
    system[0, :] = trace_vec
    rhs = np.zeros(block.shape[0], dtype=complex)
    rhs[0] = 1.0
    try:
        return linalg.solve(system, rhs)
    except linalg.LinAlgError as e:
        raise SolverError(f"trace-constrained steady-state solve failed: {e}") from e


def propagate(gen: Superoperator, rho: np.ndarray, t: float) -> np.ndarray:
    """Raw exp(L t) vec(rho) as a matrix; usable with non trace-preserving generators"""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.array(rho, dtype=complex)
    return unvec(linalg.expm(gen.mat * t) @ vec(rho), gen.space.dim)


def evolve(gen: Superoperator, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """exp(L t) rho0 for a trace-preserving generator.

    Only roundoff-level anti-Hermitian parts are removed; trace drift is not renormalized
    and fails DensityMatrix validation.
    """
    if t == 0:
        return rho0
    out = propagate(gen, rho0.mat, t)
    drift = np.max(np.abs(out - out.conj().T))
    if drift > 1e-10:
        raise SolverError(f"evolved state lost Hermiticity (max deviation {drift:.3e})")
    return DensityMatrix(gen.space, 0.5 * (out + out.conj().T))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    diff = rho.mat - sigma.mat
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))
