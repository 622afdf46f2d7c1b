"""Truncated Fock x two-level Hilbert space and the Jaynes-Cummings operator algebra.

Basis index of |n, alpha> (n photons, QD level alpha) is i = 2n + alpha, so every
excitation-number rung {|n,0>, |n-1,1>} occupies neighbouring indices. hbar = 1,
energies and rates in meV.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOL_TRACE = 1e-10
ATOL_HERMITIAN = 1e-12
ATOL_POSITIVE = 1e-9


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int
    dim: int = field(init=False)

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "dim", 2 * (self.n_max + 1))

    def index(self, n: int, alpha: int) -> int:
        """Basis index of |n, alpha>"""
        if not 0 <= n <= self.n_max or alpha not in (0, 1):
            raise ValueError(f"|{n},{alpha}> is outside the truncated space (n_max={self.n_max})")
        return 2 * n + alpha

    def labels(self) -> list[tuple[int, int]]:
        return [(i // 2, i % 2) for i in range(self.dim)]

    def ket(self, n: int, alpha: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(n, alpha)] = 1.0
        return v


def build_space(n_max: int) -> HilbertSpace:
    return HilbertSpace(n_max)


def basis_index(n: int, alpha: int) -> int:
    """i = 2n + alpha, independent of the cutoff"""
    if n < 0 or alpha not in (0, 1):
        raise ValueError(f"invalid basis state |{n},{alpha}>")
    return 2 * n + alpha


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"operator shape {mat.shape} does not match dim {self.space.dim}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    def _wrap(self, mat: np.ndarray) -> Operator:
        return Operator(self.space, mat)

    def __matmul__(self, other: Operator) -> Operator:
        return self._wrap(self.mat @ other.mat)

    def __add__(self, other: Operator) -> Operator:
        return self._wrap(self.mat + other.mat)

    def __sub__(self, other: Operator) -> Operator:
        return self._wrap(self.mat - other.mat)

    def __mul__(self, scalar: complex) -> Operator:
        return self._wrap(self.mat * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> Operator:
        return self._wrap(-self.mat)

    def dag(self) -> Operator:
        return self._wrap(self.mat.conj().T)

    def expect(self, rho: DensityMatrix) -> complex:
        return complex(np.trace(self.mat @ rho.mat))

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.mat - self.mat.conj().T) <= atol))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: HilbertSpace
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"density matrix shape {mat.shape} does not match dim {self.space.dim}")
        tr = np.trace(mat)
        if abs(tr - 1.0) > ATOL_TRACE:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        if np.max(np.abs(mat - mat.conj().T)) > ATOL_HERMITIAN:
            raise ValueError("density matrix is not Hermitian")
        lowest = np.linalg.eigvalsh(mat).min()
        if lowest < -ATOL_POSITIVE:
            raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_matrix(cls, space: HilbertSpace, mat: np.ndarray) -> DensityMatrix:
        """Hermitize and trace-normalize a numerically obtained state before validation"""
        mat = np.asarray(mat, dtype=complex)
        mat = 0.5 * (mat + mat.conj().T)
        return cls(space, mat / np.trace(mat).real)

    @classmethod
    def pure(cls, space: HilbertSpace, n: int, alpha: int) -> DensityMatrix:
        psi = space.ket(n, alpha)
        return cls(space, np.outer(psi, psi.conj()))

    @classmethod
    def ground(cls, space: HilbertSpace) -> DensityMatrix:
        return cls.pure(space, 0, 0)

    @classmethod
    def random(cls, space: HilbertSpace, rng: np.random.Generator) -> DensityMatrix:
        g = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
        return cls.from_matrix(space, g @ g.conj().T)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.mat))


@dataclass(frozen=True)
class SystemParams:
    g: float
    kappa: float
    gamma_x: float
    P_x: float
    P_theta: float
    omega_x: float
    omega_c: float
    gamma_theta: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_x", "P_x", "P_theta", "gamma_theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def delta(self) -> float:
        """Detuning omega_x - omega_c"""
        return self.omega_x - self.omega_c

    def replace(self, **changes) -> SystemParams:
        values = {**self.__dict__, **changes}
        return SystemParams(**values)


@dataclass(frozen=True)
class BareOperators:
    a: Operator
    sigma: Operator
    n_phot: Operator
    n_exciton: Operator
    N_exc: Operator


def bare_operators(space: HilbertSpace) -> BareOperators:
    destroy = np.diag(np.sqrt(np.arange(1, space.n_max + 1, dtype=float)), k=1)
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    a = Operator(space, np.kron(destroy, np.eye(2)))
    sigma = Operator(space, np.kron(np.eye(space.n_max + 1), lower))
    n_phot = a.dag() @ a
    n_exciton = sigma.dag() @ sigma
    return BareOperators(a=a, sigma=sigma, n_phot=n_phot, n_exciton=n_exciton,
                         N_exc=n_phot + n_exciton)


def jc_hamiltonian(space: HilbertSpace, omega_x: float, omega_c: float, g: float) -> Operator:
    """H = omega_x s+s + omega_c a+a + g (a+ s + a s+)"""
    if g < 0:
        raise ValueError(f"g must be >= 0, got {g}")
    ops = bare_operators(space)
    coupling = ops.a.dag() @ ops.sigma
    return omega_x * ops.n_exciton + omega_c * ops.n_phot + g * (coupling + coupling.dag())
