"""Sweep jobs and the worker pool that runs them.

Every job is a module-level function of one frozen task so it can be shipped to a
worker process. Workers only compute; results come back in submission order and are
written by the caller.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Generic, Sequence, TypeVar

import numpy as np

from .config import NumericsConfig, SystemConfig
from .errors import JcdynError, SolverError
from .liouville import full_liouvillian, steady_state
from .operators import build_space
from .spectrum import emission_spectrum
from .subspaces import (
    EP_PAIR,
    SubspaceParams,
    bare_coefficients,
    compare_printed_vs_oracle,
    exceptional_point,
    track_branches,
)
from .thermal import (
    Region,
    ThermalModel,
    cavity_energy,
    classify_region,
    detuning,
    exciton_energy,
    phonon_rate,
    system_params_at,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


# ========== Spectra ==========

@dataclass(frozen=True)
class SpectrumTask:
    T: float
    system: SystemConfig
    thermal: ThermalModel
    numerics: NumericsConfig
    omega: tuple[float, ...]
    normalize: bool = False


@dataclass(frozen=True)
class SpectrumRow:
    T: float
    omega: np.ndarray
    intensity: np.ndarray
    omega_c: float
    omega_x: float


def spectrum_job(task: SpectrumTask) -> SpectrumRow:
    space = build_space(task.numerics.n_max)
    params = system_params_at(task.T, task.system.params(0.0, 0.0, 0.0), task.thermal)
    gen = full_liouvillian(space, params)
    try:
        rho = steady_state(gen)
        spec = emission_spectrum(gen, rho, task.omega, normalize=task.normalize)
    except SolverError as e:
        raise type(e)(f"T={task.T:.6g} K: {e}", {**e.context, "T": task.T}) from e
    except ValueError as e:
        # e.g. a spectrum dipping below the negative-intensity floor
        raise SolverError(f"T={task.T:.6g} K: {e}", {"T": task.T}) from e
    return SpectrumRow(T=task.T, omega=spec.omega, intensity=spec.intensity,
                       omega_c=params.omega_c, omega_x=params.omega_x)


# ========== Transition sectors ==========

@dataclass(frozen=True)
class ScaledRates:
    """Sector-figure rates in meV, derived from ratios to g"""
    g: float
    kappa: float
    gamma_x: float
    P_tilde: float


@dataclass(frozen=True)
class BlocksTask:
    n: int
    source: str
    temperatures: tuple[float, ...]
    rates: ScaledRates
    thermal: ThermalModel


@dataclass(frozen=True)
class BlockRow:
    T: float
    n: int
    label: str
    omega: float           # relative to omega_c(T)
    Gamma: float
    omega_abs: float
    source: str
    region: Region
    ambiguous: bool


def label_text(label: tuple[str, str]) -> str:
    return "".join(label)


def blocks_job(task: BlocksTask) -> list[BlockRow]:
    model = task.thermal.replace(P_tilde=task.rates.P_tilde)
    params = [
        SubspaceParams(n=task.n, g=task.rates.g, kappa=task.rates.kappa, gamma_x=task.rates.gamma_x,
                       P_theta=phonon_rate(T, model), Delta=detuning(T, model))
        for T in task.temperatures
    ]
    rows = []
    for T, e in zip(task.temperatures, track_branches(params, task.source)):
        region = classify_region(e.params.P_theta, model)
        omega_c = cavity_energy(T, model)
        for label, lam in zip(e.labels, e.lam):
            rows.append(BlockRow(T=T, n=task.n, label=label_text(label), omega=float(lam.imag),
                                 Gamma=float(lam.real), omega_abs=omega_c + float(lam.imag),
                                 source=task.source, region=region, ambiguous=e.ambiguous))
    return rows


@dataclass(frozen=True)
class DiscrepancyRow:
    T: float
    n: int
    shift: complex
    max_residual: float


def discrepancy_job(task: BlocksTask) -> list[DiscrepancyRow]:
    model = task.thermal.replace(P_tilde=task.rates.P_tilde)
    rows = []
    for T in task.temperatures:
        p = SubspaceParams(n=task.n, g=task.rates.g, kappa=task.rates.kappa, gamma_x=task.rates.gamma_x,
                           P_theta=phonon_rate(T, model), Delta=detuning(T, model))
        report = compare_printed_vs_oracle(p)
        rows.append(DiscrepancyRow(T=T, n=task.n, shift=report.shift, max_residual=report.max_residual))
    return rows


@dataclass(frozen=True)
class EpTask:
    n: int
    delta_over_g: float
    rates: ScaledRates
    interval_over_g: tuple[float, float]
    source: str = "oracle"


@dataclass(frozen=True)
class EpRow:
    n: int
    delta_over_g: float
    P_crit_over_g: float
    omega_at_ep: float
    residual_gap: float
    coalesced: bool


def ep_job(task: EpTask) -> EpRow:
    g = task.rates.g
    lo, hi = task.interval_over_g
    ep = exceptional_point(task.n, task.delta_over_g * g, g, task.rates.kappa, task.rates.gamma_x,
                           interval=(lo * g, hi * g), source=task.source)
    return EpRow(n=task.n, delta_over_g=task.delta_over_g, P_crit_over_g=ep.P_crit / g,
                 omega_at_ep=ep.omega_at_ep, residual_gap=ep.residual_gap, coalesced=ep.coalesced)


@dataclass(frozen=True)
class CoefficientsTask:
    n: int
    delta_over_g: float
    p_theta_over_g: tuple[float, ...]
    rates: ScaledRates
    source: str = "oracle"


@dataclass(frozen=True)
class CoefficientRow:
    P_theta_over_g: float
    n: int
    c00_sq: float
    c11_sq: float
    c10_sq: float
    c01_sq: float
    ambiguous: bool


def coefficients_job(task: CoefficientsTask) -> list[CoefficientRow]:
    g = task.rates.g
    params = [
        SubspaceParams(n=task.n, g=g, kappa=task.rates.kappa, gamma_x=task.rates.gamma_x,
                       P_theta=p * g, Delta=task.delta_over_g * g)
        for p in task.p_theta_over_g
    ]
    rows = []
    for p, e in zip(task.p_theta_over_g, track_branches(params, task.source)):
        c = bare_coefficients(e, EP_PAIR[0])
        rows.append(CoefficientRow(P_theta_over_g=p, n=task.n, c00_sq=c.c00_sq, c11_sq=c.c11_sq,
                                   c10_sq=c.c10_sq, c01_sq=c.c01_sq, ambiguous=e.ambiguous))
    return rows


def resonance_rows(rows: Sequence[BlockRow], source: str = "oracle") -> list[tuple[float, float, float]]:
    """(T, omega, omega_abs) of the resonance state: mean omega_{--} over the rungs n >= 2"""
    by_T: dict[float, list[BlockRow]] = {}
    for row in rows:
        if row.n >= 2 and row.label == label_text(EP_PAIR[0]) and row.source == source:
            by_T.setdefault(row.T, []).append(row)
    return [
        (T, float(np.mean([r.omega for r in group])), float(np.mean([r.omega_abs for r in group])))
        for T, group in sorted(by_T.items())
    ]


def bare_energies(model: ThermalModel) -> Callable[[float], tuple[float, float]]:
    def energies(T: float) -> tuple[float, float]:
        return cavity_energy(T, model), exciton_energy(T, model)

    return energies


# ========== Pool ==========

@dataclass
class SweepResult(Generic[R]):
    results: list[R | None]
    failures: list[tuple[str, str]]

    @property
    def complete(self) -> bool:
        return not self.failures


class SweepRunner:
    """Runs a job over many tasks, serially or on a process pool, keeping submission order"""

    def __init__(self, threads: int | None = None):
        self.threads = threads or os.cpu_count() or 1
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    def map(
        self,
        job: Callable[[T], R],
        tasks: Sequence[T],
        keys: Sequence[str],
        name: str = "sweep",
    ) -> SweepResult[R]:
        """Run `job` on every task; JcdynError failures are collected under their key, others propagate"""
        if len(keys) != len(tasks):
            raise ValueError("one key per task is required")
        logger.info(f"{name}: {len(tasks)} tasks on {min(self.threads, max(len(tasks), 1))} workers")
        results: list[R | None] = []
        failures: list[tuple[str, str]] = []
        if self.threads == 1 or len(tasks) <= 1:
            for key, task in zip(keys, tasks):
                results.append(self._run_one(job, task, key, failures))
        else:
            with ProcessPoolExecutor(max_workers=min(self.threads, len(tasks))) as pool:
                futures = [pool.submit(job, task) for task in tasks]
                for key, future in zip(keys, futures):
                    results.append(self._collect(future.result, key, failures))
        logger.info(f"{name}: finished, {len(failures)} failed")
        return SweepResult(results=results, failures=failures)

    @staticmethod
    def _run_one(job: Callable[[T], R], task: T, key: str, failures: list) -> R | None:
        return SweepRunner._collect(lambda: job(task), key, failures)

    @staticmethod
    def _collect(fetch: Callable[[], R], key: str, failures: list) -> R | None:
        try:
            return fetch()
        except JcdynError as e:
            logger.error(f"{key}: {e}")
            failures.append((key, str(e)))
            return None
