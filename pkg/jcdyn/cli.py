"""Command-line front end: temperature and parameter sweeps written as CSV"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .config import RunConfig, Settings, load_config, load_settings
from .errors import ConfigError, JcdynError, SolverError
from .output import FLOAT_FORMAT, CsvStore
from .runner import (
    BlockRow,
    BlocksTask,
    CoefficientsTask,
    EpTask,
    ScaledRates,
    SpectrumRow,
    SpectrumTask,
    SweepRunner,
    bare_energies,
    blocks_job,
    coefficients_job,
    discrepancy_job,
    ep_job,
    resonance_rows,
    spectrum_job,
)
from .spectrum import Spectrum, default_omega_grid, track_peaks
from .subspaces import LABELS, classify_discrepancy, find_coalescence, toy_ep_matrix
from .thermal import cavity_energy, exciton_energy, region_temperatures, resonance_temperature

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4


@dataclass
class RunContext:
    config: RunConfig
    store: CsvStore
    runner: SweepRunner
    normalize: bool
    sources: tuple[str, ...]
    failures: list[tuple[str, str, str]] = field(default_factory=list)
    spectra: list[SpectrumRow] | None = None

    @property
    def rates(self) -> ScaledRates:
        g = self.config.system.g
        sub = self.config.subspaces
        return ScaledRates(g=g, kappa=sub.kappa_over_g * g, gamma_x=sub.gamma_x_over_g * g,
                           P_tilde=sub.P_tilde_over_g * g)


def _sources(option: str) -> tuple[str, ...]:
    return ("oracle", "printed") if option == "both" else (option,)


def _spectrum_center(cfg: RunConfig) -> float:
    model = cfg.thermal.model()
    try:
        return resonance_temperature(model).omega0
    except SolverError as e:
        T_mid = 0.5 * (cfg.sweep.T_min + cfg.sweep.T_max)
        center = 0.5 * (cavity_energy(T_mid, model) + exciton_energy(T_mid, model))
        logger.warning(f"{e}; centering the frequency grid at {center:.6f} meV")
        return center


def compute_spectra(ctx: RunContext) -> list[SpectrumRow]:
    """Steady-state PL spectra over the temperature sweep; any failing temperature is fatal"""
    if ctx.spectra is not None:
        return ctx.spectra
    cfg = ctx.config
    num = cfg.numerics
    grid = default_omega_grid(_spectrum_center(cfg), cfg.system.g, num.omega_points, num.omega_half_span_over_g)
    temperatures = cfg.sweep.temperatures()
    tasks = [SpectrumTask(T=T, system=cfg.system, thermal=cfg.thermal.model(), numerics=num,
                          omega=tuple(float(w) for w in grid), normalize=ctx.normalize)
             for T in temperatures]
    result = ctx.runner.map(spectrum_job, tasks, [f"T={T:.6g}" for T in temperatures], name="spectra")
    if result.failures:
        key, message = result.failures[0]
        raise SolverError(f"spectrum failed at {key} K: {message}")
    ctx.spectra = list(result.results)
    return ctx.spectra


def cmd_spectra(ctx: RunContext) -> None:
    rows = compute_spectra(ctx)
    for row in rows:
        ctx.store.write_spectrum(row.T, row.omega, row.intensity)
    ctx.store.write_spectra_long([(row.T, row.omega, row.intensity) for row in rows])
    logger.info(f"spectra: wrote {len(rows)} temperatures to {ctx.store.directory}")


def cmd_peaks(ctx: RunContext) -> None:
    cfg = ctx.config
    rows = compute_spectra(ctx)
    model = cfg.thermal.model()
    sweep = [(row.T, Spectrum(row.omega, row.intensity)) for row in rows]
    traj_c, traj_x = track_peaks(sweep, bare_energies(model), cfg.numerics.min_prominence,
                                 fit=cfg.numerics.fit_peaks, labels=cfg.numerics.peak_labels)
    table = []
    for sample_c, sample_x in zip(traj_c.samples, traj_x.samples):
        for label, s in (("C", sample_c), ("X", sample_x)):
            table.append((s.T, label, s.center, s.fwhm, s.fwhm_halfheight, s.height,
                          cavity_energy(s.T, model), exciton_energy(s.T, model), s.merged, s.ambiguous))
    ctx.store.write_table(
        "peaks.csv",
        ("T_K", "label", "center_meV", "fwhm_meV", "fwhm_halfheight_meV", "height",
         "omega_c_meV", "omega_x_meV", "merged", "ambiguous"),
        table,
    )
    logger.info(f"peaks: {len(traj_c.samples)} temperatures tracked")


# n = 1 printed sectors carry all four labels, the oracle only the (-, +-) pair
LABEL_RANK = {"".join(lb): i for i, lb in enumerate(LABELS)}


def cmd_blocks(ctx: RunContext) -> None:
    cfg = ctx.config
    rates = ctx.rates
    model = cfg.thermal.model().replace(P_tilde=rates.P_tilde)
    temperatures = tuple(cfg.sweep.temperatures())
    tasks, keys = [], []
    for source in ctx.sources:
        for n in cfg.subspaces.n_list:
            tasks.append(BlocksTask(n=n, source=source, temperatures=temperatures, rates=rates, thermal=model))
            keys.append(f"n={n},source={source}")
    result = ctx.runner.map(blocks_job, tasks, keys, name="blocks")
    ctx.failures += [("blocks", key, message) for key, message in result.failures]

    rows: list[BlockRow] = [row for part in result.results if part for row in part]
    rank = {source: i for i, source in enumerate(ctx.sources)}
    rows.sort(key=lambda r: (r.T, r.n, rank[r.source], LABEL_RANK[r.label]))
    T_two, T_three = region_temperatures(model)
    comments = (
        f"region_II_from_K={FLOAT_FORMAT % T_two}",
        f"region_III_from_K={FLOAT_FORMAT % T_three}",
        "omega_meV is relative to omega_c(T); omega_abs_meV = omega_c(T) + omega_meV",
    )
    ctx.store.write_table(
        "blocks.csv",
        ("T_K", "n", "label", "omega_meV", "Gamma_meV", "omega_abs_meV", "source", "region", "ambiguous"),
        [(r.T, r.n, r.label, r.omega, r.Gamma, r.omega_abs, r.source, r.region.value, r.ambiguous) for r in rows],
        comments=comments,
    )
    resonance = resonance_rows(rows, source=ctx.sources[0])
    if resonance:
        ctx.store.write_table("resonance_state.csv", ("T_K", "omega_meV", "omega_abs_meV"), resonance)
    if len(ctx.sources) == 2:
        _write_discrepancy(ctx, temperatures, rates, model)
    logger.info(f"blocks: {len(rows)} rows for rungs {list(cfg.subspaces.n_list)}")


def _write_discrepancy(ctx: RunContext, temperatures, rates: ScaledRates, model) -> None:
    tasks = [BlocksTask(n=n, source="both", temperatures=temperatures, rates=rates, thermal=model)
             for n in ctx.config.subspaces.n_list]
    result = ctx.runner.map(discrepancy_job, tasks, [f"n={t.n}" for t in tasks], name="discrepancy")
    ctx.failures += [("discrepancy", key, message) for key, message in result.failures]
    rows = sorted((r for part in result.results if part for r in part), key=lambda r: (r.T, r.n))
    worst = max((r.max_residual for r in rows), default=0.0)
    verdict = classify_discrepancy([r.max_residual for r in rows], rates.g)
    ctx.store.write_table(
        "discrepancy.csv",
        ("T_K", "n", "shift_re_meV", "shift_im_meV", "max_residual_meV"),
        [(r.T, r.n, r.shift.real, r.shift.imag, r.max_residual) for r in rows],
        comments=(f"classification={verdict}",),
    )
    logger.info(f"printed vs oracle sectors: {verdict} (max residual {worst:.3e} meV)")


def cmd_ep_map(ctx: RunContext, toy_gamma: float | None = None) -> None:
    if toy_gamma is not None:
        _toy_ep(ctx, toy_gamma)
        return
    cfg = ctx.config
    sub = cfg.subspaces
    tasks = [EpTask(n=n, delta_over_g=d, rates=ctx.rates, interval_over_g=sub.ep_interval_over_g,
                    source=ctx.sources[0])
             for n in sub.n_list for d in sub.delta_over_g.values()]
    keys = [f"n={t.n},Delta/g={t.delta_over_g:.6g}" for t in tasks]
    result = ctx.runner.map(ep_job, tasks, keys, name="ep-map")
    ctx.failures += [("ep-map", key, message) for key, message in result.failures]
    rows = [r for r in result.results if r is not None]
    ctx.store.write_table(
        "ep_map.csv",
        ("n", "Delta_over_g", "P_crit_over_g", "omega_at_ep_meV", "residual_gap_meV", "coalesced"),
        [(r.n, r.delta_over_g, r.P_crit_over_g, r.omega_at_ep, r.residual_gap, r.coalesced) for r in rows],
    )
    missing = sum(not r.coalesced for r in rows)
    logger.info(f"ep-map: {len(rows)} rows, {missing} without coalescence")


def _toy_ep(ctx: RunContext, gamma: float) -> None:
    if not gamma > 0:
        raise ConfigError("toy_gamma", f"must be > 0, got {gamma}")
    found = find_coalescence(lambda g: toy_ep_matrix(g, gamma), (0.0, gamma))
    ctx.store.write_table(
        "ep_toy.csv",
        ("gamma", "g_crit", "g_exact", "residual_gap", "overlap"),
        [(gamma, found.x, gamma / 2, found.gap, found.overlap)],
    )


def cmd_coefficients(ctx: RunContext) -> None:
    sub = ctx.config.subspaces
    grid = tuple(sub.p_theta_over_g.values())
    tasks = [CoefficientsTask(n=n, delta_over_g=sub.coefficient_delta_over_g, p_theta_over_g=grid,
                              rates=ctx.rates, source=ctx.sources[0])
             for n in sub.n_list]
    result = ctx.runner.map(coefficients_job, tasks, [f"n={t.n}" for t in tasks], name="coefficients")
    ctx.failures += [("coefficients", key, message) for key, message in result.failures]
    rows = sorted((r for part in result.results if part for r in part), key=lambda r: (r.P_theta_over_g, r.n))
    ctx.store.write_table(
        "coefficients.csv",
        ("P_theta_over_g", "n", "C00_sq", "C11_sq", "C10_sq", "C01_sq", "ambiguous"),
        [(r.P_theta_over_g, r.n, r.c00_sq, r.c11_sq, r.c10_sq, r.c01_sq, r.ambiguous) for r in rows],
        comments=(f"Delta_over_g={FLOAT_FORMAT % sub.coefficient_delta_over_g}",),
    )
    logger.info(f"coefficients: {len(rows)} rows")


COMMANDS: dict[str, Callable[[RunContext], None]] = {
    "spectra": cmd_spectra,
    "peaks": cmd_peaks,
    "blocks": cmd_blocks,
    "ep-map": cmd_ep_map,
    "coefficients": cmd_coefficients,
}


def cmd_run(ctx: RunContext) -> None:
    """Every command listed in outputs.emit, in that order"""
    for name in ctx.config.outputs.emit:
        logger.info(f"run: {name}")
        COMMANDS[name](ctx)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (default: $JCDYN_OUT, then ./out)")
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: all available)")
    common.add_argument("--normalize", action="store_true", default=None, help="scale every spectrum to max 1")
    common.add_argument("--source", choices=("oracle", "printed", "both"), default=None,
                        help="sector matrices for the block commands")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(prog="jcdyn", description="QD-cavity Lindblad dynamics sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectra", parents=[common], help="PL spectra over the temperature sweep")
    sub.add_parser("peaks", parents=[common], help="C and X peak trajectories and linewidths")
    sub.add_parser("blocks", parents=[common], help="one-photon transition sector eigenvalues vs temperature")
    ep = sub.add_parser("ep-map", parents=[common], help="exceptional points over the detuning grid")
    ep.add_argument("--toy-gamma", type=float, default=None, help=argparse.SUPPRESS)
    sub.add_parser("coefficients", parents=[common], help="bare-state coefficients vs P_theta")
    sub.add_parser("run", parents=[common], help="every command listed in outputs.emit")
    return parser


def setup_logging(level: str, log_file: Path | None = None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file is not None:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT,
                        handlers=handlers, force=True)


def _output_dir(args: argparse.Namespace, settings: Settings, cfg: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    if settings.out_dir is not None:
        return settings.out_dir
    if cfg.outputs.directory:
        return Path(cfg.outputs.directory)
    return Path("out")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
    except ConfigError as e:
        setup_logging(args.log_level or "INFO")
        logger.error(f"Invalid environment: {e}")
        return EXIT_CONFIG
    level = args.log_level or settings.log_level
    setup_logging(level)

    try:
        cfg = load_config(args.config)
        out = _output_dir(args, settings, cfg)
        out.mkdir(parents=True, exist_ok=True)
        setup_logging(level, out / "jcdyn.log")
        threads = args.threads if args.threads is not None else settings.threads
        runner = SweepRunner(threads)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except ValueError as e:
        logger.error(f"Invalid option: {e}")
        return EXIT_CONFIG

    ctx = RunContext(
        config=cfg,
        store=CsvStore(out, cfg.config_hash()),
        runner=runner,
        normalize=settings.normalize if args.normalize is None else args.normalize,
        sources=_sources(args.source or cfg.subspaces.source),
    )
    cfg.write_resolved(out)
    logger.info(f"jcdyn {args.command}: config {ctx.store.config_hash[:12]}, output {out}")

    try:
        if args.command == "ep-map":
            cmd_ep_map(ctx, toy_gamma=args.toy_gamma)
        elif args.command == "run":
            cmd_run(ctx)
        else:
            COMMANDS[args.command](ctx)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except JcdynError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_SOLVER
    except KeyboardInterrupt:
        logger.info("Received interrupt, shutting down...")
        return EXIT_SOLVER

    if ctx.failures:
        ctx.store.write_failures(ctx.failures)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
