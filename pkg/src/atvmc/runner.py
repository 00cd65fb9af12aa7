"""Wiring from an ExperimentConfig to runs and output files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import exact
from .adaptive import AdaptiveController, AdaptivePolicy
from .ansatz import make_ansatz
from .config import ExperimentConfig
from .errors import ConfigError, NumericalError
from .estimator import ExactSumEstimator, MetropolisEstimator, SamplerConfig
from .groundstate import SrConfig, optimize_ground_state
from .io import EventLogWriter, TrajectoryWriter, load_checkpoint, save_checkpoint
from .model import TfiHamiltonian
from .simulation import TRAJECTORY_COLUMNS, QuenchSimulation
from .tvmc import SolverPolicy, StepSizeController, TvmcIntegrator

log = logging.getLogger(__name__)

GROUND_STATE_SEED_OFFSET = 1_000_003


def hamiltonian(cfg: ExperimentConfig, which: str) -> TfiHamiltonian:
    g = cfg.model.g1 if which == "g1" else cfg.model.g2
    return TfiHamiltonian.from_g(cfg.model.n_sites, g, cfg.model.J)


def build_ansatz(cfg: ExperimentConfig):
    return make_ansatz(cfg.ansatz.kind, cfg.model.n_sites, cfg.ansatz.density)


def build_estimator(cfg: ExperimentConfig, ansatz, H, n_samples=None, seed_offset=0):
    e = cfg.estimator
    if e.mode == "exact-sum":
        return ExactSumEstimator(ansatz, H, cap=e.enumeration_cap)
    sampler = SamplerConfig(
        n_samples=n_samples or e.n_samples, n_burn=e.n_burn, n_chains=e.n_chains, seed=e.seed + seed_offset
    )
    backend = None if e.backend == "auto" else e.backend
    return MetropolisEstimator(ansatz, H, sampler, backend=backend)


def solver_policy(cfg: ExperimentConfig) -> SolverPolicy:
    s = cfg.solver
    return SolverPolicy(s.kind, s.pinv_rtol, s.snr_threshold, s.diagonal_shift)


def adaptive_policy(cfg: ExperimentConfig) -> AdaptivePolicy:
    a = cfg.adaptive
    return AdaptivePolicy(
        lambda_mode=a.lambda_mode,
        lambda_value=a.lambda_value,
        eta_sig_sq=a.eta_sig_sq,
        collective_updates=a.collective,
        binary_search_refinement=a.binary_search,
        importance_mode=a.importance_mode,
    )


def output_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_ground_state(cfg: ExperimentConfig, checkpoint=None):
    """SR optimization at g1; writes the checkpoint and a JSON summary."""
    ansatz = build_ansatz(cfg)
    H1 = hamiltonian(cfg, "g1")
    gs = cfg.ground_state
    estimator = build_estimator(cfg, ansatz, H1, gs.n_samples or None, GROUND_STATE_SEED_OFFSET)
    sr = SrConfig(
        learning_rate=gs.learning_rate,
        iterations=gs.iterations,
        diagonal_shift=gs.diagonal_shift,
        shift_floor=gs.shift_floor,
        tol=gs.tol,
        seed=gs.seed,
    )
    result = optimize_ground_state(ansatz, H1, sr, estimator)
    info = {
        "g1": cfg.model.g1,
        "J": cfg.model.J,
        "energy": result.energy,
        "energy_variance": result.variance,
        "iterations": result.iterations,
        "converged": result.converged,
        "estimator": cfg.estimator.mode,
    }
    if cfg.model.n_sites <= exact.DEFAULT_ORACLE_CAP:
        e_ed, psi_ed = exact.exact_ground_state(H1)
        fid, _ = exact.variational_fidelity(result.params, ansatz, psi_ed)
        info["energy_ed"] = e_ed
        info["overlap_ed"] = fid
    out = output_dir(cfg)
    path = Path(checkpoint) if checkpoint else out / "checkpoint.json"
    save_checkpoint(path, ansatz, result.params, info)
    (out / "ground_state_summary.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
    return path, result


def _load_matching_checkpoint(cfg: ExperimentConfig, checkpoint):
    path = Path(checkpoint) if checkpoint else Path(cfg.output.directory) / "checkpoint.json"
    if not path.exists():
        log.info("no checkpoint at %s; preparing the ground state first", path)
        run_ground_state(cfg, path)
    ansatz, params, info = load_checkpoint(path)
    if ansatz.kind != cfg.ansatz.kind or ansatz.n_sites != cfg.model.n_sites:
        raise ConfigError(f"checkpoint {path} holds a {ansatz.kind} ansatz on {ansatz.n_sites} sites")
    if ansatz.kind == "rbm" and ansatz.density != cfg.ansatz.density:
        raise ConfigError(f"checkpoint {path} has density {ansatz.density}")
    return ansatz, params, info


@dataclass
class QuenchResult:
    trajectory: Path
    events: Path | None
    simulation: QuenchSimulation
    initial: object
    ansatz: object


def run_quench(cfg: ExperimentConfig, checkpoint=None, name: str = "trajectory") -> QuenchResult:
    ansatz, params, _ = _load_matching_checkpoint(cfg, checkpoint)
    H2 = hamiltonian(cfg, "g2")
    estimator = build_estimator(cfg, ansatz, H2)
    integ = TvmcIntegrator(estimator, solver_policy(cfg))
    policy = adaptive_policy(cfg)
    controller = AdaptiveController(policy, integ.policy) if cfg.adaptive.enabled else None
    step_control = None
    i = cfg.integrator
    if i.adaptive_dt:
        step_control = StepSizeController(tol=i.tol_step, dt_min=i.dt_min, dt_max=i.dt_max)

    out = output_dir(cfg)
    formats = {f.strip() for f in cfg.output.formats.split(",")}
    meta = {"config_hash": cfg.config_hash(), "seed": cfg.estimator.seed, "kernel_backend": "n/a"}
    if isinstance(estimator, MetropolisEstimator):
        meta["kernel_backend"] = estimator.kernels.BACKEND
    traj_path = out / f"{name}.csv"
    writer = TrajectoryWriter(traj_path, TRAJECTORY_COLUMNS, meta)
    events = EventLogWriter(out / f"{name}_events.jsonl") if "jsonl" in formats else None
    sim = QuenchSimulation(
        integ,
        params,
        t_total=cfg.run.t_total,
        dt=i.dt,
        scheme=i.kind,
        step_control=step_control,
        controller=controller,
        threshold_policy=policy,
        record_every=cfg.run.record_every,
        on_record=lambda rec: writer.write(rec.row()),
        on_events=events.write if events else None,
    )
    try:
        sim.run()
    except NumericalError as exc:
        writer.write_error(f"{type(exc).__name__}: {exc}")
        raise
    finally:
        writer.close()
        if events:
            events.close()
    return QuenchResult(traj_path, events.path if events else None, sim, params, ansatz)


# absolute round-off allowance for the bound check (the distance at t=0 is ~1e-16, the bound exactly 0)
BOUND_SLACK = 1e-12

COMPARISON_COLUMNS = (
    "time",
    "sigma_x_variational",
    "sigma_x_exact",
    "sigma_x_diff",
    "fidelity",
    "distance",
    "cumulative_bound",
    "bound_holds",
)


def run_compare(cfg: ExperimentConfig, checkpoint=None):
    """Variational quench against exact propagation on the recorded times.

    sigma_x_exact evolves the exact g1 ground state. The distance column
    evolves the variational initial state exactly, so that it starts at zero
    like the integrated LITE it is compared with.
    """
    if cfg.model.n_sites > exact.DEFAULT_ORACLE_CAP:
        raise ConfigError(f"compare needs n_sites <= {exact.DEFAULT_ORACLE_CAP}")
    res = run_quench(cfg, checkpoint)
    sim = res.simulation
    H1, H2 = hamiltonian(cfg, "g1"), hamiltonian(cfg, "g2")
    Hs = exact.build_hamiltonian(H2)
    _, psi_gs = exact.exact_ground_state(H1)
    psi_var0 = exact.variational_state(res.initial, res.ansatz)

    times = [t for t, _ in sim.parameter_history]
    values = [v for _, v in sim.parameter_history]
    bounds = [r.cumulative_bound for r in sim.records]
    sx_var = [r.sigma_x for r in sim.records]
    if not times:
        times, values, bounds = [0.0], [res.initial.values], [0.0]
        sx_var = [exact.sigma_x(psi_var0, cfg.model.n_sites)]
    ref_gs = exact.exact_evolve_at(psi_gs, Hs, times)
    ref_var = exact.exact_evolve_at(psi_var0, Hs, times)

    rows = []
    N = cfg.model.n_sites
    for t, vals, bound, sxv, a, b in zip(times, values, bounds, sx_var, ref_gs, ref_var):
        sxe = exact.sigma_x(a, N)
        fid, dist = exact.variational_fidelity(vals, res.ansatz, b)
        rows.append((t, sxv, sxe, sxv - sxe, fid, dist, bound, int(bound + BOUND_SLACK >= dist)))
    path = Path(cfg.output.directory) / "comparison.csv"
    meta = {"config_hash": cfg.config_hash(), "seed": cfg.estimator.seed}
    with TrajectoryWriter(path, COMPARISON_COLUMNS, meta) as w:
        for row in rows:
            w.write(row)
    return path, rows
