"""The (adaptive) tVMC time loop.

Each step: estimate + solve at the current parameters, record, advance the
active parameters, then let the controller change the active set for the
next step. Set changes therefore show up at the next evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .adaptive import AdaptiveController, AdaptivePolicy
from .ansatz import ParameterState
from .tvmc import Derivative, StepSizeController, TvmcIntegrator, adaptive_step_control

TRAJECTORY_COLUMNS = (
    "step",
    "time",
    "sigma_x",
    "energy_mean",
    "energy_mean_imag",
    "energy_variance",
    "epsilon_sq",
    "epsilon_sq_raw",
    "lambda_lite_sq",
    "active_count",
    "cumulative_bound",
    "dt_used",
    "solver_rank",
    "discarded_mass",
    "events",
)


@dataclass
class TrajectoryRecord:
    step: int
    time: float
    sigma_x: float
    energy_mean: float
    energy_mean_imag: float
    energy_variance: float
    epsilon_sq: float
    epsilon_sq_raw: float
    lambda_lite_sq: float
    active_count: int
    cumulative_bound: float
    dt_used: float
    solver_rank: int
    discarded_mass: float
    events: str

    def row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


class QuenchSimulation:
    """Drive ``integrator`` from ``params`` up to ``t_total``.

    ``threshold_policy`` only resolves lambda^2 for the output column; the
    active set is changed only when ``controller`` is given.
    """

    def __init__(self, integrator: TvmcIntegrator, params: ParameterState, *, t_total: float,
                 dt: float = 1e-3, scheme: str = "heun", step_control: StepSizeController | None = None,
                 controller: AdaptiveController | None = None, threshold_policy: AdaptivePolicy | None = None,
                 record_every: int = 1, on_record=None, on_events=None):
        if scheme not in ("euler", "heun"):
            raise ValueError(f"unknown integrator {scheme!r}")
        if step_control is not None and scheme != "heun":
            raise ValueError("adaptive time steps require the Heun integrator")
        if dt <= 0 or t_total < 0:
            raise ValueError("need dt > 0 and t_total >= 0")
        self.integrator = integrator
        self.params = params.copy()
        self.t_total = t_total
        self.dt = dt
        self.scheme = scheme
        self.step_control = step_control
        self.controller = controller
        self.threshold_policy = threshold_policy or (controller.policy if controller else None)
        self.record_every = max(1, int(record_every))
        self.on_record = on_record
        self.on_events = on_events
        self.records: list = []
        self.time = 0.0
        self.bound = 0.0
        self.n_accepted = 0
        self.parameter_history: list = []

    def _step(self, params, dt, first):
        if self.scheme == "euler":
            return self.integrator.step_euler(params, dt, first)
        return self.integrator.step_heun(params, dt, first)

    def _finish_step(self, d1: Derivative, dt_used: float, new_params: ParameterState, run_controller: bool):
        events = []
        if self.controller is not None and run_controller:
            probe = self.params.copy()
            events = self.controller.step(probe, d1)
            new_params.active[:] = probe.active
        bundle = d1.bundle
        lam = self.threshold_policy.threshold(bundle.energy_variance) if self.threshold_policy else math.nan
        summary = ";".join(ev.summary() for ev in events if ev.changes_set)
        if self.n_accepted % self.record_every == 0:
            rec = TrajectoryRecord(
                step=self.n_accepted,
                time=self.time,
                sigma_x=bundle.observables["sigma_x"],
                energy_mean=bundle.energy_mean.real,
                energy_mean_imag=bundle.energy_mean.imag,
                energy_variance=bundle.energy_variance,
                epsilon_sq=d1.epsilon_sq,
                epsilon_sq_raw=d1.epsilon_sq_raw,
                lambda_lite_sq=lam,
                active_count=int(self.params.n_active),
                cumulative_bound=self.bound,
                dt_used=dt_used,
                solver_rank=d1.meta.rank,
                discarded_mass=d1.meta.discarded_mass,
                events=summary,
            )
            self.records.append(rec)
            self.parameter_history.append((self.time, self.params.values.copy()))
            if self.on_record:
                self.on_record(rec)
        if self.on_events and events:
            self.on_events(self.n_accepted, self.time, events)
        self.bound += math.sqrt(max(d1.epsilon_sq, 0.0)) * dt_used
        self.time += dt_used
        self.n_accepted += 1
        self.params = new_params

    def run(self) -> list:
        if self.step_control is None:
            n_steps = math.ceil(self.t_total / self.dt - 1e-9)
            for n in range(n_steps):
                d1 = self.integrator.derivative(self.params)
                new, _ = self._step(self.params, self.dt, d1)
                self.time = n * self.dt
                self._finish_step(d1, self.dt, new, True)
            self.time = n_steps * self.dt
            return self.records

        dt = self.dt
        first = None
        while self.time < self.t_total - 1e-12:
            dt_try = min(dt, self.t_total - self.time)
            accepted, dt_next, new, first, _ = adaptive_step_control(
                self.integrator, self.params, dt_try, self.step_control, first
            )
            dt = dt_next
            if not accepted:
                continue
            # the active set is updated once every two accepted steps
            self._finish_step(first, dt_try, new, self.n_accepted % 2 == 0)
            first = None
        return self.records


def energy_drift(records) -> float:
    e = np.array([r.energy_mean for r in records])
    return float(np.max(np.abs(e - e[0]))) if e.size else 0.0
