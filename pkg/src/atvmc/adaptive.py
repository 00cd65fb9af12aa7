"""Adaptive selection of the active parameter set.

Every parameter gets an importance: the change in the squared LITE if its
active/frozen status were flipped.

* active j:  Delta_j = eps_j^2 - eps^2, either exact (rank-one downdate of
  the inverse already used to solve the equations of motion) or approximate,
  S_jj |alpha_dot_j|^2, which never underestimates the exact value.
* frozen l:  Delta_l = |-i F_l - V_l^dagger alpha_dot|^2 / (S_ll - V_l^dagger S^-1 V_l),
  the Schur-complement gain from reactivating l alone.

The controller freezes while eps^2 < lambda^2 and unfreezes while
eps^2 > lambda^2, one parameter at a time or collectively, and keeps
parameters whose importance is below eta^2 * eps^2 out of the active set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ansatz import ParameterState
from .errors import RankZeroError
from .estimator import EstimateBundle
from .tvmc import Derivative, SolverPolicy, lite_squared_raw, solve_equations_of_motion

log = logging.getLogger(__name__)

INDETERMINATE_FLOOR = 1e-300
NEGATIVE_IMPORTANCE_TOL = -1e-10


@dataclass(frozen=True)
class AdaptivePolicy:
    lambda_mode: str = "fraction"
    lambda_value: float = 1e-2
    eta_sig_sq: float = 0.0
    collective_updates: bool = False
    binary_search_refinement: bool = False
    importance_mode: str = "approximate"

    def __post_init__(self):
        if self.lambda_mode not in ("fraction", "absolute"):
            raise ValueError(f"unknown lambda mode {self.lambda_mode!r}")
        if self.lambda_mode == "fraction" and not self.lambda_value > 0:
            raise ValueError("fractional lambda^2 needs a positive coefficient")
        if self.lambda_mode == "absolute" and self.lambda_value < 0:
            raise ValueError("absolute lambda^2 must be non-negative")
        if not 0 <= self.eta_sig_sq < 1:
            raise ValueError("eta_sig_sq must lie in [0, 1)")
        if self.importance_mode not in ("exact", "approximate"):
            raise ValueError(f"unknown importance mode {self.importance_mode!r}")

    def threshold(self, var_h: float) -> float:
        if self.lambda_mode == "fraction":
            return self.lambda_value * var_h
        return self.lambda_value


# importance formulas


def importance_freeze_approx(S_jj, alpha_dot_j) -> float:
    return float(np.real(S_jj) * abs(alpha_dot_j) ** 2)


def importance_freeze_exact(S, S_inv, F, var_h, epsilon_sq, j, full_rank=True):
    """Exact LITE increase from freezing active index ``j`` (block-local index).

    Returns (delta, mode) where mode is "exact", or "approximate" when
    [S^-1]_jj falls below the floor of a rank-deficient solve.
    """
    S = np.asarray(S)
    S_inv = np.asarray(S_inv)
    F = np.asarray(F)
    n = S.shape[0]
    if not 0 <= j < n:
        raise IndexError(f"active index {j} out of range")
    sjj = float(np.real(S_inv[j, j]))
    floor = INDETERMINATE_FLOOR
    if not full_rank:
        floor = max(floor, 1e-7 * float(np.max(np.real(np.diag(S_inv)))))
    if sjj <= floor:
        alpha_dot_j = -1j * (S_inv[j] @ F)
        return importance_freeze_approx(S[j, j], alpha_dot_j), "approximate"
    rest = np.r_[0:j, j + 1 : n]
    K = S_inv[np.ix_(rest, rest)]
    W = S_inv[rest, j]
    S_red_inv = K - np.outer(W, W.conj()) / sjj
    alpha_red = -1j * (S_red_inv @ F[rest])
    eps_j = lite_squared_raw(var_h, S[np.ix_(rest, rest)], alpha_red)
    return eps_j - epsilon_sq, "exact"


def importance_freeze_exact_all(S_inv, alpha_dot, full_rank=True):
    """All exact freeze importances at once: |alpha_dot_j|^2 / [S^-1]_jj.

    Same value as :func:`importance_freeze_exact`; NaN marks indeterminate entries.
    """
    d = np.real(np.diag(S_inv))
    floor = INDETERMINATE_FLOOR
    if not full_rank:
        floor = max(floor, 1e-7 * float(np.max(d)))
    out = np.full(d.shape, np.nan)
    ok = d > floor
    out[ok] = np.abs(alpha_dot[ok]) ** 2 / d[ok]
    return out


def importance_unfreeze(S_inv, alpha_dot, Vbar_l, Sbar_ll, Fbar_l, guard_rtol=1e-7):
    """Returns (delta, degenerate)."""
    Vbar_l = np.asarray(Vbar_l, dtype=np.complex128)
    Sbar_ll = float(np.real(Sbar_ll))
    denom = Sbar_ll - float(np.real(Vbar_l.conj() @ (np.asarray(S_inv) @ Vbar_l)))
    if not denom > guard_rtol * Sbar_ll or Sbar_ll <= 0:
        return 0.0, True
    num = abs(-1j * Fbar_l - Vbar_l.conj() @ np.asarray(alpha_dot)) ** 2
    return float(num / denom), False


# reports


@dataclass
class ImportanceEntry:
    index: int
    delta: float
    mode: str
    currently_active: bool
    flag: str = ""


@dataclass
class ImportanceReport:
    entries: list
    epsilon_sq: float
    clamped: int = 0

    @property
    def deltas(self) -> np.ndarray:
        return np.array([e.delta for e in self.entries])

    def ascending_active(self) -> list:
        act = [e for e in self.entries if e.currently_active]
        return [e.index for e in sorted(act, key=lambda e: (e.delta, e.index))]

    def descending_frozen(self) -> list:
        fr = [e for e in self.entries if not e.currently_active]
        return [e.index for e in sorted(fr, key=lambda e: (-e.delta, e.index))]

    def entry(self, index: int) -> ImportanceEntry:
        return self.entries[index]


def build_importance_report(bundle: EstimateBundle, derivative: Derivative, policy: AdaptivePolicy,
                            solver: SolverPolicy = SolverPolicy()) -> ImportanceReport:
    a = bundle.active_indices
    S = bundle.S_active()
    F = bundle.F_active()
    ad = derivative.alpha_dot[a]
    meta = derivative.meta
    eps_raw = derivative.epsilon_sq_raw
    entries = [None] * bundle.S.shape[0]
    clamped = 0

    if policy.importance_mode == "exact":
        exact = importance_freeze_exact_all(meta.S_inv, ad, meta.full_rank)
    for k, j in enumerate(a):
        mode, flag = "approximate", ""
        if policy.importance_mode == "exact" and np.isfinite(exact[k]):
            delta, mode = float(exact[k]), "exact"
        else:
            if policy.importance_mode == "exact":
                flag = "indeterminate"
            delta = importance_freeze_approx(S[k, k], ad[k])
        entries[j] = ImportanceEntry(int(j), delta, mode, True, flag)

    for l in bundle.frozen_indices:
        delta, degenerate = importance_unfreeze(
            meta.S_inv, ad, bundle.cross(l), bundle.S[l, l], bundle.F[l], solver.pinv_rtol
        )
        entries[l] = ImportanceEntry(int(l), delta, "exact", False, "degenerate" if degenerate else "")

    for e in entries:
        if e.delta < 0:
            if e.delta < NEGATIVE_IMPORTANCE_TOL:
                clamped += 1
                log.debug("clamping negative importance %.3e for parameter %d", e.delta, e.index)
            e.delta = 0.0
    return ImportanceReport(entries, max(eps_raw, 0.0), clamped)


# events


@dataclass
class Event:
    action: str
    indices: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    epsilon_sq_before: float = float("nan")
    epsilon_sq_after: float = float("nan")
    flags: list = field(default_factory=list)

    @property
    def changes_set(self) -> bool:
        return self.action != "no-op" and bool(self.indices)

    def summary(self) -> str:
        return f"{self.action}:" + "+".join(str(i) for i in self.indices)

    def as_dict(self) -> dict:
        return {
            "action": self.action,
            "indices": [int(i) for i in self.indices],
            "deltas": [float(d) for d in self.deltas],
            "epsilon_sq_before": float(self.epsilon_sq_before),
            "epsilon_sq_after": float(self.epsilon_sq_after),
            "flags": list(self.flags),
        }


def significance_filter(report: ImportanceReport, epsilon_sq: float, eta_sig_sq: float) -> set:
    """Indices with Delta_k < eta^2 * eps^2 (strict)."""
    if not eta_sig_sq:
        return set()
    cut = eta_sig_sq * epsilon_sq
    return {e.index for e in report.entries if e.delta < cut}


def try_freeze_one(active: np.ndarray, report: ImportanceReport, epsilon_sq: float, lam_sq: float,
                   exclude=()) -> Event:
    candidates = [j for j in report.ascending_active() if j not in exclude and active[j]]
    if not candidates:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq)
    j = candidates[0]
    delta = report.entry(j).delta
    if active.sum() <= 1:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq, flags=["last-active"])
    if epsilon_sq + delta > lam_sq:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq)
    active[j] = False
    return Event("freeze", [j], [delta], epsilon_sq, epsilon_sq + delta)


def try_unfreeze_one(active: np.ndarray, report: ImportanceReport, epsilon_sq: float, suppressed=()) -> Event:
    candidates = [
        l for l in report.descending_frozen()
        if l not in suppressed and not active[l] and report.entry(l).flag != "degenerate"
    ]
    if not candidates:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq, flags=["saturated"])
    l = candidates[0]
    delta = report.entry(l).delta
    active[l] = True
    return Event("unfreeze", [l], [delta], epsilon_sq, max(epsilon_sq - delta, 0.0))


def probe_reduced_lite(bundle: EstimateBundle, keep: np.ndarray, solver: SolverPolicy) -> float:
    """Re-solve the equations of motion on the parameter subset ``keep`` and return eps^2 (raw)."""
    S = bundle.S[np.ix_(keep, keep)]
    F = bundle.F[keep]
    samples = None
    if bundle.O_centered is not None:
        cols = np.searchsorted(bundle.active_indices, keep)
        samples = (bundle.O_centered[:, cols], bundle.E_centered)
    try:
        ad, _ = solve_equations_of_motion(S, F, solver, samples)
    except RankZeroError:
        return bundle.energy_variance
    return lite_squared_raw(bundle.energy_variance, S, ad)


def collective_freeze(active: np.ndarray, report: ImportanceReport, epsilon_sq: float, lam_sq: float,
                      policy: AdaptivePolicy, bundle: EstimateBundle | None = None,
                      solver: SolverPolicy = SolverPolicy(), exclude=()) -> Event:
    order = [j for j in report.ascending_active() if j not in exclude and active[j]]
    max_m = min(len(order), int(active.sum()) - 1)
    if max_m <= 0:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq)
    deltas = np.array([report.entry(j).delta for j in order[:max_m]])
    running = epsilon_sq + np.cumsum(deltas)
    fits = np.flatnonzero(running <= lam_sq)
    m = int(fits[-1]) + 1 if fits.size else 0
    predicted = float(running[m - 1]) if m else epsilon_sq
    flags = ["sum"]

    if policy.binary_search_refinement and m >= 2 and bundle is not None:
        base_keep = [k for k in bundle.active_indices if active[k]]

        def eps_after(mm: int) -> float:
            drop = set(order[:mm])
            keep = np.array([k for k in base_keep if k not in drop], dtype=int)
            return probe_reduced_lite(bundle, keep, solver)

        lo, hi = 0, max_m  # lo always feasible
        lo_val = epsilon_sq
        while lo < hi:
            mid = (lo + hi + 1) // 2
            val = eps_after(mid)
            if val <= lam_sq:
                lo, lo_val = mid, val
            else:
                hi = mid - 1
        m, predicted, flags = lo, lo_val, ["binary-search"]

    if m == 0:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq, flags=flags)
    chosen = order[:m]
    active[chosen] = False
    return Event("collective-freeze", list(chosen), [report.entry(j).delta for j in chosen],
                 epsilon_sq, predicted, flags)


def collective_unfreeze(active: np.ndarray, report: ImportanceReport, epsilon_sq: float, lam_sq: float,
                        suppressed=()) -> Event:
    candidates = [
        l for l in report.descending_frozen()
        if l not in suppressed and not active[l] and report.entry(l).flag != "degenerate"
    ]
    if not candidates:
        return Event("no-op", epsilon_sq_before=epsilon_sq, epsilon_sq_after=epsilon_sq, flags=["saturated"])
    running = epsilon_sq
    chosen = []
    for l in candidates:
        chosen.append(l)
        running -= report.entry(l).delta
        if running < lam_sq:
            break
    active[chosen] = True
    return Event("collective-unfreeze", chosen, [report.entry(l).delta for l in chosen],
                 epsilon_sq, max(running, 0.0))


class AdaptiveController:
    """Owns the active mask between estimator refreshes."""

    def __init__(self, policy: AdaptivePolicy, solver: SolverPolicy = SolverPolicy()):
        self.policy = policy
        self.solver = solver
        self.negative_importance_count = 0

    def step(self, params: ParameterState, derivative: Derivative) -> list:
        """Decide set changes for the next step; mutates ``params.active``."""
        policy = self.policy
        bundle = derivative.bundle
        if not np.array_equal(bundle.active, params.active):
            raise ValueError("bundle was estimated for a different active set")
        eps = derivative.epsilon_sq
        lam = policy.threshold(bundle.energy_variance)
        report = build_importance_report(bundle, derivative, policy, self.solver)
        self.negative_importance_count += report.clamped
        active = params.active
        events = []

        suppressed = significance_filter(report, eps, policy.eta_sig_sq)
        base = eps
        exclude = set()
        newly_irrelevant = [j for j in report.ascending_active() if j in suppressed]
        if newly_irrelevant and active.sum() > 1:
            j = newly_irrelevant[0]
            active[j] = False
            exclude.add(j)
            delta = report.entry(j).delta
            events.append(Event("suppress", [j], [delta], eps, eps + delta))
            base = eps + delta

        if eps > lam:
            if policy.collective_updates:
                ev = collective_unfreeze(active, report, eps, lam, suppressed)
            else:
                ev = try_unfreeze_one(active, report, eps, suppressed)
        elif eps < lam:
            if policy.collective_updates:
                ev = collective_freeze(active, report, base, lam, policy, bundle, self.solver, exclude)
            else:
                ev = try_freeze_one(active, report, base, lam, exclude)
        else:
            ev = Event("no-op", epsilon_sq_before=eps, epsilon_sq_after=eps)
        if ev.changes_set or not events:
            events.append(ev)
        return events


__all__ = [
    "AdaptiveController",
    "AdaptivePolicy",
    "Event",
    "ImportanceEntry",
    "ImportanceReport",
    "build_importance_report",
    "collective_freeze",
    "collective_unfreeze",
    "importance_freeze_approx",
    "importance_freeze_exact",
    "importance_freeze_exact_all",
    "importance_unfreeze",
    "probe_reduced_lite",
    "significance_filter",
    "try_freeze_one",
    "try_unfreeze_one",
]
