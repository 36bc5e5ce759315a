"""Run stackers over model banks (models x stackers x trials) and collect reports."""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ..errors import ContractViolationError, InvalidInputError, ObstackError
from ..simplex import as_simplex, is_simplex
from ..stackers import (BCRPResult, StackerConfig, run_stacker, solve_bcrp_log,
                        telescoping_regret_check, trace_statistics)
from .scenarios import build_scenario


@dataclass
class RunReport:
    """Everything recorded for one trial.

    ``traces`` hold per-step weights and ensemble log-densities for each
    stacker; ``regret[name][t]`` is the BCRP log-wealth minus the stacker's
    log-wealth over the first ``t + 1`` steps, with BCRP solved on the full
    history.
    """

    scenario: str
    trial: int
    seed: int
    log_densities: np.ndarray
    model_names: list
    traces: list = field(default_factory=list)
    bcrp: Optional[BCRPResult] = None
    bcrp_log_ens: Optional[np.ndarray] = None
    regret: dict = field(default_factory=dict)
    suppress: int = 100
    model_descriptions: list = field(default_factory=list)
    model_events: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    error: Optional[str] = None
    error_step: Optional[int] = None
    config: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.error is None

    @property
    def T(self):
        return self.log_densities.shape[0]

    @property
    def K(self):
        return len(self.model_names)

    @property
    def stacker_names(self):
        return [tr.name for tr in self.traces]

    def trace(self, name):
        for tr in self.traces:
            if tr.name == name:
                return tr
        raise KeyError(name)

    def avg_pll(self, name):
        return self.trace(name).avg_pll()

    def reported_pll(self, name):
        """Average PLL over the steps after the suppression window (None if none remain)."""
        log_ens = self.trace(name).log_ens[self.suppress:]
        return float(np.mean(log_ens)) if log_ens.size else None


def _per_step_log_ens(log_densities, w):
    L = np.asarray(log_densities, dtype=float)
    with np.errstate(divide="ignore"):
        log_w = np.log(np.asarray(w, dtype=float))
    if L.shape[0] == 0:
        return np.zeros(0)
    return logsumexp(L + log_w, axis=1)


def _log_densities_of(report_or_matrix):
    if isinstance(report_or_matrix, RunReport):
        return report_or_matrix.log_densities
    return np.asarray(report_or_matrix, dtype=float)


def compute_stacking_evidence(report, w):
    """Log-evidence ``sum_t log(w . r_t)`` of the stacking model with fixed weights ``w``.

    ``report`` is a :class:`RunReport` or a (T, K) log-density matrix.
    """
    L = _log_densities_of(report)
    w = as_simplex(w)
    if L.ndim != 2 or L.shape[1] != w.size:
        raise InvalidInputError(f"weights have {w.size} entries, densities have shape {L.shape}")
    return float(np.sum(_per_step_log_ens(L, w)))


def compute_bma_evidence_bound(report, w, atol=1e-9):
    """The weighted log-evidence and its upper bound.

    Returns ``(sum_k w_k log p_k(D), max_k log p_k(D))``. The first never
    exceeds the second, nor (Jensen) the stacking evidence with the same
    weights; a violation beyond ``atol`` raises ContractViolationError.
    """
    L = _log_densities_of(report)
    w = as_simplex(w)
    if L.ndim != 2 or L.shape[1] != w.size:
        raise InvalidInputError(f"weights have {w.size} entries, densities have shape {L.shape}")
    per_model = L.sum(axis=0)
    nz = w > 0
    lhs = float(np.dot(w[nz], per_model[nz]))
    rhs = float(per_model.max()) if L.shape[0] else 0.0
    stack = compute_stacking_evidence(L, w)
    scale = atol * max(1.0, abs(rhs), abs(stack))
    if lhs > rhs + scale:
        raise ContractViolationError(f"weighted evidence {lhs} exceeds max_k evidence {rhs}")
    if lhs > stack + scale:
        raise ContractViolationError(f"weighted evidence {lhs} exceeds stacking evidence {stack}")
    return lhs, rhs


def run_stackers(log_densities, stackers):
    """Run each stacker over the same log-density matrix; failures stay per stacker."""
    return [run_stacker(cfg, log_densities) for cfg in stackers]


def _regret_trajectories(bcrp_log_ens, traces):
    base = np.cumsum(bcrp_log_ens)
    return {tr.name: base - np.cumsum(tr.log_ens) for tr in traces}


def run_trial(config, trial, seed):
    """One trial: build the scenario, run every stacker, then solve BCRP."""
    sc = build_scenario(config.scenario, config.data, config.models, seed)
    report = RunReport(config.scenario, trial, seed, sc.log_densities, sc.model_names,
                       suppress=config.suppress, model_descriptions=sc.model_descriptions,
                       model_events=sc.model_events, metadata=sc.metadata, config=config.to_dict())
    if sc.failure is not None:
        report.error = f"{sc.failure}"
        report.error_step = sc.failure.step
        return report
    return finish_report(report, config.stackers)


def finish_report(report, stackers):
    """Fill in stacker traces, BCRP and regret for a report whose densities are known."""
    L = report.log_densities
    report.traces = run_stackers(L, stackers)
    if L.shape[0] == 0:
        report.bcrp = BCRPResult(np.full(report.K, 1.0 / report.K), 0.0, 0.0, 0)
    else:
        report.bcrp = solve_bcrp_log(L)
    report.bcrp_log_ens = _per_step_log_ens(L, report.bcrp.weights)
    report.regret = _regret_trajectories(report.bcrp_log_ens, report.traces)
    return report


def run_experiment(config):
    """One :class:`RunReport` per seed. A model failure aborts only its own trial."""
    return [run_trial(config, i, s) for i, s in enumerate(config.seeds)]


def identity_checks(report):
    """Invariant residuals recorded in the summary.

    ``telescoping`` is the largest O-BMA identity residual over models whose
    final weight did not underflow to zero (those are counted separately).
    """
    out = {"telescoping": {}, "regret_final_error": {},
           "weights_on_simplex": {}, "bma_evidence_bound": None}
    L = report.log_densities
    for tr in report.traces:
        if not tr.ok:
            continue
        if tr.algorithm == "OBMA" and tr.config.initial_weights is None:
            res = telescoping_regret_check(L, tr)
            finite = np.isfinite(res)
            out["telescoping"][tr.name] = {
                "max_abs_residual": float(np.abs(res[finite]).max()) if finite.any() else 0.0,
                "n_underflowed": int((~finite).sum())}
        if tr.log_ens.size:
            direct = float(np.sum(report.bcrp_log_ens) - np.sum(tr.log_ens))
            out["regret_final_error"][tr.name] = abs(float(report.regret[tr.name][-1]) - direct)
        out["weights_on_simplex"][tr.name] = bool(all(is_simplex(w) for w in tr.weights))
    if report.T:
        lhs, rhs = compute_bma_evidence_bound(L, report.bcrp.weights)
        out["bma_evidence_bound"] = {"lhs": lhs, "rhs": rhs,
                                     "stacking": compute_stacking_evidence(L, report.bcrp.weights)}
    return out


def diagnostics(report):
    return trace_statistics(report.log_densities, report.traces)


@dataclass
class SweepRow:
    algorithm: str
    rate: float
    median_pll: Optional[float]
    std_pll: Optional[float]
    n_trials: int
    n_failed: int
    weights_valid: bool
    plls: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def sweep_stacker(algorithm, rate):
    """Stacker config for one sweep cell. For ONS the swept quantity is ``beta``.

    Names avoid "." (the trace column separator), so 0.1 is written ``0p1``.
    """
    tag = format(rate, "g").replace(".", "p")
    if algorithm == "ONS":
        return StackerConfig("ONS", ons_beta=rate, name=f"ons-beta{tag}")
    return StackerConfig(algorithm, learning_rate=rate, name=f"{algorithm.lower()}-lr{tag}")


def sweep_learning_rates(config, algorithms=None, rates=None):
    """Median and standard deviation of the reported PLL per (algorithm, rate) cell.

    Model densities are computed once per trial and reused by every cell.
    Failed cells and aborted trials become table entries instead of stopping
    the sweep.
    """
    algorithms = list(algorithms or config.sweep["algorithms"])
    rates = [float(r) for r in (rates or config.sweep["rates"])]
    cells = [(a, r) for a in algorithms for r in rates]
    plls = {c: [] for c in cells}
    errors = {c: [] for c in cells}
    valid = {c: True for c in cells}
    for i, seed in enumerate(config.seeds):
        sc = build_scenario(config.scenario, config.data, config.models, seed)
        if sc.failure is not None:
            for c in cells:
                errors[c].append(f"trial {i} (seed {seed}) aborted: {sc.failure}")
            continue
        base = RunReport(config.scenario, i, seed, sc.log_densities, sc.model_names,
                         suppress=config.suppress)
        for c in cells:
            try:
                cfg = sweep_stacker(*c)
            except ObstackError as exc:
                errors[c].append(f"seed {seed}: {exc}")
                continue
            report = dataclasses.replace(base, traces=run_stackers(sc.log_densities, [cfg]))
            tr = report.traces[0]
            if not tr.ok:
                errors[c].append(f"seed {seed}: {tr.error} at step {tr.error_step}")
                valid[c] = False
                continue
            valid[c] &= bool(np.all(np.isfinite(tr.weights)) and all(is_simplex(w) for w in tr.weights))
            pll = report.reported_pll(tr.name)
            if pll is not None:
                plls[c].append(pll)
    rows = []
    for c in cells:
        v = np.array(plls[c])
        rows.append(SweepRow(c[0], c[1],
                             float(np.median(v)) if v.size else None,
                             float(np.std(v)) if v.size else None,
                             config.n_trials, len(errors[c]),
                             valid[c], v.tolist(), errors[c]))
    return rows
