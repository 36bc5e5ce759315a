"""Machine-readable outputs: per-step ``trace.csv`` and ``summary.json``.

``trace.csv`` columns are ``t``, ``log_r_1..log_r_K`` (per-model log
predictive densities; logs rather than raw densities so that nothing
underflows), then for every stacker ``<name>.w_1..<name>.w_K``,
``<name>.log_ens``, ``<name>.avg_pll`` and ``<name>.regret``. Floats are
written with 17 significant digits so that a trace replays bit-for-bit.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from ..errors import InvalidInputError
from ..simplex import is_simplex
from ..stackers import solve_bcrp_log
from ..stackers.identities import _used_log_densities
from .experiment import diagnostics, identity_checks

SCHEMA_VERSION = "1.0"
STACKER_FIELDS = ("log_ens", "avg_pll", "regret")
OBS_ALGORITHMS = ("EG", "SmoothedEG", "SoftBayes", "ONS", "DONS")

_num_or_null = {"type": ["number", "null"]}
_vec = {"type": "array", "items": _num_or_null}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenario", "trial", "seed", "status", "T", "K", "suppress",
                 "models", "stackers", "bcrp", "identity_checks", "error"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"type": "string"},
        "trial": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "status": {"enum": ["ok", "aborted"]},
        "T": {"type": "integer", "minimum": 0},
        "K": {"type": "integer", "minimum": 1},
        "suppress": {"type": "integer", "minimum": 0},
        "models": {"type": "array", "items": {"type": "object", "required": ["name"]}},
        "model_events": {"type": "object"},
        "stackers": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["algorithm", "params", "final_weights", "avg_pll", "avg_pll_reported",
                             "log_wealth", "regret", "collapse_events", "n_floored_steps", "error",
                             "error_step"],
                "properties": {
                    "algorithm": {"type": "string"},
                    "params": {"type": "object"},
                    "final_weights": _vec,
                    "avg_pll": _num_or_null,
                    "avg_pll_reported": _num_or_null,
                    "log_wealth": _num_or_null,
                    "regret": _num_or_null,
                    "collapse_events": {"type": "array"},
                    "n_floored_steps": {"type": "integer", "minimum": 0},
                    "error": {"type": ["string", "null"]},
                    "error_step": {"type": ["integer", "null"]},
                },
            },
        },
        "bcrp": {"type": ["object", "null"]},
        "identity_checks": {"type": ["object", "null"]},
        "diagnostics": {"type": ["object", "null"]},
        "error": {"type": ["object", "null"]},
        "metadata": {"type": "object"},
        "config": {"type": "object"},
    },
}


def _jsonable(obj):
    """Plain Python types for JSON; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def dump_json(obj, path):
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _last(a):
    return float(a[-1]) if len(a) else None


def summarize(report):
    """The summary document for one trial (validated against SUMMARY_SCHEMA)."""
    stackers = {}
    for tr in report.traces:
        finite = np.isfinite(tr.log_ens)
        stackers[tr.name] = {
            "algorithm": tr.algorithm,
            "params": tr.config.params(),
            "final_weights": tr.final_weights,
            "avg_pll": _last(tr.avg_pll()),
            "avg_pll_reported": report.reported_pll(tr.name),
            "log_wealth": float(np.sum(tr.log_ens)) if finite.all() else None,
            "regret": _last(report.regret[tr.name]),
            "collapse_events": [{"step": s, "model": report.model_names[k]} for s, k in tr.collapse_events],
            "n_floored_steps": tr.n_floored,
            "error": tr.error,
            "error_step": tr.error_step,
        }
    bcrp = None
    if report.bcrp is not None:
        bcrp = {"weights": report.bcrp.weights, "log_wealth": float(np.sum(report.bcrp_log_ens)),
                "fw_gap": report.bcrp.gap, "iterations": report.bcrp.iterations}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "scenario": report.scenario,
        "trial": report.trial,
        "seed": report.seed,
        "status": "ok" if report.ok else "aborted",
        "T": report.T,
        "K": report.K,
        "suppress": report.suppress,
        "models": report.model_descriptions or [{"name": n} for n in report.model_names],
        "model_events": report.model_events,
        "stackers": stackers,
        "bcrp": bcrp,
        "identity_checks": identity_checks(report) if report.ok else None,
        "diagnostics": diagnostics(report) if report.ok else None,
        "error": None if report.ok else {"step": report.error_step, "cause": report.error},
        "metadata": report.metadata,
        "config": report.config,
    }
    doc = _jsonable(doc)
    validate_summary(doc)
    return doc


def validate_summary(doc):
    jsonschema.validate(doc, SUMMARY_SCHEMA)


def trace_header(model_count, stacker_names):
    cols = ["t"] + [f"log_r_{k + 1}" for k in range(model_count)]
    for name in stacker_names:
        cols += [f"{name}.w_{k + 1}" for k in range(model_count)]
        cols += [f"{name}.{f}" for f in STACKER_FIELDS]
    return cols


def _fmt(v):
    return format(float(v), ".17g")


def write_trace(report, path):
    header = trace_header(report.K, report.stacker_names)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        avg = {tr.name: tr.avg_pll() for tr in report.traces}
        for t in range(report.T):
            row = [str(t + 1)] + [_fmt(v) for v in report.log_densities[t]]
            for tr in report.traces:
                row += [_fmt(v) for v in tr.weights[t]]
                row += [_fmt(tr.log_ens[t]), _fmt(avg[tr.name][t]), _fmt(report.regret[tr.name][t])]
            w.writerow(row)


def write_report(report, out_dir):
    """Write ``trace.csv`` and ``summary.json`` into ``out_dir``; returns both paths.

    An aborted trial has no stacker output, so only its summary is written.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {"summary": os.path.join(out_dir, "summary.json")}
    if report.ok:
        paths["trace"] = os.path.join(out_dir, "trace.csv")
        write_trace(report, paths["trace"])
    dump_json(summarize(report), paths["summary"])
    return paths


def trial_dir(out_dir, report):
    return os.path.join(out_dir, f"trial_{report.trial:03d}_seed_{report.seed}")


def aggregate(reports):
    """Median and 10th/90th percentiles of the reported PLL per stacker across ok trials."""
    names = []
    for r in reports:
        for n in r.stacker_names:
            if n not in names:
                names.append(n)
    out = {}
    for n in names:
        vals = [r.reported_pll(n) for r in reports if r.ok and n in r.stacker_names
                and r.trace(n).ok and r.reported_pll(n) is not None]
        v = np.array(vals)
        out[n] = {"n": int(v.size),
                  "median_pll": float(np.median(v)) if v.size else None,
                  "p10_pll": float(np.percentile(v, 10)) if v.size else None,
                  "p90_pll": float(np.percentile(v, 90)) if v.size else None}
    return out


def write_experiment(reports, config, out_dir):
    """Per-trial reports plus ``experiment.json`` with cross-trial aggregates."""
    os.makedirs(out_dir, exist_ok=True)
    trials = []
    for r in reports:
        d = trial_dir(out_dir, r)
        write_report(r, d)
        failed = [tr.name for tr in r.traces if not tr.ok]
        trials.append({"trial": r.trial, "seed": r.seed, "dir": os.path.basename(d),
                       "status": "ok" if r.ok else "aborted", "error": r.error,
                       "failed_stackers": failed})
    doc = {"schema_version": SCHEMA_VERSION, "scenario": config.scenario, "trials": trials,
           "aggregate": aggregate(reports), "config": config.to_dict()}
    path = os.path.join(out_dir, "experiment.json")
    dump_json(doc, path)
    return path


def write_sweep(rows, path):
    """Sweep table as CSV: one row per (algorithm, rate) cell."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "rate", "median_pll", "std_pll", "n_trials", "n_failed", "weights_valid"])
        for r in rows:
            w.writerow([r.algorithm, format(r.rate, "g"),
                        "nan" if r.median_pll is None else _fmt(r.median_pll),
                        "nan" if r.std_pll is None else _fmt(r.std_pll),
                        r.n_trials, r.n_failed, int(r.weights_valid)])


@dataclass
class TraceTable:
    """Parsed ``trace.csv``."""

    t: np.ndarray
    log_densities: np.ndarray  # (T, K)
    stackers: dict = field(default_factory=dict)  # name -> {"weights", "log_ens", "avg_pll", "regret"}

    @property
    def K(self):
        return self.log_densities.shape[1]


def read_trace(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise InvalidInputError(f"{path} is not a trace file (missing 't' column)")
    header = rows[0]
    K = sum(1 for c in header if c.startswith("log_r_"))
    if K < 1 or header[1:1 + K] != [f"log_r_{k + 1}" for k in range(K)]:
        raise InvalidInputError(f"{path}: expected columns log_r_1..log_r_K after 't'")
    rest = header[1 + K:]
    if len(rest) % (K + 3):
        raise InvalidInputError(f"{path}: {len(rest)} stacker columns is not a multiple of K+3={K + 3}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    table = TraceTable(data[:, 0].astype(int), data[:, 1:1 + K])
    for s in range(len(rest) // (K + 3)):
        cols = rest[s * (K + 3):(s + 1) * (K + 3)]
        name = cols[0].rsplit(".", 1)[0]
        if cols != trace_header(K, [name])[1 + K:]:
            raise InvalidInputError(f"{path}: malformed column block for stacker {name!r}")
        off = 1 + K + s * (K + 3)
        table.stackers[name] = {"weights": data[:, off:off + K],
                                "log_ens": data[:, off + K],
                                "avg_pll": data[:, off + K + 1],
                                "regret": data[:, off + K + 2]}
    return table


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (tol {self.tolerance:.0e})"


def _algorithms_from_summary(path):
    summary = os.path.join(os.path.dirname(os.path.abspath(path)), "summary.json")
    if not os.path.exists(summary):
        return {}
    with open(summary, encoding="utf-8") as fh:
        doc = json.load(fh)
    return {n: s.get("algorithm") for n, s in doc.get("stackers", {}).items()}


def check_trace(path, algorithms=None, floor=1e-300):
    """Re-run identity and invariant checks on an emitted trace.

    Algorithms are read from the neighbouring ``summary.json`` when not
    given; the O-BMA telescoping identity is checked for O-BMA stackers,
    using each stacker's last two weight rows as ``w_{T-1}``, ``w_T``.
    """
    table = read_trace(path)
    algorithms = _algorithms_from_summary(path) if algorithms is None else algorithms
    T = table.t.size
    results = []
    bcrp_ens = None
    if T:
        bcrp = solve_bcrp_log(table.log_densities)
        with np.errstate(divide="ignore"):
            bcrp_ens = np.logaddexp.reduce(table.log_densities + np.log(bcrp.weights), axis=1)
        results.append(CheckResult("bcrp.fw_gap", bcrp.gap <= 1e-6, bcrp.gap, 1e-6))
    used = _used_log_densities(table.log_densities, floor) if T else table.log_densities
    results.append(CheckResult("t.strictly_increasing", bool(np.all(np.diff(table.t) > 0)),
                               0.0 if np.all(np.diff(table.t) > 0) else 1.0, 0.0))
    for name, s in table.stackers.items():
        ok_rows = np.all(np.isfinite(s["weights"]), axis=1) & np.isfinite(s["log_ens"])
        # A stacker that failed mid-stream is checked on its completed prefix.
        n = T if ok_rows.all() else int(np.argmin(ok_rows))
        idx = np.arange(1, n + 1)
        err = float(np.abs(s["avg_pll"][:n] - np.cumsum(s["log_ens"][:n]) / idx).max()) if n else 0.0
        results.append(CheckResult(f"{name}.avg_pll", err <= 1e-9, err, 1e-9))
        bad = sum(not is_simplex(w) for w in s["weights"][:n])
        results.append(CheckResult(f"{name}.weights_on_simplex", bad == 0, float(bad), 0.0))
        if n:
            with np.errstate(divide="ignore"):
                ens = np.logaddexp.reduce(used[:n] + np.log(s["weights"][:n]), axis=1)
            err = float(np.abs(ens - s["log_ens"][:n]).max())
            results.append(CheckResult(f"{name}.log_ens", err <= 1e-8, err, 1e-8))
        if n == T and T:
            direct = float(np.cumsum(bcrp_ens)[-1] - np.sum(s["log_ens"]))
            err = abs(float(s["regret"][-1]) - direct)
            results.append(CheckResult(f"{name}.regret_vs_bcrp", err <= 1e-6, err, 1e-6))
            if algorithms.get(name) in OBS_ALGORITHMS:
                results.append(CheckResult(f"{name}.regret_nonnegative", s["regret"][-1] >= -1e-6,
                                           float(s["regret"][-1]), -1e-6))
        if algorithms.get(name) == "OBMA" and n == T and T >= 2:
            W = s["weights"]
            with np.errstate(divide="ignore"):
                rhs = np.log(W[-1]) - np.log(W[0])
            lhs = used[:T - 1].sum(axis=0) - np.sum(s["log_ens"][:T - 1])
            finite = np.isfinite(rhs)
            err = float(np.abs(lhs - rhs)[finite].max()) if finite.any() else 0.0
            tol = 1e-8 * max(1.0, float(np.abs(lhs).max()))
            results.append(CheckResult(f"{name}.telescoping", err <= tol, err, tol))
    return results
