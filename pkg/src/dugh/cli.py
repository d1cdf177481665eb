"""Command-line front end.

Subcommands: ``simulate``, ``fit``, ``benchmark`` and ``cov-recovery``.
Parameters come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command-line flags. Exit status is 0 on
success, 1 on a runtime or numerical failure and 2 on a usage or config
error.
"""
import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics, simgen
from .matio import load_matrix, save_matrix
from .model import FitResult
from .solver_baseline import fit_champagne
from .solver_full import FitConfig, fit_full
from .solver_thin import fit_thin

log = logging.getLogger("dugh")

OUTPUT_ENV = "DUGH_OUTPUT_DIR"
DEFAULT_OUTPUT = "dugh-output"
SOLVERS = ("full", "thin", "champagne")
PROTOCOLS = ("ar", "toeplitz_ar1", "full_random")
BENCH_COLUMNS = (
    "solver", "snr_db", "t_samples", "ar_order", "g_trials", "seed",
    "emd", "tce", "nmse", "similarity_error", "runtime_seconds", "iterations",
)
CELL_KEYS = ("solver", "snr_db", "t_samples", "ar_order", "g_trials")
METRIC_KEYS = ("emd", "tce", "nmse", "similarity_error", "runtime_seconds", "iterations")


class UsageError(ValueError):
    pass


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list_of(kind):
    def parse(text):
        items = [s.strip() for s in str(text).split(",") if s.strip()]
        if not items:
            raise ValueError("empty list")
        return [kind(s) for s in items]
    parse.__name__ = f"list_of_{kind.__name__}"
    return parse


_ints = _list_of(int)
_floats = _list_of(float)
_strs = _list_of(str)

# key -> (parser, default, help)
_SIM_KEYS = {
    "n_sources": (int, 8, "number of candidate sources N"),
    "n_active": (int, 2, "number of active sources"),
    "m_sensors": (int, 5, "number of sensors M"),
    "t_samples": (int, 10, "time samples per trial T"),
    "g_trials": (int, 2, "number of trials G"),
    "ar_order": (int, 1, "AR order of the source time courses"),
    "alpha": (float, 0.8, "signal fraction; SNR = 20 log10(alpha / (1 - alpha))"),
    "beta": (float, 0.8, "AR(1) coefficient for the toeplitz_ar1 protocol"),
    "protocol": (str, "ar", f"data model, one of {', '.join(PROTOCOLS)}"),
    "lead_field": (str, None, "matrix file with an external lead field"),
}
_FIT_KEYS = {
    "tol": (float, 1e-8, "relative change of the posterior mean at convergence"),
    "max_iter": (int, 1000, "iteration cap"),
    "homoscedastic": (_bool, False, "tie all sensor noise variances"),
}
_COMMON_KEYS = {
    "seed": (int, 0, "random seed"),
    "out": (str, None, f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})"),
}
_SWEEP_KEYS = {
    "n_sources": (int, 100, "number of candidate sources N"),
    "n_active": (int, 3, "number of active sources"),
    "m_sensors": (int, 20, "number of sensors M"),
    "beta": (float, 0.8, "AR(1) coefficient for the toeplitz_ar1 protocol"),
    "n_seeds": (int, 10, "seeds per cell, counted up from --seed"),
    "workers": (int, 1, "parallel worker processes"),
}

COMMANDS = {
    "simulate": {**_COMMON_KEYS, **_SIM_KEYS},
    "fit": {
        **_COMMON_KEYS,
        **_FIT_KEYS,
        "data": (str, None, "directory written by `dugh simulate`"),
        "solver": (str, "thin", f"one of {', '.join(SOLVERS)}"),
        "embed_len": (int, None, "circulant embedding length for thin (default 2T+1)"),
    },
    "benchmark": {
        **_COMMON_KEYS,
        **_FIT_KEYS,
        **_SWEEP_KEYS,
        "solvers": (_strs, ["thin", "champagne"], "comma-separated solvers"),
        "protocol": (str, "ar", f"data model, one of {', '.join(PROTOCOLS)}"),
        "alphas": (_floats, [0.8], "comma-separated alpha values"),
        "t_samples": (_ints, [100], "comma-separated T values"),
        "ar_orders": (_ints, [1], "comma-separated AR orders"),
        "g_trials": (_ints, [1], "comma-separated trial counts"),
    },
    "cov-recovery": {
        **_COMMON_KEYS,
        **_FIT_KEYS,
        **_SWEEP_KEYS,
        "n_sources": (int, 40, "number of candidate sources N"),
        "m_sensors": (int, 10, "number of sensors M"),
        "solvers": (_strs, ["thin"], "comma-separated solvers"),
        "protocol": (str, "toeplitz_ar1", "toeplitz_ar1 or full_random"),
        "alpha": (float, 0.5, "signal fraction"),
        "t_samples": (int, 30, "time samples per trial T"),
        "g_trials": (_ints, [10, 30, 50], "comma-separated trial counts"),
    },
}


def read_config(path, allowed):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = allowed[key][0](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def resolve(command, args):
    """Merge defaults, config file and flags into one dict."""
    keys = COMMANDS[command]
    values = {k: spec[1] for k, spec in keys.items()}
    if args.config:
        values.update(read_config(args.config, keys))
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    if values.get("out") is None:
        values["out"] = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    _check_values(command, values)
    return values


def _check_values(command, v):
    for name in ("solver",):
        if name in v and v[name] not in SOLVERS:
            raise UsageError(f"unknown solver {v[name]!r}; choose from {', '.join(SOLVERS)}")
    for s in v.get("solvers", []):
        if s not in SOLVERS:
            raise UsageError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
    if v.get("protocol") is not None and v["protocol"] not in PROTOCOLS:
        raise UsageError(f"unknown protocol {v['protocol']!r}")
    if command == "cov-recovery" and v["protocol"] == "ar":
        raise UsageError("cov-recovery needs protocol toeplitz_ar1 or full_random")
    for a in v.get("alphas", []) + ([v["alpha"]] if "alpha" in v else []):
        if not 0 < a < 1:
            raise UsageError(f"alpha must lie in (0, 1), got {a}")
    if "tol" in v and v["tol"] <= 0:
        raise UsageError("tol must be positive")
    for name in ("max_iter", "n_seeds", "workers"):
        if name in v and v[name] < 1:
            raise UsageError(f"{name} must be at least 1")


def _sim_config(v, **override):
    fields = ("n_sources", "n_active", "m_sensors", "t_samples", "ar_order", "alpha", "g_trials", "beta")
    kw = {k: v[k] for k in fields if k in v}
    kw.update(override)
    kw["seed"] = v["seed"]
    try:
        return simgen.SimConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _simulate(config, protocol, rng, lead=None):
    if protocol == "ar":
        return simgen.simulate_ar_dataset(config, rng, lead)
    return simgen.simulate_kron_dataset(config, rng, kind=protocol, lead=lead)


def _output_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def _stack(a):
    """``(G, R, T)`` -> ``(G*R, T)`` for the 2-D file format."""
    return np.asarray(a).reshape(-1, np.asarray(a).shape[-1])


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(v):
    lead = simgen.load_lead_field(v["lead_field"]) if v["lead_field"] else None
    if lead is not None:
        v = {**v, "m_sensors": lead.shape[0], "n_sources": lead.shape[1]}
    config = _sim_config(v)
    data = _simulate(config, v["protocol"], np.random.default_rng(v["seed"]), lead)
    out = _output_dir(v["out"])
    files = {"lead_field": "lead_field.txt", "sources": "sources.txt", "b_true": "b_true.txt"}
    save_matrix(out / files["lead_field"], data["lead"])
    trial_files = []
    for g, y in enumerate(data["trials"]):
        name = f"trial_{g:03d}.txt"
        save_matrix(out / name, y)
        trial_files.append(name)
    save_matrix(out / files["sources"], _stack(data["sources"]))
    save_matrix(out / files["b_true"], data["b_true"])
    manifest = {
        "seed": v["seed"],
        "protocol": v["protocol"],
        "config": {k: v[k] for k in _SIM_KEYS if k not in ("lead_field", "protocol")},
        "snr_db": simgen.snr_from_alpha(config.alpha),
        "active": [int(i) for i in data["active"]],
        "files": {**files, "trials": trial_files},
    }
    manifest["config"].update(m_sensors=config.m_sensors, n_sources=config.n_sources)
    _write_json(out / "manifest.json", manifest)
    log.info("wrote %d files to %s", len(trial_files) + 4, out)
    return 0


def load_dataset(directory):
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except OSError as exc:
        raise UsageError(f"no dataset manifest in {directory}: {exc.strerror}") from None
    files = manifest["files"]
    lead = load_matrix(directory / files["lead_field"])
    trials = np.stack([load_matrix(directory / f) for f in files["trials"]])
    data = {"manifest": manifest, "lead": lead, "trials": trials}
    for key in ("sources", "b_true"):
        if key in files and (directory / files[key]).exists():
            data[key] = load_matrix(directory / files[key])
    if "sources" in data:
        data["sources"] = data["sources"].reshape(trials.shape[0], lead.shape[1], -1)
    return data


def run_solver(name, lead, trials, config, embed_len=None):
    if name == "full":
        return fit_full(lead, trials, config)
    if name == "thin":
        return fit_thin(lead, trials, config, embed_len=embed_len)
    if name == "champagne":
        return fit_champagne(lead, trials, config)
    raise UsageError(f"unknown solver {name!r}")


def _fit_config(v):
    return FitConfig(tol=v["tol"], max_iter=v["max_iter"], seed=v["seed"], homoscedastic=v["homoscedastic"])


def write_fit(out, result: FitResult, meta):
    save_matrix(out / "posterior_means.txt", _stack(result.posterior_means))
    save_matrix(out / "h.txt", result.spatial.h[None])
    save_matrix(out / "b.txt", result.b)
    if result.spectrum is not None:
        save_matrix(out / "spectrum.txt", result.spectrum[None])
    with open(out / "nll_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "nll"])
        for k, value in enumerate(result.nll_trace):
            w.writerow([k, repr(float(value))])
    info = {
        **meta,
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "final_nll": float(result.nll_trace[-1]) if len(result.nll_trace) else None,
        "diagnostics": {k: (int(x) if isinstance(x, (int, np.integer)) else x) for k, x in result.diagnostics.items()},
    }
    _write_json(out / "fit.json", info)


def cmd_fit(v):
    if not v["data"]:
        raise UsageError("fit needs --data (a directory written by `dugh simulate`)")
    data = load_dataset(v["data"])
    config = _fit_config(v)
    start = time.perf_counter()
    result = run_solver(v["solver"], data["lead"], data["trials"], config, v["embed_len"])
    runtime = time.perf_counter() - start
    out = _output_dir(v["out"])
    meta = {
        "solver": v["solver"],
        "seed": v["seed"],
        "tol": v["tol"],
        "max_iter": v["max_iter"],
        "homoscedastic": v["homoscedastic"],
        "runtime_seconds": runtime,
    }
    write_fit(out, result, meta)
    log.info("%s: %d iterations, converged=%s", v["solver"], result.iterations, result.converged)
    return 0


def evaluate(data, result):
    """Metrics of a fit against simulated ground truth."""
    true_power = metrics.source_power(data["sources"])
    est_power = metrics.source_power(result.posterior_means)
    active = np.asarray(data["active"], dtype=int)
    return {
        "emd": metrics.emd(true_power, est_power) if est_power.any() else np.nan,
        "tce": _pooled_tce(data["sources"][:, active], result.posterior_means),
        "nmse": metrics.nmse(data["b_true"], result.b),
        "similarity_error": metrics.similarity_error(data["b_true"], result.b),
    }


def _pooled_tce(true_sources, estimated):
    if true_sources.shape[1] == 0:
        return np.nan
    # concatenate trials along time so each source keeps one time course
    return metrics.tce(np.concatenate(list(true_sources), axis=1), np.concatenate(list(estimated), axis=1))


def run_cell(task):
    """One (cell, seed) pipeline: simulate, fit every solver, score."""
    v, protocol, alpha, t, order, g, seed = task
    config = _sim_config(
        {**v, "seed": seed}, alpha=alpha, t_samples=t, ar_order=order, g_trials=g
    )
    data = _simulate(config, protocol, np.random.default_rng(seed))
    fit_cfg = FitConfig(tol=v["tol"], max_iter=v["max_iter"], seed=seed, homoscedastic=v["homoscedastic"], track_nll=False)
    rows = []
    for solver in v["solvers"]:
        start = time.perf_counter()
        result = run_solver(solver, data["lead"], data["trials"], fit_cfg)
        runtime = time.perf_counter() - start
        row = {
            "solver": solver,
            "snr_db": simgen.snr_from_alpha(alpha),
            "t_samples": t,
            "ar_order": order,
            "g_trials": g,
            "seed": seed,
            **evaluate(data, result),
            "runtime_seconds": runtime,
            "iterations": result.iterations,
        }
        rows.append(row)
    return rows


def summarize(rows):
    """Mean and standard error of the mean per (solver, cell)."""
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in CELL_KEYS), []).append(row)
    out = []
    for cell, members in groups.items():
        entry = dict(zip(CELL_KEYS, cell))
        entry["n"] = len(members)
        for key in METRIC_KEYS:
            vals = np.array([m[key] for m in members], dtype=float)
            vals = vals[np.isfinite(vals)]
            entry[f"{key}_mean"] = float(vals.mean()) if vals.size else np.nan
            entry[f"{key}_sem"] = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0 if vals.size else np.nan
        out.append(entry)
    return out


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(x)) if isinstance(x, (float, np.floating)) else x) for k, x in row.items()})


def _sweep(v, tasks, stem):
    out = _output_dir(v["out"])
    if v["workers"] > 1:
        with ProcessPoolExecutor(max_workers=v["workers"]) as pool:
            chunks = list(pool.map(run_cell, tasks))
    else:
        chunks = [run_cell(task) for task in tasks]
    rows = [row for chunk in chunks for row in chunk]  # ordered by (cell, seed)
    _write_csv(out / f"{stem}.csv", rows, BENCH_COLUMNS)
    summary = summarize(rows)
    cols = list(CELL_KEYS) + ["n"] + [f"{k}_{s}" for k in METRIC_KEYS for s in ("mean", "sem")]
    _write_csv(out / f"{stem}_summary.csv", summary, cols)
    for entry in summary:
        log.info(
            "%s snr=%.2f T=%d P=%d G=%d: emd %.4f tce %.4f sim %.4f",
            *(entry[k] for k in CELL_KEYS),
            entry["emd_mean"], entry["tce_mean"], entry["similarity_error_mean"],
        )
    return 0


def _seeds(v):
    return range(v["seed"], v["seed"] + v["n_seeds"])


def cmd_benchmark(v):
    tasks = [
        (v, v["protocol"], a, t, p, g, s)
        for a in v["alphas"] for t in v["t_samples"] for p in v["ar_orders"] for g in v["g_trials"]
        for s in _seeds(v)
    ]
    return _sweep(v, tasks, "benchmark")


def cmd_cov_recovery(v):
    tasks = [(v, v["protocol"], v["alpha"], v["t_samples"], 1, g, s) for g in v["g_trials"] for s in _seeds(v)]
    return _sweep(v, tasks, "cov_recovery")


HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "benchmark": cmd_benchmark,
    "cov-recovery": cmd_cov_recovery,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="dugh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMANDS.items():
        p = sub.add_parser(name, help=f"{name} command")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")
        for key, (kind, default, text) in keys.items():
            flag = "--" + key.replace("_", "-")
            if kind is _bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=text)
            elif key == "solver":
                p.add_argument(flag, dest=key, choices=SOLVERS, default=None, help=text)
            else:
                p.add_argument(flag, dest=key, type=kind, default=None, metavar=key.upper(), help=f"{text} (default {default})")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad usage
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        values = resolve(args.command, args)
        return HANDLERS[args.command](values)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"dugh {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError, OSError) as exc:
        print(f"dugh {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"dugh {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
