"""Command-line driver: config handling, dispatch, deterministic output.

Eight subcommands cover the experiment surfaces: `simulate` dumps one
replayed trajectory, `lambda-c` bisects the survival proxy over an
infection-rate bracket, `renewal` tabulates exact lattice renewal
masses, `window-check` runs the bounded-window criterion, `percolate`
samples wedge bond configurations, `property-check` tests the joint
closure bound and the column covariance, `contours` counts admissible
dual contours against the counting bound, and `peierls` evaluates the
contour weight series.

Configuration comes from `--config FILE` (a JSON document), from inline
flags, or both; an inline flag overrides the file value for that field,
and fields no subcommand defines are rejected.  Every stochastic
subcommand consumes numbered substreams of the master seed (worker `i`
reads derive_stream(seed, i)), so the emitted rows are byte-identical
for a fixed config no matter how many workers run or how they are
scheduled.  Tables go to stdout or `--out`; with `--out` a sidecar
manifest `<out>.manifest.json` records the tool version, a
key-order-independent config hash, the master seed, wall-clock
duration, and the derived stream ids.  Monte Carlo estimate rows carry
a 95% CI half-width and a trial count; exact rows (renewal masses,
contour counts, series bounds) carry none.

Exit codes: 0 success; 1 validation failure; 2 scientifically
meaningful non-answers (survival bracket does not straddle the
threshold, cluster undecidable at the wedge height, divergent weight
series); 3 resource caps; 64 usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .contact import (
    EVENT_INFECTED,
    build_graphical_sample,
    estimate_lambda_c,
    evolve,
    survival_probability,
)
from .contours import count_bound_check, peierls_series, threshold_check
from .distributions import InterarrivalSpec, spec_from_json
from .errors import (
    BracketError,
    ResourceLimitError,
    SeriesDivergenceError,
    UndecidableAtHeightError,
    ValidationError,
)
from .percolation import (
    IidBondModel,
    InducedArithmeticModel,
    InducedWindowModel,
    RegenerativeColumnModel,
    check_property_I,
    check_property_II,
    chunk_plan,
    sample_percolation_chunk,
)
from .renewal import arithmetic_renewal_masses, check_bounded_criterion
from .streams import derive_stream, stream_state

_Z95 = 1.959963984540054
_MAX_SEED = 2**64

# exit codes; 2 is reserved for honest non-answers, not misuse
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_UNDECIDED = 2
EXIT_RESOURCE = 3
EXIT_USAGE = 64


# ---------------------------------------------------------------------------
# config plumbing


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures remapped onto exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config: no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config: {path} is not valid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ValidationError("config: document must be a JSON object")
    return doc


def _reject_unknown(cfg: dict, allowed: Sequence[str]) -> None:
    extra = sorted(set(cfg) - set(allowed))
    if extra:
        raise ValidationError(f"unknown config field: {', '.join(extra)}")


_MISSING = object()


def _field(cfg: dict, name: str, default=_MISSING):
    if name in cfg:
        return cfg[name]
    if default is _MISSING:
        raise ValidationError(f"{name}: required field is missing")
    return default


def _field_int(cfg, name, default=_MISSING, lo=None, hi=None) -> int:
    raw = _field(cfg, name, default)
    if isinstance(raw, bool) or not isinstance(raw, int):
        if isinstance(raw, float) and float(raw).is_integer():
            raw = int(raw)
        else:
            raise ValidationError(f"{name}: expected an integer, got {raw!r}")
    if lo is not None and raw < lo:
        raise ValidationError(f"{name}: must be at least {lo}, got {raw}")
    if hi is not None and raw > hi:
        raise ValidationError(f"{name}: must be at most {hi}, got {raw}")
    return int(raw)


def _field_float(cfg, name, default=_MISSING, positive=False, nonnegative=False) -> float:
    raw = _field(cfg, name, default)
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ValidationError(f"{name}: expected a number, got {raw!r}")
    value = float(raw)
    if not math.isfinite(value):
        raise ValidationError(f"{name}: must be finite, got {raw!r}")
    if positive and value <= 0:
        raise ValidationError(f"{name}: must be positive, got {raw!r}")
    if nonnegative and value < 0:
        raise ValidationError(f"{name}: must be nonnegative, got {raw!r}")
    return value


def _field_spec(cfg, name="distribution") -> InterarrivalSpec:
    raw = _field(cfg, name)
    if not isinstance(raw, dict):
        raise ValidationError(f"{name}: expected a descriptor object, got {raw!r}")
    try:
        return spec_from_json(raw)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}")


def _parse_json_flag(name: str, text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{name}: not valid JSON ({exc})")
    return doc


def _config_digest(cfg: dict) -> str:
    """sha256 of the canonical config rendering; key order never matters."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# output plumbing


def _render_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(columns, rows, fmt, out_path) -> None:
    if fmt == "json":
        payload = [dict(zip(columns, row)) for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = []
        buf.append(",".join(columns))
        for row in rows:
            buf.append(",".join(_render_cell(v) for v in row))
        text = "\n".join(buf) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _write_manifest(out_path, subcommand, cfg, seed, workers, duration, streams, summary):
    """Sidecar JSON next to the result file; skipped for stdout output."""
    if out_path is None:
        return
    ids = [{"worker": int(i), "state": int(stream_state(seed, i))} for i in streams[:64]]
    doc = {
        "tool": "renewalcp",
        "version": __version__,
        "subcommand": subcommand,
        "config_sha256": _config_digest(cfg),
        "master_seed": int(seed),
        "workers": int(workers),
        "duration_seconds": duration,
        "streams": {"count": len(streams), "ids": ids},
    }
    if summary is not None:
        doc["summary"] = summary
    with open(f"{out_path}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommand implementations; each returns (columns, rows, streams, summary)


def _cmd_contours(cfg, seed, workers):
    _reject_unknown(cfg, ("n", "seed"))
    n = _field_int(cfg, "n", lo=2, hi=14)
    rows = []
    for m in range(2, n + 1):
        rep = count_bound_check(m)
        rows.append((rep.n, rep.count, rep.bound, rep.ok))
    return ("n", "c_n", "bound", "ok"), rows, [], None


def _cmd_peierls(cfg, seed, workers):
    _reject_unknown(cfg, ("epsilon", "n_max", "seed"))
    epsilon = _field_float(cfg, "epsilon", positive=True)
    n_max = _field_int(cfg, "n_max", default=60, lo=2)
    report = peierls_series(epsilon, n_max)
    below = threshold_check(epsilon)
    row = (
        epsilon,
        float(report.partial_sum),
        float(report.tail_bound),
        float(report.closed_form),
        below,
    )
    cols = ("epsilon", "partial_sum", "tail_bound", "closed_form", "below_one")
    return cols, [row], [], None


def _cmd_renewal(cfg, seed, workers):
    _reject_unknown(cfg, ("distribution", "k_max", "seed"))
    spec = _field_spec(cfg)
    k_max = _field_int(cfg, "k_max", lo=1)
    if spec.span is None:
        raise ValidationError("distribution: renewal mass table needs an arithmetic law")
    masses = {}
    for point, mass in spec.atoms:
        k = point / spec.span
        if abs(k - round(k)) > 1e-9:
            raise ValidationError("distribution: atom off the span lattice")
        masses[int(round(k))] = mass
    table = arithmetic_renewal_masses(masses, k_max, span=spec.span)
    rows = [(k, float(table.masses[k])) for k in range(1, k_max + 1)]
    return ("k", "u_k"), rows, [], None


def _cmd_window_check(cfg, seed, workers):
    _reject_unknown(cfg, ("distribution", "kappa", "trials", "max_depth", "seed"))
    spec = _field_spec(cfg)
    kappa = _field_float(cfg, "kappa", positive=True)
    trials = _field_int(cfg, "trials", default=150_000, lo=2)
    max_depth = _field_int(cfg, "max_depth", default=16, lo=0)
    report = check_bounded_criterion(
        spec, kappa, trials=trials, rng=derive_stream(seed, 0), max_depth=max_depth
    )
    cols = (
        "kappa",
        "sup_estimate",
        "a_star",
        "threshold",
        "passes",
        "ci_halfwidth",
        "trials",
        "source",
    )
    rows = []
    for rep, n in ((report.atomic_report, 0), (report.full_report, trials)):
        if rep is None:
            continue
        rows.append(
            (
                rep.kappa,
                rep.sup_estimate,
                rep.window_start,
                rep.threshold,
                rep.passes,
                rep.ci_halfwidth,
                n,
                rep.source,
            )
        )
    summary = {"passes": report.passes, "nu": report.nu, "u_nu": report.u_nu}
    return cols, rows, [0], summary


_SIMULATE_KEYS = ("distribution", "lambda", "box_half_width", "horizon", "trials", "seed")


def _cmd_simulate(cfg, seed, workers):
    _reject_unknown(cfg, _SIMULATE_KEYS + ("trial",))
    spec = _field_spec(cfg)
    rate = _field_float(cfg, "lambda", nonnegative=True)
    box = _field_int(cfg, "box_half_width", lo=1)
    horizon = _field_float(cfg, "horizon", positive=True)
    trials = _field_int(cfg, "trials", default=1, lo=1)
    trial = _field_int(cfg, "trial", default=0, lo=0)
    if trial >= trials:
        raise ValidationError(f"trial: must be below trials={trials}, got {trial}")

    sample = build_graphical_sample(spec, rate, box, horizon, rng=derive_stream(seed, trial))
    traj = evolve(sample, (0,))
    names = {EVENT_INFECTED: "infected"}
    rows = [
        (float(t), int(v), names.get(int(k), "recovered"))
        for t, v, k in zip(traj.times, traj.vertices, traj.kinds)
    ]
    # trial i of the summary replays the same stream as `--trial i`
    report = survival_probability(
        spec, rate, box, horizon, trials, seed, boundary_policy="run"
    )
    summary = {
        "dumped_trial": trial,
        "final_infected": [int(x) for x in traj.final_infected],
        "boundary_hit": bool(traj.boundary_hit),
        "survival_estimate": report.estimate,
        "ci_halfwidth": report.ci_halfwidth,
        "boundary_fraction": report.boundary_fraction,
        "trials": trials,
    }
    return ("time", "vertex", "event_type"), rows, list(range(trials)), summary


def _cmd_lambda_c(cfg, seed, workers):
    _reject_unknown(
        cfg, _SIMULATE_KEYS + ("survival_threshold", "boundary_policy")
    )
    spec = _field_spec(cfg)
    bracket = _field(cfg, "lambda")
    if not (isinstance(bracket, (list, tuple)) and len(bracket) == 2):
        raise ValidationError("lambda: expected a [lo, hi] bracket for lambda-c")
    lo = _field_float({"lambda": bracket[0]}, "lambda", nonnegative=True)
    hi = _field_float({"lambda": bracket[1]}, "lambda", positive=True)
    box = _field_int(cfg, "box_half_width", lo=1)
    horizon = _field_float(cfg, "horizon", positive=True)
    trials = _field_int(cfg, "trials", lo=1)
    threshold = _field_float(cfg, "survival_threshold", default=0.5, positive=True)
    policy = _field(cfg, "boundary_policy", default="stop")
    if policy not in ("stop", "run"):
        raise ValidationError(f"boundary_policy: must be 'stop' or 'run', got {policy!r}")

    est = estimate_lambda_c(
        spec, box, horizon, trials, (lo, hi), threshold, seed, boundary_policy=policy
    )
    cols = (
        "value",
        "bracket_lo",
        "bracket_hi",
        "survival_lo",
        "ci_lo",
        "survival_hi",
        "ci_hi",
        "evaluations",
        "trials",
        "survival_threshold",
    )
    row = (
        est.value,
        est.lo,
        est.hi,
        est.survival_lo.estimate,
        est.survival_lo.ci_halfwidth,
        est.survival_hi.estimate,
        est.survival_hi.ci_halfwidth,
        est.evaluations,
        trials,
        threshold,
    )
    summary = {"streams_consumed": est.evaluations * trials}
    return cols, [row], [], summary


_MODEL_KEYS = {
    "iid": ("p",),
    "induced_arithmetic": ("distribution", "lambda", "M", "d"),
    "induced_window": ("distribution", "lambda", "nu"),
    "synthetic_regen": ("base_closure", "bias"),
}


def _build_model(cfg):
    name = _field(cfg, "model")
    if name not in _MODEL_KEYS:
        raise ValidationError(
            f"model: expected one of {sorted(_MODEL_KEYS)}, got {name!r}"
        )
    height = _field_int(cfg, "H", lo=1)
    if name == "iid":
        p = _field_float(cfg, "p")
        return IidBondModel(p, height)
    if name == "synthetic_regen":
        base = _field_float(cfg, "base_closure", nonnegative=True)
        bias = _field_float(cfg, "bias", nonnegative=True)
        return RegenerativeColumnModel(base, bias, height)
    spec = _field_spec(cfg)
    rate = _field_float(cfg, "lambda", positive=True)
    if name == "induced_arithmetic":
        block = _field_int(cfg, "M", lo=1)
        span = _field_float(cfg, "d", positive=True)
        if spec.span is None or abs(spec.span - span) > 1e-12 * max(1.0, span):
            raise ValidationError("d: must equal the distribution span")
        return InducedArithmeticModel(spec, rate, block, height)
    window = _field_float(cfg, "nu", positive=True)
    return InducedWindowModel(spec, rate, window, height)


def _model_fields(cfg) -> Tuple[str, ...]:
    name = _field(cfg, "model")
    if name not in _MODEL_KEYS:
        raise ValidationError(
            f"model: expected one of {sorted(_MODEL_KEYS)}, got {name!r}"
        )
    return ("model", "H") + _MODEL_KEYS[name]


def _cmd_percolate(cfg, seed, workers):
    _reject_unknown(cfg, _model_fields(cfg) + ("trials", "seed"))
    model = _build_model(cfg)
    trials = _field_int(cfg, "trials", lo=1)
    plan = [(w, m) for w, m in chunk_plan(trials) if m > 0]

    def run(worker, count):
        return sample_percolation_chunk(model, worker, count, seed)

    if workers <= 1 or len(plan) <= 1:
        results = [run(w, m) for w, m in plan]
    else:
        results = [None] * len(plan)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pending = {
                pool.submit(run, w, m): idx for idx, (w, m) in enumerate(plan)
            }
            for fut in as_completed(pending):
                results[pending[fut]] = fut.result()

    rows = []
    hits = 0
    for flags, sizes in results:
        for f, s in zip(flags, sizes):
            rows.append((len(rows), bool(f), int(s)))
            hits += bool(f)
    p_hat = hits / trials
    halfwidth = _Z95 * math.sqrt(max(p_hat * (1 - p_hat), 0.0) / trials)
    summary = {
        "reached_top_estimate": p_hat,
        "ci_halfwidth": halfwidth,
        "trials": trials,
        "height": model.wedge.height,
    }
    streams = [w for w, _ in plan]
    return ("trial", "reached_top", "cluster_size"), rows, streams, summary


def _cmd_property_check(cfg, seed, workers):
    base = _model_fields(cfg) + ("property", "trials", "seed")
    which = _field(cfg, "property")
    if which not in ("I", "II"):
        raise ValidationError(f"property: expected 'I' or 'II', got {which!r}")
    _reject_unknown(cfg, base + (("k",) if which == "I" else ("gap",)))
    model = _build_model(cfg)
    trials = _field_int(cfg, "trials", lo=2)
    cols = (
        "property",
        "parameter",
        "estimate",
        "reference",
        "standard_error",
        "ci_halfwidth",
        "passes",
        "informational",
        "trials",
    )
    if which == "I":
        k = _field_int(cfg, "k", lo=1, hi=4)
        rep = check_property_I(model, k, trials, seed)
        row = (
            "I",
            k,
            rep.estimate,
            rep.bound,
            rep.standard_error,
            _Z95 * rep.standard_error,
            rep.passes,
            False,
            trials,
        )
    else:
        gap = _field_int(cfg, "gap", lo=1)
        rep = check_property_II(model, gap, trials, seed)
        row = (
            "II",
            gap,
            rep.covariance,
            4.0 * rep.standard_error,
            rep.standard_error,
            _Z95 * rep.standard_error,
            rep.passes,
            rep.informational,
            trials,
        )
    streams = [w for w, m in chunk_plan(trials) if m > 0]
    return cols, [row], streams, {"passes": row[6]}


_COMMANDS: Dict[str, Callable] = {
    "simulate": _cmd_simulate,
    "lambda-c": _cmd_lambda_c,
    "renewal": _cmd_renewal,
    "window-check": _cmd_window_check,
    "percolate": _cmd_percolate,
    "property-check": _cmd_property_check,
    "contours": _cmd_contours,
    "peierls": _cmd_peierls,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--config", metavar="FILE", help="JSON config document")
    sub.add_argument("--seed", type=int, help="master seed (overrides config)")
    sub.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker pool size (results never depend on it)",
    )
    sub.add_argument("--out", metavar="PATH", help="result file path (default stdout)")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> _Parser:
    parser = _Parser(prog="renewalcp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"renewalcp {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    # (flag, config field, parse) triples per subcommand; JSON-typed flags
    # let one grammar cover numbers, descriptors, and brackets
    specs: Dict[str, List[Tuple[str, str]]] = {
        "simulate": [
            ("--distribution", "distribution"),
            ("--lambda", "lambda"),
            ("--box-half-width", "box_half_width"),
            ("--horizon", "horizon"),
            ("--trials", "trials"),
            ("--trial", "trial"),
        ],
        "lambda-c": [
            ("--distribution", "distribution"),
            ("--lambda", "lambda"),
            ("--box-half-width", "box_half_width"),
            ("--horizon", "horizon"),
            ("--trials", "trials"),
            ("--survival-threshold", "survival_threshold"),
            ("--boundary-policy", "boundary_policy"),
        ],
        "renewal": [("--distribution", "distribution"), ("--kmax", "k_max")],
        "window-check": [
            ("--distribution", "distribution"),
            ("--kappa", "kappa"),
            ("--trials", "trials"),
            ("--max-depth", "max_depth"),
        ],
        "percolate": [
            ("--model", "model"),
            ("--p", "p"),
            ("--distribution", "distribution"),
            ("--lambda", "lambda"),
            ("--M", "M"),
            ("--d", "d"),
            ("--nu", "nu"),
            ("--base-closure", "base_closure"),
            ("--bias", "bias"),
            ("--H", "H"),
            ("--trials", "trials"),
        ],
        "property-check": [
            ("--model", "model"),
            ("--p", "p"),
            ("--distribution", "distribution"),
            ("--lambda", "lambda"),
            ("--M", "M"),
            ("--d", "d"),
            ("--nu", "nu"),
            ("--base-closure", "base_closure"),
            ("--bias", "bias"),
            ("--H", "H"),
            ("--property", "property"),
            ("--k", "k"),
            ("--gap", "gap"),
            ("--trials", "trials"),
        ],
        "contours": [("--n", "n")],
        "peierls": [("--epsilon", "epsilon"), ("--n-max", "n_max")],
    }
    for name, fields in specs.items():
        sub = subs.add_parser(name, help=f"{name} experiment")
        _add_common(sub)
        for flag, field in fields:
            sub.add_argument(flag, dest=f"cfg_{field}", metavar="VALUE")
    return parser


_STRING_FIELDS = {"model", "property", "boundary_policy"}


def _flag_value(field: str, text: str):
    """Inline flag values parse as JSON so types match the config file.

    Bare words are accepted for the few string-typed fields; everything
    else must be a JSON literal (numbers, objects, arrays).
    """
    if field in _STRING_FIELDS:
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise ValidationError(f"{field}: expected a JSON value, got {text!r}")


def _effective_config(args) -> dict:
    cfg = dict(_load_config_file(args.config)) if args.config else {}
    for key, value in vars(args).items():
        if key.startswith("cfg_") and value is not None:
            cfg[key[4:]] = _flag_value(key[4:], value)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.workers < 1:
            raise ValidationError("workers: must be at least 1")
        cfg = _effective_config(args)
        seed = _field_int(cfg, "seed", default=0, lo=0, hi=_MAX_SEED - 1)
        started = time.monotonic()
        columns, rows, streams, summary = _COMMANDS[args.subcommand](
            cfg, seed, args.workers
        )
        duration = time.monotonic() - started
        _write_table(columns, rows, args.format, args.out)
        _write_manifest(
            args.out, args.subcommand, cfg, seed, args.workers, duration, streams, summary
        )
        return EXIT_OK
    except (BracketError, UndecidableAtHeightError, SeriesDivergenceError) as exc:
        # checked before ValidationError: divergence subclasses it
        print(f"renewalcp: undecided: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except ValidationError as exc:
        print(f"renewalcp: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceLimitError as exc:
        print(f"renewalcp: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
