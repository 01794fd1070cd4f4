"""Command-line front end: ``lerchlab COMMAND key=value ...``.

Exit codes: 0 success, 2 usage or domain error, 3 numerical guard tripped,
4 infeasible construction.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .arith.phases import Lambda, lambda_label, parse_lambda
from .arith.sources import get_source
from .errors import (
    CapacityError,
    DomainError,
    InfeasibleConstructionError,
    LerchLabError,
    NotFoundError,
)

EXIT_OK, EXIT_USAGE, EXIT_GUARD, EXIT_INFEASIBLE = 0, 2, 3, 4

COMMON = {"seed": "0", "format": "csv", "out": "", "config": "", "workers": ""}

COMMANDS: dict[str, dict[str, str]] = {
    "eval": {"f": "unit", "lambda": "1", "m": "1", "k": "1", "sigma": "", "t": "0", "grid": "",
             "kind": "auto", "alpha": "1", "eps": "1e-12"},
    "zeros": {"f": "unit", "lambda": "1", "m": "1", "k": "1", "rect": "", "mode": "rect", "tol": "1e-10",
              "n": "4", "sigma_window": "1.02,1.2", "t_max": "100", "budget": "100000", "height": "10"},
    "expsum": {"harness": "", "f": "unit", "x": "", "y": "", "alpha": "", "q": "", "a": "1", "xs": "",
               "history": ""},
    "construct": {"f": "unit", "k": "1", "m": "1", "q": "", "a": "", "lambda": "", "delta": "0.3",
                  "qrange": "11,10000", "pmax": "1e6", "force": "false", "controls": "100"},
    "verify": {"suite": "fast", "file": "", "controls": "100"},
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    options: dict[str, str]
    seed: int = 0
    output: str = ""
    format: str = "csv"
    extra: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return {"command": self.command, "seed": self.seed, "format": self.format, **self.options}


def _read_config_file(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_args(argv: list[str]) -> RunConfig:
    if not argv or argv[0] in ("-h", "--help", "help"):
        raise UsageError(usage())
    command, rest = argv[0], argv[1:]
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}\n{usage()}")
    given: dict[str, str] = {}
    for item in rest:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        given[k.strip()] = v.strip()
    allowed = {**COMMON, **COMMANDS[command]}
    merged = dict(allowed)
    if given.get("config"):
        from_file = _read_config_file(given["config"])
        for k in from_file:
            if k not in allowed:
                raise UsageError(f"unknown key {k!r} in config file for {command}")
        merged.update(from_file)
    for k in given:
        if k not in allowed:
            raise UsageError(f"unknown key {k!r} for {command}; allowed: {', '.join(sorted(allowed))}")
    merged.update(given)
    fmt = merged.pop("format")
    if fmt not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    seed = _int(merged.pop("seed"), "seed")
    out = merged.pop("out")
    merged.pop("config")
    return RunConfig(command, merged, seed, out, fmt)


def usage() -> str:
    lines = ["usage: lerchlab COMMAND key=value ...", "commands:"]
    for name, keys in COMMANDS.items():
        lines.append(f"  {name:10s} " + " ".join(f"{k}={v or '?'}" for k, v in keys.items()))
    lines.append("common: " + " ".join(f"{k}={v or '?'}" for k, v in COMMON.items()))
    return "\n".join(lines)


def _int(text: str, name: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {text!r}") from None
    if not v.is_integer():
        raise UsageError(f"{name} must be an integer, got {text!r}")
    return int(v)


def _float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{name} must be a number, got {text!r}") from None


def _floats(text: str, name: str, count: int | None = None) -> list[float]:
    vals = [_float(x, name) for x in text.split(",") if x.strip()]
    if count is not None and len(vals) != count:
        raise UsageError(f"{name} needs {count} comma-separated numbers")
    return vals


def _bool(text: str) -> bool:
    return text.lower() in ("1", "true", "yes", "on")


def _lam(text: str) -> Lambda:
    try:
        return parse_lambda(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad lambda {text!r}: {exc}") from None


class Output:
    """Collects rows; CSV gets '#' header lines, JSON is one object per line."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.columns: list[str] | None = None
        self.rows: list[list] = []
        self.records: list[dict] = []

    def table(self, columns: list[str], rows: list[list]) -> None:
        self.columns = columns
        self.rows.extend(rows)

    def record(self, obj: dict) -> None:
        self.records.append(obj)

    def render(self) -> str:
        header = {"lerchlab": __version__, "config": self.cfg.resolved()}
        if self.cfg.format == "json":
            lines = [json.dumps({"kind": "header", **header}, sort_keys=True)]
            if self.columns:
                lines += [json.dumps(dict(zip(self.columns, r)), sort_keys=True) for r in self.rows]
            lines += [json.dumps(r, sort_keys=True, default=_jsonable) for r in self.records]
            return "\n".join(lines) + "\n"
        buf = io.StringIO()
        buf.write(f"# lerchlab {__version__}\n# config {json.dumps(header['config'], sort_keys=True)}\n")
        for r in self.records:
            buf.write("# " + json.dumps(r, sort_keys=True, default=_jsonable) + "\n")
        if self.columns:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.columns)
            w.writerows([[_cell(c) for c in r] for r in self.rows])
        return buf.getvalue()

    def emit(self) -> None:
        text = self.render()
        if self.cfg.output:
            Path(self.cfg.output).write_text(text)
        else:
            sys.stdout.write(text)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if hasattr(v, "tolist"):
        return v.tolist()
    return str(v)


def _points(o: dict[str, str]) -> list[complex]:
    if o["grid"]:
        s0, s1, ns, t0, t1, nt = _floats(o["grid"], "grid", 6)
        ns, nt = int(ns), int(nt)
        sig = [s0 + (s1 - s0) * i / max(1, ns - 1) for i in range(ns)]
        ts = [t0 + (t1 - t0) * j / max(1, nt - 1) for j in range(nt)]
        return [complex(a, b) for a in sig for b in ts]
    if not o["sigma"]:
        raise UsageError("eval needs sigma= (and t=) or grid=s0,s1,ns,t0,t1,nt")
    return [complex(_float(o["sigma"], "sigma"), _float(o["t"], "t"))]


def cmd_eval(cfg: RunConfig, out: Output) -> int:
    from .hurwitz import hurwitz_em_with_error
    from .series import TwistSpec, lerch_direct, lerch_eval, twisted_eval

    o = cfg.options
    lam = _lam(o["lambda"])
    m, k = _int(o["m"], "m"), _int(o["k"], "k")
    kind = o["kind"]
    if kind == "auto":
        kind = "lerch" if o["f"] == "unit" else "twist"
    if kind not in ("lerch", "twist", "hurwitz"):
        raise UsageError("kind must be auto, lerch, twist or hurwitz")
    if kind != "hurwitz":
        TwistSpec(lam, m, k)  # validates the residue class
    eps = _float(o["eps"], "eps")
    rows = []
    for s in _points(o):
        if kind == "hurwitz":
            v, err = hurwitz_em_with_error(s, _float(o["alpha"], "alpha"))
            rows.append([s.real, s.imag, v.real, v.imag, abs(v), "", err, "rigorous"])
        elif kind == "lerch":
            alpha = Fraction(m, k)
            try:
                res = lerch_direct(lam, float(alpha), s)
                v, N, tail, flag = lerch_eval(lam, alpha, s, eps), res.N, res.tail_bound, res.flag
            except DomainError:
                v, N, tail, flag = lerch_eval(lam, alpha, s, eps), "", 0.0, "hurwitz"
            rows.append([s.real, s.imag, v.real, v.imag, abs(v), N, tail, flag])
        else:
            res = twisted_eval(get_source(o["f"]), TwistSpec(lam, m, k), s, eps)
            v = res.value
            rows.append([s.real, s.imag, v.real, v.imag, abs(v), res.N, res.tail_bound, res.flag])
    out.table(["sigma", "t", "re", "im", "abs", "N", "tail", "flag"], rows)
    return EXIT_OK


def _evaluator(o: dict[str, str]):
    from .zeros import dirichlet_polynomial, hurwitz_evaluator, twist_evaluator

    f = o["f"]
    if f.startswith("poly:"):
        return dirichlet_polynomial(f[5:])
    if f.startswith("hurwitz:"):
        return hurwitz_evaluator(_float(f[8:], "hurwitz alpha"))
    return twist_evaluator(f, _lam(o["lambda"]), _int(o["m"], "m"), _int(o["k"], "k"))


def cmd_zeros(cfg: RunConfig, out: Output) -> int:
    from .zeros import Rectangle, continuity_experiment, find_zeros, sigma_star_estimate

    o = cfg.options
    mode = o["mode"]
    if mode == "rect":
        if not o["rect"]:
            raise UsageError("zeros needs rect=s1,s2,t1,t2")
        rect = Rectangle(*_floats(o["rect"], "rect", 4))
        F = _evaluator(o)
        rep = find_zeros(F, rect, tol=_float(o["tol"], "tol"))
        out.record({"kind": "summary", "evaluator": F.label, "winding": rep.winding, "zeros": len(rep.zeros),
                    "evaluations": rep.evaluations, "adjustments": rep.adjustments})
        out.table(["sigma", "t", "abs_F", "radius", "winding"],
                  [[z.s.real, z.s.imag, z.abs_value, z.radius, z.winding] for z in rep.zeros])
        return EXIT_OK
    window = tuple(_floats(o["sigma_window"], "sigma_window", 2))
    t_max, budget = _float(o["t_max"], "t_max"), _int(o["budget"], "budget")
    if mode == "sigma_star":
        F = _evaluator(o)
        est = sigma_star_estimate(F, window, t_max, budget, height=_float(o["height"], "height"))
        out.record({"kind": "summary", "evaluator": F.label, "status": est.status, "lower_bound": est.lower_bound})
        for row in est.transcript:
            out.record({"kind": "box", **row})
        out.table(["sigma", "t", "abs_F"], [[z.s.real, z.s.imag, z.abs_value] for z in est.zeros])
        return EXIT_OK
    if mode == "continuity":
        rows = continuity_experiment(o["f"], _lam(o["lambda"]), _int(o["n"], "n"), sigma_window=window,
                                     t_max=t_max, budget=budget)
        out.table(["x", "status", "lower_bound", "zeros"],
                  [[r["x"], r["status"], r["lower_bound"], json.dumps(r["zeros"])] for r in rows])
        return EXIT_OK
    raise UsageError("mode must be rect, sigma_star or continuity")


def cmd_expsum(cfg: RunConfig, out: Output) -> int:
    from .expsums import HarnessGrid, debruijn_fit, exp_sum, maier_harness, mv_harness, smooth_exp_sum, update_history

    o = cfg.options
    harness = o["harness"]
    cols = ["x", "y", "r", "s", "f", "abs_S", "rhs", "ratio"]
    if harness == "maier":
        summary = maier_harness(HarnessGrid())
        out.record({"kind": "summary", **summary.summary_json()})
        if o["history"]:
            out.record({"kind": "history", "regressed": update_history(o["history"], summary)})
        out.table(cols, [r.row() for r in summary.reports])
        return EXIT_OK
    if harness == "mv":
        if not o["q"]:
            raise UsageError("harness=mv needs q=")
        xs = [_int(x, "xs") for x in o["xs"].split(",")] if o["xs"] else [10**3, 10**4, 10**5]
        reps = mv_harness(get_source(o["f"]), _int(o["q"], "q"), _int(o["a"], "a"), xs)
        out.table(cols, [r.row() for r in reps])
        return EXIT_OK
    if harness == "debruijn":
        xs = [_int(x, "xs") for x in o["xs"].split(",")] if o["xs"] else [10**3, 10**4, 10**5, 10**6]
        fit = debruijn_fit(xs, [1.5, 2.0, 2.5, 3.0, 4.0, 5.0])
        out.record({"kind": "fit", "c": fit.c, "C": fit.C, "C_least_squares": fit.C_least_squares,
                    "all_satisfied": fit.all_satisfied, "excluded": len(fit.excluded)})
        out.table(["x", "Q", "psi", "bound"], [list(p) for p in fit.points])
        return EXIT_OK
    if harness:
        raise UsageError("harness must be mv, maier or debruijn")
    if not o["x"] or not o["alpha"]:
        raise UsageError("expsum needs x= and alpha= (or harness=)")
    f = get_source(o["f"])
    x, alpha = _float(o["x"], "x"), _lam(o["alpha"])
    if o["y"]:
        y = _float(o["y"], "y")
        v = smooth_exp_sum(f, x, y, alpha)
    else:
        y, v = None, exp_sum(f, x, alpha)
    out.table(["x", "y", "alpha", "f", "re", "im", "abs"],
              [[x, y, lambda_label(alpha), f.label, v.real, v.imag, abs(v)]])
    return EXIT_OK


def cmd_construct(cfg: RunConfig, out: Output) -> int:
    from .constructor import build_parameters, run_construction, save_run

    o = cfg.options
    kw = dict(delta=_float(o["delta"], "delta"), p_max=_int(o["pmax"], "pmax"))
    if o["q"]:
        kw["q"] = _int(o["q"], "q")
        if o["a"]:
            kw["a"] = _int(o["a"], "a")
    if o["lambda"]:
        kw["lam"] = o["lambda"]
        lo, hi = _floats(o["qrange"], "qrange", 2)
        kw["q_range"] = (int(lo), int(hi))
    params = build_parameters(o["f"], _int(o["k"], "k"), _int(o["m"], "m"), **kw)
    try:
        run = run_construction(params, force=_bool(o["force"]), controls=_int(o["controls"], "controls"),
                               seed=cfg.seed)
    except InfeasibleConstructionError as exc:
        out.record({"kind": "infeasible", "message": str(exc)})
        if exc.margins:
            out.table(list(exc.margins[0].keys()), [list(r.values()) for r in exc.margins])
        out.emit()
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if cfg.output and cfg.format == "json":
        save_run(cfg.output, run, {"lerchlab": __version__, "config": cfg.resolved()})
        return EXIT_OK if run.verification.passed else EXIT_GUARD
    ver = run.verification
    out.record({"kind": "run", "a": params.a, "q": params.q, "sigma": run.state.sigma, "R": run.state.R,
                "converged": run.state.converged, "iterations": len(run.state.transcript),
                "system_residual": run.state.system_residual, "feasible": run.feasible})
    out.table(["sigma", "abs_F", "tail_bound", "control_median", "passed"],
              [[ver.sigma, abs(ver.value), ver.tail_bound, ver.control_median, ver.passed]])
    return EXIT_OK if ver.passed else EXIT_GUARD


def cmd_verify(cfg: RunConfig, out: Output) -> int:
    o = cfg.options
    if o["file"]:
        from .constructor import load_run, verify_construction

        params, sigma, t = load_run(o["file"])
        ver = verify_construction(params, sigma, t, controls=_int(o["controls"], "controls"), seed=cfg.seed)
        out.table(["sigma", "abs_F", "tail_bound", "control_median", "passed"],
                  [[ver.sigma, abs(ver.value), ver.tail_bound, ver.control_median, ver.passed]])
        return EXIT_OK if ver.passed else EXIT_GUARD
    from . import acceptance

    if o["suite"] not in ("fast", "full"):
        raise UsageError("suite must be fast or full")
    numbers = acceptance.FAST if o["suite"] == "fast" else tuple(acceptance.CRITERIA)
    workers = _int(o["workers"], "workers") if o.get("workers") else 1
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(acceptance.run_criterion, numbers))
    else:
        results = [acceptance.run_criterion(n) for n in numbers]
    for r in results:
        print(r.line(), file=sys.stderr)
    out.table(["criterion", "title", "passed", "reporting_only", "detail"],
              [[r.number, r.title, r.passed, r.reporting_only, r.detail] for r in results])
    return EXIT_OK if all(r.passed for r in results) else 1


HANDLERS = {"eval": cmd_eval, "zeros": cmd_zeros, "expsum": cmd_expsum, "construct": cmd_construct,
            "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    cfg.options.setdefault("workers", "")
    if not cfg.options.get("workers"):
        cfg.options["workers"] = str(os.cpu_count() or 1) if cfg.command == "verify" else "1"
    out = Output(cfg)
    try:
        code = HANDLERS[cfg.command](cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, CapacityError, NotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleConstructionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LerchLabError as exc:
        print(f"numerical guard: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    if code != EXIT_INFEASIBLE and not (cfg.command == "construct" and cfg.output and cfg.format == "json"):
        out.emit()
    return code


if __name__ == "__main__":
    sys.exit(main())
