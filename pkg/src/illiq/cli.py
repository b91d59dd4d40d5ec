"""Command-line interface: ``illiq <command> --model FILE ...``.

Exit codes: 0 success, 2 model or input errors, 3 solver failure statuses.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import replace

import click
import numpy as np

from .config import ConfigError, Tolerances, load_tolerances
from .diagnostics import assumption_report
from .dual import check_optimality, shadow_prices, solve_dual
from .market import ModelError
from .modelfile import ModelFile, ModelFileError, load_model
from .primal import solve_alm, superhedge
from .tree import TreeError
from .valuation import accounting_value, dual_valuation_bound, indifference_swap_rate

EXIT_OK, EXIT_MODEL, EXIT_SOLVER = 0, 2, 3
FAILURE_STATUSES = frozenset({"numerical_error", "iteration_limit", "cut_limit", "no_bracket",
                              "dual_not_attained", "reference_not_finite"})


# ---------------------------------------------------------------------------
# encoding


def encode(obj):
    """JSON-safe copy: infinities become ``"+inf"``/``"-inf"``, NaN ``"nan"``."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    return obj


def decode(obj):
    """Inverse of :func:`encode`."""
    if isinstance(obj, dict):
        return {k: decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    if obj == "+inf":
        return math.inf
    if obj == "-inf":
        return -math.inf
    if obj == "nan":
        return math.nan
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(encode(report), indent=2, sort_keys=True, allow_nan=False)


def loads_report(text: str) -> dict:
    return decode(json.loads(text))


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    enc = encode(report)
    if "surface" in enc.get("results", {}):
        rows = enc["results"]["surface"]
        cols = list(rows[0].keys()) if rows else ["scale", "value", "status"]
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] for c in cols])
        return buf.getvalue()
    w.writerow(["key", "value"])
    for k, v in _flatten(enc):
        w.writerow([k, json.dumps(v) if isinstance(v, list) else v])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _statuses(obj):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k == "status" and isinstance(v, str):
                yield v
            else:
                yield from _statuses(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _statuses(v)


def run_check(mf: ModelFile, loss_name, tol, **_):
    loss = mf.loss(loss_name)
    return assumption_report(mf.model, loss, tol).to_dict()


def run_solve(mf: ModelFile, loss_name, claim, premium, tol, **_):
    model = mf.model
    loss = mf.loss(loss_name)
    c = mf.claim(claim)
    sol = solve_alm(model, loss, c, tol)
    out = {"primal": sol.to_dict()}
    if claim is not None:
        p = mf.claim(premium)
        price = superhedge(model, c, p, "sup", tol=tol)
        hedged = {"price": price.value, "status": price.status}
        if math.isfinite(price.value):
            h = solve_alm(model, loss, c - price.value * p, tol)
            hedged.update(value=h.value, primal_status=h.status)
        out["hedged"] = hedged
    return out


def run_dual(mf: ModelFile, loss_name, claim, tol, **_):
    model = mf.model
    loss = mf.loss(loss_name)
    c = mf.claim(claim)
    sol = solve_alm(model, loss, c, tol)
    cert = solve_dual(model, loss, c, tol, primal=sol)
    out = {"certificate": cert.to_dict()}
    if sol.status == "optimal":
        out["optimality"] = check_optimality(model, loss, c, sol.x, cert, tol).to_dict()
        try:
            out["shadow_prices"] = shadow_prices(model, cert, sol.x, tol).to_dict(model.tree)
        except ValueError as exc:
            out["shadow_prices"] = {"status": "undefined", "reason": str(exc)}
    return out


def run_bounds(mf: ModelFile, claim, premium, tol, **_):
    model = mf.model
    c = mf.claim(claim)
    p = mf.claim(premium)
    hi = superhedge(model, c, p, "sup", tol=tol)
    lo = superhedge(model, c, p, "inf", tol=tol)
    return {"pi_sup": hi.to_dict(), "pi_inf": lo.to_dict()}


def run_value(mf: ModelFile, loss_name, claim, side, tol, scales=None, **_):
    model = mf.model
    loss = mf.loss(loss_name)
    c = mf.claim(claim)
    if scales:
        rows = []
        for s in scales:
            r = accounting_value(model, loss, s * c, side=side, tol=tol)
            rows.append({"scale": s, "value": r.value, "status": r.status})
        return {"surface": rows}
    r = accounting_value(model, loss, c, side=side, tol=tol)
    out = r.to_dict()
    db = dual_valuation_bound(model, loss, c, side=side, tol=tol)
    out["dual_bound"] = db.value
    out["dual_bound_status"] = db.status
    return out


def run_swap(mf: ModelFile, loss_name, claim, premium, side, reference, tol, scales=None, **_):
    model = mf.model
    loss = mf.loss(loss_name)
    c = mf.claim(claim)
    p = mf.claim(premium)
    cbar = mf.claim(reference)
    if scales:
        rows = []
        for s in scales:
            r = indifference_swap_rate(model, loss, cbar, p, s * c, side=side, tol=tol)
            rows.append({"scale": s, "value": r.value, "status": r.status})
        return {"surface": rows}
    r = indifference_swap_rate(model, loss, cbar, p, c, side=side, tol=tol)
    out = r.to_dict()
    db = dual_valuation_bound(model, loss, c, p, cbar, side=side, tol=tol)
    out["dual_bound"] = db.value
    out["dual_bound_status"] = db.status
    return out


def run_report(mf: ModelFile, **kw):
    return {
        "check": run_check(mf, **kw),
        "solve": run_solve(mf, **kw),
        "dual": run_dual(mf, **kw),
        "bounds": run_bounds(mf, **kw),
        "value": run_value(mf, **{**kw, "scales": None}),
        "swap": run_swap(mf, **{**kw, "scales": None}),
    }


COMMANDS = {"check": run_check, "solve": run_solve, "dual": run_dual, "bounds": run_bounds,
            "value": run_value, "swap": run_swap, "report": run_report}


def _digest(model_path, args: dict, tol: Tolerances) -> str:
    h = hashlib.sha256()
    with open(model_path, "rb") as fh:
        h.update(fh.read())
    h.update(json.dumps(args, sort_keys=True).encode())
    h.update(json.dumps(tol.to_dict(), sort_keys=True).encode())
    return h.hexdigest()


def execute(command: str, model_path, *, loss=None, claim=None, premium="cash0", side="short",
            reference=None, tol=None, scales=None) -> tuple[int, dict]:
    """Run one command; returns ``(exit code, report)`` without printing."""
    if command not in COMMANDS:
        return EXIT_MODEL, {"error": f"unknown command {command!r}", "kind": "usage"}
    try:
        tolerances = load_tolerances()
        if tol is not None:
            tolerances = replace(tolerances, cut_tol=tol, bisection=tol, golden=tol)
        mf = load_model(model_path)
    except (ModelError, TreeError, ConfigError) as exc:
        kind = "config" if isinstance(exc, ConfigError) else "model"
        return EXIT_MODEL, {"error": str(exc), "kind": kind}
    args = {"loss": loss, "claim": claim, "premium": premium, "side": side, "reference": reference,
            "scales": list(scales) if scales else None}
    warnings = []
    if loss is None and len(mf.losses) > 1:
        loss = next(iter(mf.losses))
        warnings.append(f"no --loss given, using {loss!r}")
    for key, flag in sorted(mf.model.broadcast.items()):
        if flag:
            warnings.append(f"{key} broadcast from per-time specification")
    start = time.perf_counter()
    try:
        results = COMMANDS[command](mf, loss_name=loss, claim=claim, premium=premium, side=side,
                                    reference=reference, tol=tolerances, scales=scales)
    except (ModelError, TreeError, KeyError) as exc:
        return EXIT_MODEL, {"error": str(exc), "kind": "model"}
    elapsed = time.perf_counter() - start
    report = {
        "command": {"name": command, "args": args, "model": str(model_path)},
        "inputs_digest": _digest(model_path, args, tolerances),
        "results": results,
        "warnings": warnings,
        "timing": {"seconds": elapsed},
    }
    bad = sorted({s for s in _statuses(results) if s in FAILURE_STATUSES})
    if bad:
        report["warnings"].append("solver failure status: " + ", ".join(bad))
        return EXIT_SOLVER, report
    return EXIT_OK, report


def _parse_scales(_ctx, _param, value):
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated numbers") from None


def _common(f):
    opts = [
        click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False),
                     help="Model file (JSON, see model.schema.json)."),
        click.option("--loss", default=None, help="Loss name from the model file."),
        click.option("--claim", default=None, help="Claim name ('zero' or one from the file)."),
        click.option("--premium", default="cash0", show_default=True,
                     help="Premium claim name; 'cash0' is one unit of cash at time 0."),
        click.option("--reference", default=None, help="Reference claim for swap rates (default zero)."),
        click.option("--side", type=click.Choice(["short", "long"]), default="short", show_default=True),
        click.option("--tol", type=float, default=None, help="Accuracy of cuts and line searches."),
        click.option("--scales", default=None, callback=_parse_scales,
                     help="Comma-separated claim scales: emit a value surface."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True),
        click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
                     help="Write the report to a file instead of stdout."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Hedging and valuation in illiquid markets on scenario trees."""


def _make(name: str, doc: str):
    @main.command(name=name, help=doc)
    @_common
    def _cmd(model_path, loss, claim, premium, reference, side, tol, scales, fmt, output):
        code, report = execute(name, model_path, loss=loss, claim=claim, premium=premium, side=side,
                               reference=reference, tol=tol, scales=scales)
        if "error" in report:
            click.echo(f"error ({report['kind']}): {report['error']}", err=True)
            sys.exit(code)
        text = dumps_report(report) if fmt == "json" else report_csv(report)
        if output:
            with open(output, "w") as fh:
                fh.write(text + ("\n" if not text.endswith("\n") else ""))
        else:
            click.echo(text, nl=not text.endswith("\n"))
        sys.exit(code)

    return _cmd


for _name, _doc in [
    ("check", "Check the standing assumptions (structure, linearity, domain scaling, dual probe)."),
    ("solve", "Minimize the expected loss of the hedged claim."),
    ("dual", "Dual certificate, optimality residuals and shadow prices."),
    ("bounds", "Super- and subhedging cost of the claim in units of the premium."),
    ("value", "Accounting value of the claim (least acceptable initial capital)."),
    ("swap", "Indifference swap rate of the claim against the premium."),
    ("report", "Run every command and collect the results."),
]:
    _make(_name, _doc)


def run_command(argv) -> int:
    """Entry point for tests: returns the exit code instead of exiting."""
    try:
        main.main(args=list(argv), prog_name="illiq", standalone_mode=False)
    except SystemExit as exc:
        return int(exc.code or 0)
    except click.UsageError as exc:
        click.echo(f"error (usage): {exc.format_message()}", err=True)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    main()
