"""Command-line front end.

Every subcommand writes rows (CSV with a header, or a JSON array of objects
with the same keys). Each row carries ``schema_version``. Options may also be
given in a flat JSON config file (``--config``); command-line flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .channel import SystemParams, UserProfile, watts_to_dbm
from .experiments import ScenarioConfig, generate_scenario, oma_system_power, sweep
from .montecarlo import (
    closed_form_outage,
    samples_for,
    simulate_pair_outage,
    simulate_single_outage,
    single_closed_form_outage,
)
from .power import (
    PairSolution,
    VirtualUser,
    noma_gain_over_oma,
    oma_pair_power,
    solve_both_cases,
    solve_pair,
    virtual_users,
)
from .rng import child_rng
from .scheduling import (
    Pair,
    SchedulingError,
    TooManyCombinations,
    check_load,
    schedule_exhaustive,
    schedule_random,
    schedule_virtual,
)

SCHEMA_VERSION = 1
VIOLATION_SIGMAS = 4.0

# option name -> (type, default); None default means "not set"
SCENARIO_OPTIONS = {
    "users": (int, 4),
    "subcarriers": (int, 2),
    "per_user": (int, 1),
    "cell_size": (float, 200.0),
    "case": (int, 1),
    "noise_dbm": (float, -128.0),
    "alpha": (float, 3.6),
    "realizations": (int, 1000),
    "samples": (int, 10**6),
    "seed": (int, None),
    "method": (str, "proposed"),
    "format": (str, "csv"),
    "out": (str, None),
    "profiles": (str, None),
    "power_scale": (float, 1.0),
    "cell_sizes": (str, "100,150,200,250,300,350"),
    "user_counts": (str, "6,7,8,9,10"),
}


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_rows(rows: list[dict], fmt: str, out) -> None:
    rows = [{"schema_version": SCHEMA_VERSION, **r} for r in rows]
    if fmt == "json":
        out.write(json.dumps(rows, indent=1))
        out.write("\n")
        return
    if not rows:
        return
    fields = list(rows[0])
    for r in rows[1:]:
        fields.extend(k for k in r if k not in fields)
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in fields})


def read_rows(text: str, fmt: str) -> list[dict]:
    """Parse output of :func:`write_rows`; numeric CSV fields become numbers."""
    if fmt == "json":
        return json.loads(text)
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in r.items():
            if v == "":
                parsed[k] = None
                continue
            try:
                parsed[k] = int(v)
            except ValueError:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
        rows.append(parsed)
    return rows


def _emit(rows, opts):
    if opts["out"]:
        try:
            with open(opts["out"], "w", newline="") as fh:
                write_rows(rows, opts["format"], fh)
        except OSError as exc:
            print(f"error: cannot write {opts['out']}: {exc}", file=sys.stderr)
            return 1
    else:
        write_rows(rows, opts["format"], sys.stdout)
    return 0


def _dbm(w):
    return None if w is None else watts_to_dbm(w)


# -- pair -------------------------------------------------------------------

def _pair_user(args, side: str, params: SystemParams) -> VirtualUser:
    g = lambda k: getattr(args, f"{k}_{side}")  # noqa: E731
    if g("beta") is not None or g("sinr") is not None:
        if g("beta") is None or g("sinr") is None:
            raise ValueError(f"--beta-{side} and --sinr-{side} must be given together")
        if g("beta") <= 0 or g("sinr") <= 0:
            raise ValueError("beta and SINR must be positive")
        return VirtualUser.from_sinr(g("beta"), g("sinr"), user_id=0 if side == "a" else 1)
    if None in (g("distance"), g("rate"), g("delta")):
        raise ValueError(f"user {side}: give --distance/--rate/--delta or --beta/--sinr")
    prof = UserProfile.create(0 if side == "a" else 1, g("distance"), g("rate"), g("delta"), params)
    return VirtualUser.from_profile(prof, 1)


def cmd_pair(args, opts) -> int:
    params = SystemParams.from_dbm(opts["noise_dbm"], opts["alpha"])
    try:
        a = _pair_user(args, "a", params)
        b = _pair_user(args, "b", params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    case_a, case_b = solve_both_cases(a, b)
    best = solve_pair(a, b)
    oma = oma_pair_power(a, b)
    gain = noma_gain_over_oma(a, b)
    if a.target_sinr >= 1 and b.target_sinr >= 1:
        order_note = "both SINR >= 1: larger-beta user performs SIC"
    else:
        order_note = "SINR < 1: ordering shortcut disabled, both cases compared"

    def row(name, sol: PairSolution | None, pa, pb, total, note=""):
        return {
            "row": name,
            "sic_user": sol.sic_user if sol else None,
            "power_a_watts": pa,
            "power_b_watts": pb,
            "total_watts": total,
            "total_dbm": _dbm(total) if total is not None and total > 0 else None,
            "note": note,
        }

    rows = [
        row("case_a_sic", case_a, case_a.power_a, case_a.power_b, case_a.total),
        row("case_b_sic", case_b, case_b.power_a, case_b.power_b, case_b.total),
        row("selected", best, best.power_a, best.power_b, best.total, order_note),
        row("oma", None, oma[0], oma[1], sum(oma)),
        row("gain", None, None, None, gain.watts,
            "within guarantee" if gain.guaranteed else "rates below 1 bit/s/Hz: no sign guarantee"),
    ]
    return _emit(rows, opts)


# -- scenarios --------------------------------------------------------------

def _read_profiles(path: str, params: SystemParams) -> list[UserProfile]:
    with open(path, newline="") as fh:
        return [
            UserProfile.create(int(r["id"]), float(r["distance"]), float(r["total_rate"]),
                               float(r["outage_req"]), params)
            for r in csv.DictReader(fh)
        ]


def _scenario(opts):
    """User profiles and config from either --profiles or a seeded draw."""
    seed = 0 if opts["seed"] is None else opts["seed"]
    if opts["profiles"]:
        params = SystemParams.from_dbm(opts["noise_dbm"], opts["alpha"])
        users = _read_profiles(opts["profiles"], params)
        check_load(len(users) * opts["per_user"], opts["subcarriers"])
        return users, seed
    cfg = _config(opts, realizations=1)
    return generate_scenario(cfg, child_rng(seed, 0, 0)), seed


def _config(opts, **over) -> ScenarioConfig:
    fields = dict(
        num_users=opts["users"], num_subcarriers=opts["subcarriers"], per_user=opts["per_user"],
        cell_size=opts["cell_size"], outage_case=opts["case"], noise_dbm=opts["noise_dbm"],
        alpha=opts["alpha"], realizations=opts["realizations"],
        seed=0 if opts["seed"] is None else opts["seed"],
    )
    return ScenarioConfig(**{**fields, **over})


def _schedule(users, opts, seed):
    vusers = virtual_users(users, opts["per_user"])
    M = opts["subcarriers"]
    method = opts["method"]
    if method == "proposed":
        return schedule_virtual(vusers, M)
    if method == "exhaustive":
        return schedule_exhaustive(vusers, M)
    if method == "random":
        return schedule_random(vusers, M, child_rng(seed, 0, 1))
    raise ValueError(f"unknown scheduling method {method!r}")


def cmd_schedule(args, opts) -> int:
    try:
        users, seed = _scenario(opts)
        if opts["method"] == "oma":
            K, M = len(users), opts["subcarriers"]
            rows = [{"subcarrier": None, "user_a": u.id, "user_b": None,
                     "power_a_watts": oma_system_power([u], K, M), "power_b_watts": None,
                     "sic_user": None} for u in users]
            total = oma_system_power(users, K, M)
        else:
            sched = _schedule(users, opts, seed)
            rows = []
            for m, e in enumerate(sched.entries, start=1):
                if isinstance(e, Pair):
                    rows.append({"subcarrier": m, "user_a": e.a.user_id, "user_b": e.b.user_id,
                                 "power_a_watts": e.solution.power_a,
                                 "power_b_watts": e.solution.power_b,
                                 "sic_user": e.sic_user.user_id})
                else:
                    rows.append({"subcarrier": m, "user_a": e.user.user_id, "user_b": None,
                                 "power_a_watts": e.power, "power_b_watts": None,
                                 "sic_user": None})
            total = sched.total_power
    except TooManyCombinations as exc:
        print(f"error: refusing exhaustive search: N={exc.count} exceeds {exc.limit}",
              file=sys.stderr)
        return 2
    except (SchedulingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for r in rows:
        t = (r["power_a_watts"] or 0.0) + (r["power_b_watts"] or 0.0)
        r["total_watts"], r["total_dbm"] = t, _dbm(t)
    rows.append({"subcarrier": "total", "total_watts": total, "total_dbm": _dbm(total)})
    return _emit(rows, opts)


def cmd_verify(args, opts) -> int:
    try:
        users, seed = _scenario(opts)
        sched = _schedule(users, opts, seed)
    except (SchedulingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    params = SystemParams.from_dbm(opts["noise_dbm"], opts["alpha"])
    scale = opts["power_scale"]
    rows = []
    for m, e in enumerate(sched.entries, start=1):
        rng = child_rng(seed, 1, m)
        if isinstance(e, Pair):
            sol = PairSolution(e.solution.power_a * scale, e.solution.power_b * scale,
                               e.solution.sic_user)
            n = max(samples_for(e.a.outage_req, opts["samples"]),
                    samples_for(e.b.outage_req, opts["samples"]))
            emp = simulate_pair_outage(sol, e.a, e.b, params, n, rng)
            ana = closed_form_outage(sol, e.a, e.b, params)
            checks = [(e.a, emp.a, ana[0]), (e.b, emp.b, ana[1])]
        else:
            p = e.power * scale
            n = samples_for(e.user.outage_req, opts["samples"])
            checks = [(e.user, simulate_single_outage(p, e.user, params, n, rng),
                       single_closed_form_outage(p, e.user, params))]
        for u, est, analytic in checks:
            sigma = math.sqrt(u.outage_req * (1 - u.outage_req) / est.samples)
            rows.append({
                "subcarrier": m, "user": u.user_id, "required_outage": u.outage_req,
                "analytic_outage": analytic, "empirical_outage": est.outage_rate,
                "std_error": est.std_error, "samples": est.samples,
                "violation": int(est.outage_rate - u.outage_req > VIOLATION_SIGMAS * sigma),
            })
    bad = sum(r["violation"] for r in rows)
    print(f"violations: {bad} of {len(rows)} user-subcarrier checks", file=sys.stderr)
    return _emit(rows, opts)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def cmd_sweep(args, opts) -> int:
    if opts["seed"] is None:
        print("error: --seed is required for sweeps", file=sys.stderr)
        return 2
    try:
        if args.command == "sweep-cellsize":
            values = _float_list(opts["cell_sizes"])
            template = _config(opts, cell_size=max(values))
            res = sweep(template, "cell_size", values)
        else:
            values = _int_list(opts["user_counts"])
            template = _config(opts, num_users=max(values))
            res = sweep(template, "num_users", values)
    except (SchedulingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = [{"case": opts["case"], **r} for r in res.rows()]
    return _emit(rows, opts)


# -- parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mcnoma", description="Power-efficient multicarrier NOMA resource allocation."
    )
    common = argparse.ArgumentParser(add_help=False, argument_default=None)
    common.add_argument("--config", help="flat JSON file of option values")
    common.add_argument("--noise-dbm", type=float)
    common.add_argument("--alpha", type=float, help="path-loss exponent")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--seed", type=int)

    scen = argparse.ArgumentParser(add_help=False, argument_default=None)
    scen.add_argument("--users", type=int, help="K")
    scen.add_argument("--subcarriers", type=int, help="M")
    scen.add_argument("--per-user", type=int, help="L")
    scen.add_argument("--cell-size", type=float, help="D in meters")
    scen.add_argument("--case", type=int, choices=(1, 2))
    scen.add_argument("--realizations", type=int)
    scen.add_argument("--method", choices=("proposed", "exhaustive", "random", "oma"))
    scen.add_argument("--profiles", help="CSV with id,distance,total_rate,outage_req")

    sub = p.add_subparsers(dest="command", required=True)

    pair = sub.add_parser("pair", parents=[common], help="two users on one subcarrier")
    for side in ("a", "b"):
        pair.add_argument(f"--distance-{side}", type=float)
        pair.add_argument(f"--rate-{side}", type=float, help="per-subcarrier rate, bit/s/Hz")
        pair.add_argument(f"--delta-{side}", type=float, help="outage requirement")
        pair.add_argument(f"--beta-{side}", type=float, help="QoS coefficient (overrides)")
        pair.add_argument(f"--sinr-{side}", type=float, help="target SINR (overrides)")

    sub.add_parser("schedule", parents=[common, scen], help="schedule users on subcarriers")
    verify = sub.add_parser("verify", parents=[common, scen], help="Monte Carlo outage check")
    verify.add_argument("--samples", type=int)
    verify.add_argument("--power-scale", type=float, help="scale allocated powers")

    cs = sub.add_parser("sweep-cellsize", parents=[common, scen], help="power vs cell size")
    cs.add_argument("--cell-sizes", help="comma-separated D values")
    us = sub.add_parser("sweep-users", parents=[common, scen], help="power vs number of users")
    us.add_argument("--user-counts", help="comma-separated K values")
    return p


def resolve_options(args) -> dict:
    """Defaults, then config file values, then explicit flags."""
    opts = {k: d for k, (_, d) in SCENARIO_OPTIONS.items()}
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a flat JSON object")
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key not in opts:
                raise ValueError(f"unknown config key {k!r}")
            typ = SCENARIO_OPTIONS[key][0]
            opts[key] = None if v is None else typ(v)
    for k in opts:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    if opts["format"] not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    return opts


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    handler = {
        "pair": cmd_pair,
        "schedule": cmd_schedule,
        "verify": cmd_verify,
        "sweep-cellsize": cmd_sweep,
        "sweep-users": cmd_sweep,
    }[args.command]
    return handler(args, opts)


if __name__ == "__main__":
    sys.exit(main())
