"""Command-line front end: ``qco <command> [flags]``.

Exit codes: 0 success, 2 unknown command, 3 bad flag or argument,
4 file or input-format problem, 5 solver error or failed runtime check.
Payloads go to ``--out`` (stdout by default); one-line summaries go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import assortment, disclosure, pricing, priority, sim
from .core import InstanceError, dumps, instance_to_dict, load_instance
from .equilibrium import equilibrium

EXIT_COMMAND, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 2, 3, 4, 5


class UsageError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


class Parser(argparse.ArgumentParser):
    def error(self, message):
        top = self.prog.split()[-1] == "qco"
        code = EXIT_COMMAND if top and ("invalid choice" in message or "required" in message) else EXIT_USAGE
        raise UsageError(f"{self.prog}: {message}", code)


class ChecksFailed(Exception):
    pass


def _json_arg(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} must be JSON: {exc}") from exc


def _subset(inst, text):
    if text is None:
        return None
    ids = _json_arg(text, "--subset")
    if not isinstance(ids, list):
        raise UsageError("--subset must be a JSON list of product ids")
    index = {p.id: k for k, p in enumerate(inst.products)}
    missing = [i for i in ids if i not in index]
    if missing:
        raise UsageError(f"unknown product ids in --subset: {missing}")
    return [index[i] for i in ids]


def _load(args):
    if not args.instance:
        raise UsageError("--instance is required")
    try:
        return load_instance(args.instance)
    except OSError as exc:
        raise UsageError(f"cannot read {args.instance}: {exc.strerror}", EXIT_IO) from exc
    except InstanceError as exc:
        raise UsageError(f"{args.instance}: {exc}", EXIT_IO) from exc


def _global_mu(inst):
    if inst.mu is None:
        raise UsageError("this command needs a global mu in the instance")
    return inst.mu


# -- commands ------------------------------------------------------------

def cmd_equilibrium(args):
    inst = _load(args)
    eq = equilibrium(inst, _subset(inst, args.subset), args.mode)
    return eq.as_dict(inst), f"lambda={eq.lam:.6g} revenue={eq.revenue:.6g}"


def cmd_price(args):
    inst = _load(args)
    sol = pricing.optimal_pricing(inst.r, _global_mu(inst), inst.c)
    return sol.as_dict(), f"lambda*={sol.lambda_star:.6g} p*={sol.price_star:.6g}"


def cmd_statics(args):
    inst = _load(args)
    if args.steps < 2 or not args.to > args.start:
        raise UsageError("need --steps >= 2 and --to > --from")
    grid = np.linspace(args.start, args.to, args.steps)
    if args.param == "mu":
        rep = pricing.statics_mu(inst.r, inst.c, grid)
    else:
        rep = pricing.statics_c(inst.r, _global_mu(inst), grid)
    lines = ["param,lambda_star,price_star,revenue_star"]
    lines += [",".join(repr(float(v)) for v in row) for row in rep.rows()]
    if args.report:
        _write(args.report, dumps(rep.as_dict()))
    return "\n".join(lines) + "\n", f"segments={rep.segments}"


def cmd_assort(args):
    inst = _load(args)
    m = args.method
    if m in ("fptas", "fptas-hetero") and args.epsilon is None:
        raise UsageError("--epsilon is required for the approximation schemes")
    if m == "brute":
        sol = assortment.brute_force(inst, args.capacity)
    elif m == "revenue-order":
        sol = assortment.revenue_ordered(inst)
    elif m == "fptas":
        sol = assortment.fptas_homog(inst, args.epsilon)
    else:
        sol = assortment.fptas_hetero(inst, args.epsilon, args.capacity)
    return sol.as_dict(inst), f"{sol.method}: revenue={sol.revenue:.6g} |S|={len(sol.subset)}"


def cmd_priority(args):
    inst = _load(args)
    if args.general:
        plan = priority.priority_pricing_general(inst, restarts=args.restarts, seed=args.seed)
    else:
        mus, cs = inst.service_rates, inst.cost_rates
        if np.ptp(mus) > 0 or np.ptp(cs) > 0:
            raise UsageError("classes differ in mu or c; use --general")
        plan = priority.priority_pricing_special(inst.r, float(mus[0]), float(cs[0]),
                                                 priority.cmu_order(cs, mus))
    return plan.as_dict(inst), f"objective={plan.objective:.6g}"


def cmd_disclose(args):
    inst = _load(args)
    mu = _global_mu(inst)
    k = None if args.full else (0 if args.none else args.threshold)
    if args.optimize_price:
        res = disclosure.optimal_price_disclosure(inst.r, mu, inst.c, k)
        out = res.as_dict()
        return out, f"price={res.price:.6g} revenue={res.revenue:.6g}"
    from .core import aggregates
    agg = aggregates(inst, _subset(inst, args.subset) or range(inst.n))
    chain = disclosure.threshold_chain(agg.W, mu, inst.c, k)
    out = chain.as_dict()
    out["revenue"] = agg.PW / agg.W * chain.throughput
    out["residuals"] = chain.residuals()
    return out, f"throughput={chain.throughput:.6g}"


def cmd_compare(args):
    inst = _load(args)
    v = disclosure.compare_disclosure(inst, _subset(inst, args.subset))
    return v.as_dict(), f"verdict={v.verdict}"


def cmd_gadget(args):
    weights = _json_arg(args.weights, "--weights")
    if not isinstance(weights, list) or not all(isinstance(x, (int, float)) for x in weights):
        raise UsageError("--weights must be a JSON list of numbers")
    try:
        g, inst = assortment.gadget_build(weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = {"instance": instance_to_dict(inst), "gadget": g.as_dict()}
    if args.instance_out:
        _write(args.instance_out, dumps(instance_to_dict(inst)))
    if args.sidecar:
        _write(args.sidecar, dumps(g.as_dict()))
    summary = f"T={g.target:.6g} p2={g.p2:.6g}"
    if args.verify:
        rep = assortment.gadget_verify(g, args.resolution)
        out["verification"] = rep.as_dict()
        if not rep.ok:
            return out, summary + " verification FAILED", False
        summary += " verified"
    return out, summary


def cmd_simulate(args):
    inst = _load(args)
    kw = dict(seed=args.seed, replications=args.replications, warmup=args.warmup)
    if args.mode == "fifo":
        cfg, ref = sim.fifo_setup(inst, args.horizon, **kw)
    elif args.mode == "priority":
        eq = equilibrium(inst)
        mus, cs = inst.service_rates, inst.cost_rates
        cfg, ref = sim.priority_setup(eq.lam_i.tolist(), mus.tolist(), priority.cmu_order(cs, mus),
                                      args.horizon, **kw)
    else:
        from .core import aggregates
        agg = aggregates(inst, range(inst.n))
        k = None if args.threshold is None else args.threshold
        cfg, ref = sim.disclosure_setup(agg.W, _global_mu(inst), inst.c, k, args.horizon, **kw)
    rep = sim.simulate(cfg, ref)
    if args.csv:
        _write(args.csv, rep.batch_csv())
    ok = rep.passed or args.no_check
    return rep.as_dict(), f"events={rep.events} failed={rep.failures()}", ok


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "price": cmd_price,
    "statics": cmd_statics,
    "assort": cmd_assort,
    "priority": cmd_priority,
    "disclose": cmd_disclose,
    "compare-disclosure": cmd_compare,
    "gadget": cmd_gadget,
    "simulate": cmd_simulate,
}


def build_parser() -> Parser:
    p = Parser(prog="qco", description="Pricing, assortment and disclosure for a congested service system.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, help_text, instance=True):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        if instance:
            sp.add_argument("--instance", metavar="FILE", help="instance JSON")
        sp.add_argument("--out", metavar="FILE", help="write the payload here instead of stdout")
        sp.add_argument("--threads", type=int, metavar="N", help="cap on worker threads")
        return sp

    sp = add("equilibrium", "equilibrium purchase rates for fixed prices")
    sp.add_argument("--subset", metavar="JSON", help="product ids to offer (default: all)")
    sp.add_argument("--mode", choices=["auto", "homog", "hetero"], default="auto")

    add("price", "optimal uniform price")

    sp = add("statics", "comparative statics of the optimal price (CSV curve)")
    sp.add_argument("--param", choices=["mu", "c"], required=True)
    sp.add_argument("--from", dest="start", type=float, required=True, metavar="X")
    sp.add_argument("--to", type=float, required=True, metavar="X")
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--report", metavar="FILE", help="also write segments, thresholds and flags as JSON")

    sp = add("assort", "assortment optimization")
    sp.add_argument("--method", choices=["brute", "revenue-order", "fptas", "fptas-hetero"], required=True)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--capacity", type=int, metavar="K")

    sp = add("priority", "prices with priority classes")
    sp.add_argument("--general", action="store_true", help="per-class mu and c (numeric optimization)")
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("disclose", "queue-length disclosure policies")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--threshold", type=int, metavar="K")
    g.add_argument("--full", action="store_true")
    g.add_argument("--none", action="store_true")
    sp.add_argument("--optimize-price", action="store_true")
    sp.add_argument("--subset", metavar="JSON")

    sp = add("compare-disclosure", "full disclosure versus no information")
    sp.add_argument("--subset", metavar="JSON")

    sp = add("gadget", "Partition reduction instance", instance=False)
    sp.add_argument("--weights", required=True, metavar="JSON")
    sp.add_argument("--verify", action="store_true")
    sp.add_argument("--resolution", type=float, default=1e-4)
    sp.add_argument("--instance-out", metavar="FILE", help="write the product instance JSON")
    sp.add_argument("--sidecar", metavar="FILE", help="write the gadget parameters JSON")

    sp = add("simulate", "discrete-event cross-check of the analytic model")
    sp.add_argument("--mode", choices=list(sim.MODES), required=True)
    sp.add_argument("--horizon", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replications", type=int, default=1)
    sp.add_argument("--warmup", type=float)
    sp.add_argument("--threshold", type=int, metavar="K", help="disclosure threshold (default: full)")
    sp.add_argument("--csv", metavar="FILE", help="per-batch means")
    sp.add_argument("--no-check", action="store_true", help="exit 0 even if a 3-sigma check fails")
    return p


def _config_defaults(parser, command):
    path = os.environ.get("QCO_CONFIG")
    if not path:
        return
    try:
        conf = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read QCO_CONFIG file {path}: {exc.strerror}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"QCO_CONFIG file {path} is not JSON: {exc}", EXIT_IO) from exc
    if not isinstance(conf, dict):
        raise UsageError("QCO_CONFIG file must hold a JSON object", EXIT_IO)
    sub = parser._subparsers._group_actions[0].choices[command]
    dests = {a.dest for a in sub._actions}
    vals = {k.replace("-", "_"): v for k, v in conf.items() if not isinstance(v, dict)}
    vals.update({k.replace("-", "_"): v for k, v in conf.get(command, {}).items()})
    known = {k: v for k, v in vals.items() if k in dests}
    # required flags satisfied by the config file are no longer required
    for a in sub._actions:
        if a.dest in known:
            a.required = False
    sub.set_defaults(**known)


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from exc


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command = next((a for a in argv if not a.startswith("-")), None)
        if command in COMMANDS:
            _config_defaults(parser, command)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, ArithmeticError, AssertionError, RuntimeError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    payload, summary, *rest = result
    ok = rest[0] if rest else True
    text = payload if isinstance(payload, str) else dumps(payload)
    try:
        if args.out:
            _write(args.out, text)
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    print(summary, file=sys.stderr)
    return 0 if ok else EXIT_SOLVER


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
