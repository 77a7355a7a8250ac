"""Command-line experiment harness.

Every run is a pure function of its :class:`ExperimentConfig`. Exit status is
0 when the measured regret is certified inside its bounds, 2 on a sandwich
violation and 1 on a configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adversary, bounds, engines, fairness, transform
from .core import DomainSpec, LossSequence, format_real
from .regularizers import EntropyRegularizer, RateSchedule, ZeroRegularizer

SUBCOMMANDS = ("hedge", "ftrl", "adagrad", "linearized", "gen", "canonicalize", "search", "fairness", "bounds")
EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    engine: str = "hedge"
    schedule: str = "decreasing-hedge-std"
    T: int = 1000
    d: int = 2
    seed: int = 0
    out: str | None = None
    tol: float = bounds.CERT_TOL
    workers: int | None = None
    seq: str = "random"
    options: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not isinstance(self.T, int) or self.T < 1:
            raise ConfigError("T must be a positive integer")
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError("d must be a positive integer")
        if not (isinstance(self.tol, (int, float)) and self.tol >= 0):
            raise ConfigError("tol must be nonnegative")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.schedule in ("ftl", "zero"):
            return self
        try:
            RateSchedule.parse(self.schedule, max(self.d, 2))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return self

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - names
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "subcommand" not in raw:
            raise ConfigError("config needs a subcommand")
        return cls(**raw).validate()


# Output helpers


def emit_csv(obj, path) -> str:
    """Write a trajectory, loss sequence or list of row dicts as CSV."""
    if hasattr(obj, "to_csv"):
        text = obj.to_csv()
    else:
        rows = list(obj)
        if not rows:
            text = ""
        else:
            cols = list(rows[0])
            lines = [",".join(cols)]
            for r in rows:
                lines.append(",".join(_fmt(r[c]) for c in cols))
            text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, newline="")
    return text


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_real(v)
    return str(v)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


class Run:
    def __init__(self, cfg: ExperimentConfig, stdout):
        self.cfg = cfg
        self.stdout = stdout
        self.out = Path(cfg.out) if cfg.out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        if self.out:
            (self.out / name).write_text(text, newline="")

    def summary(self, regret, lower, upper, certified, **extra) -> int:
        parts = [f"regret={format_real(regret)}", f"lower={format_real(lower)}",
                 f"upper={format_real(upper)}", f"certified={'true' if certified else 'false'}"]
        parts += [f"{k}={_fmt(v)}" for k, v in extra.items()]
        line = " ".join(parts)
        print(line, file=self.stdout)
        self.write("summary.txt", line + "\n")
        return EXIT_OK if certified else EXIT_VIOLATION


# Subcommands


def _sequence(cfg: ExperimentConfig) -> LossSequence:
    kind = cfg.seq
    if kind == "canonical":
        if cfg.d != 2:
            raise ConfigError("canonical sequences have d = 2")
        return adversary.canonical(cfg.T)
    if kind in ("random", "binary"):
        return adversary.random_dtol(cfg.T, cfg.d, True, cfg.seed)
    if kind == "uniform":
        return adversary.random_dtol(cfg.T, cfg.d, False, cfg.seed)
    path = Path(kind)
    if path.exists():
        return LossSequence.from_csv(path, cfg.options.get("mode", "dtol"))
    raise ConfigError(f"unknown sequence {kind!r}")


def _schedule(cfg, d):
    if cfg.schedule in ("ftl", "zero"):
        return None
    return RateSchedule.parse(cfg.schedule, d)


def cmd_hedge(run: Run) -> int:
    cfg = run.cfg
    seq = _sequence(cfg)
    sched = _schedule(cfg, seq.d)
    traj = engines.run_hedge(sched, seq)
    rep = bounds.certify(traj, DomainSpec.simplex(seq.d))
    rep.tol = cfg.tol
    doc = rep.as_dict()
    lower, upper = rep.lower, rep.upper
    if sched is not None and sched.kind == "decreasing-hedge-std" and seq.d >= 2:
        lo_d, hi_d = bounds.hedge_sandwich(seq.T, seq.d)
        doc["display"] = {"lower": lo_d, "upper": hi_d}
        lower, upper = max(lower, lo_d), min(upper, hi_d)
    ok = lower - cfg.tol <= traj.regret <= upper + cfg.tol
    run.write("trajectory.csv", traj.to_csv())
    run.write("bounds.json", _dump(doc))
    return run.summary(traj.regret, lower, upper, ok)


def cmd_ftrl(run: Run) -> int:
    cfg = run.cfg
    d = max(cfg.d, 2)
    z = adversary.uniform01(cfg.seed, cfg.T * d).reshape(cfg.T, d)
    losses = [engines.ConvexLossOracle.quadratic(np.eye(d), -zz, 0.5 * zz @ zz) for zz in z]
    dom = DomainSpec.simplex(d)
    sched = _schedule(cfg, d)
    reg = ZeroRegularizer() if sched is None else EntropyRegularizer.for_hedge(sched)
    traj = engines.run_ftrl(losses, reg, dom)
    rep = bounds.certify(traj, dom, upper=sched is not None)
    rep.tol = cfg.tol
    run.write("trajectory.csv", traj.to_csv())
    run.write("bounds.json", _dump(rep.as_dict()))
    return run.summary(rep.regret, rep.lower, rep.upper, rep.certified)


def adagrad_instance(T, d, seed):
    """Random box containing 0 and linear losses in [-1, 1]^d."""
    u = adversary.uniform01(seed, 2 * d + T * d)
    lo = -0.1 - u[:d]
    hi = 0.1 + u[d : 2 * d]
    g = 2.0 * u[2 * d :].reshape(T, d) - 1.0
    dom = DomainSpec.box(lo, hi, grad_bound_inf=1.0, grad_bound_2=math.sqrt(d))
    return dom, g


def cmd_adagrad(run: Run) -> int:
    cfg = run.cfg
    variant = cfg.options.get("variant", cfg.engine if cfg.engine in ("diagonal", "full") else "diagonal")
    dom, g = adagrad_instance(cfg.T, cfg.d, cfg.seed)
    if variant == "diagonal":
        eta, delta = dom.diameter_inf, dom.grad_bound_inf
    else:
        eta, delta = dom.diameter_2, dom.grad_bound_2
    losses = [engines.ConvexLossOracle.linear(x) for x in g]
    traj = engines.run_adagrad_ftrl(variant, losses, dom, eta, delta)
    rep = bounds.certify(traj, dom)
    lo_c, hi_c = bounds.adagrad_bounds(traj.grads, dom, variant, eta, delta)
    doc = rep.as_dict()
    doc["closed_form"] = {"lower": lo_c, "upper": hi_c}
    ok = lo_c - cfg.tol <= rep.regret <= hi_c + cfg.tol and rep.lower - cfg.tol <= rep.regret
    run.write("trajectory.csv", traj.to_csv())
    run.write("bounds.json", _dump(doc))
    return run.summary(rep.regret, lo_c, hi_c, ok, variant=variant)


def cmd_linearized(run: Run) -> int:
    cfg = run.cfg
    if cfg.T % 2:
        raise ConfigError("linearized construction needs an even T")
    traj = engines.run_linearized_eg(adversary.piecewise_outcomes(cfg.T))
    T = cfg.T
    lower = -T / 8.0  # algorithm loss >= 0, comparator pays 1/8 per round
    upper = -3.0 * T / 64.0 + 10.0 * math.sqrt(T)
    ok = lower - cfg.tol <= traj.regret <= upper + cfg.tol
    rep = bounds.certify(traj)
    doc = {"lower": lower, "upper": upper, "regret": traj.regret, "certified": ok,
           "linearized_game": rep.as_dict()}
    run.write("trajectory.csv", traj.to_csv())
    run.write("bounds.json", _dump(doc))
    return run.summary(traj.regret, lower, upper, ok)


def cmd_gen(run: Run) -> int:
    cfg = run.cfg
    kind = cfg.seq
    if kind == "piecewise":
        y = adversary.piecewise_outcomes(cfg.T)
        text = "y\n" + "".join(f"{int(v)}\n" for v in y)
    else:
        text = _sequence(cfg).to_csv()
    if run.out:
        run.write("sequence.csv", text)
    else:
        run.stdout.write(text)
    return EXIT_OK


def cmd_canonicalize(run: Run) -> int:
    cfg = run.cfg
    if cfg.seq in ("random", "binary"):
        seq = adversary.random_dtol(cfg.T, 2, True, cfg.seed)
    else:
        seq = _sequence(cfg)
        if seq.mode != "binary":
            seq = LossSequence(seq.losses, "binary")
    res = transform.canonicalize(seq)
    lines = "".join(json.dumps(a.as_dict(), sort_keys=True) + "\n" for a in res.audit)
    run.write("audit.jsonl", lines)
    run.write("canonical.csv", res.seq.to_csv())
    if not run.out:
        run.stdout.write(lines)
    before = transform.dh_regret(seq)
    after = transform.dh_regret(res.seq)
    monotone = all(a.delta <= 1e-9 for a in res.audit)
    ok = after <= before + 1e-9 and monotone and res.seq == adversary.canonical(seq.T)
    return run.summary(after, -math.inf, before, ok, steps=len(res.audit))


def cmd_search(run: Run) -> int:
    cfg = run.cfg
    try:
        res = transform.brute_force_best(cfg.T, cfg.workers)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    codes = [transform.encode(w).tolist() for w in res.witnesses]
    doc = {"T": cfg.T, "min_regret": res.min_regret, "sequences_examined": res.sequences_examined,
           "witnesses": codes}
    ok = True
    if cfg.T >= 16 and cfg.T % 2 == 0:
        ref = transform.dh_regret(adversary.canonical(cfg.T))
        doc["canonical_regret"] = ref
        ok = abs(ref - res.min_regret) <= 1e-9
    run.write("search.json", _dump(doc))
    return run.summary(res.min_regret, res.min_regret, res.min_regret, ok,
                       examined=res.sequences_examined, witnesses=len(codes))


def cmd_fairness(run: Run) -> int:
    cfg = run.cfg
    G = int(cfg.options.get("groups", 2))
    pattern = cfg.options.get("pattern", "round-robin")
    base = adversary.random_dtol(cfg.T, cfg.d, True, cfg.seed)
    stream = adversary.grouped_stream(base, G, pattern, cfg.seed)
    d = max(cfg.d, 2)
    sched = RateSchedule.parse(cfg.schedule, d)
    led = fairness.run_interleaved(stream, sched)
    if sched.constant:
        rows = fairness.fairness_report(led, [len(stream)], fairness.horizon_bound, d, cfg.tol)
    else:
        rows = fairness.fairness_report(led, stream.sync_prefixes(), fairness.anytime_bound, d, cfg.tol)
    run.write("fairness.jsonl", fairness.report_json(rows))
    worst = max(rows, key=lambda r: r["gap"] - r["bound"]) if rows else {"gap": 0.0, "bound": 0.0}
    ok = all(r["satisfied"] for r in rows)
    return run.summary(worst["gap"], 0.0, worst["bound"], ok, prefixes=len(rows))


def cmd_bounds(run: Run) -> int:
    cfg = run.cfg
    d = max(cfg.d, 2)
    lo, hi = bounds.hedge_sandwich(cfg.T, d)
    best = float(cfg.options.get("best_loss", 0.0))
    doc = {"T": cfg.T, "d": d, "hedge_sandwich": [lo, hi],
           "timeless_rate": bounds.timeless_rate(best, d), "timeless_lb": bounds.timeless_lb(best, d)}
    run.write("bounds.json", _dump(doc))
    print(json.dumps(doc, sort_keys=True), file=run.stdout)
    return EXIT_OK


HANDLERS = {
    "hedge": cmd_hedge,
    "ftrl": cmd_ftrl,
    "adagrad": cmd_adagrad,
    "linearized": cmd_linearized,
    "gen": cmd_gen,
    "canonicalize": cmd_canonicalize,
    "search": cmd_search,
    "fairness": cmd_fairness,
    "bounds": cmd_bounds,
}

_DEFAULTS = {
    "hedge": {"T": 1000},
    "ftrl": {"T": 200, "d": 3},
    "adagrad": {"T": 2000, "d": 5},
    "linearized": {"T": 100_000},
    "gen": {"T": 16},
    "canonicalize": {"T": 16},
    "search": {"T": 16},
    "fairness": {"T": 1000},
    "bounds": {"T": 100},
}


def run_experiment(cfg: ExperimentConfig, stdout=None) -> int:
    cfg.validate()
    run = Run(cfg, stdout or sys.stdout)
    # the output location is not part of what a run computes
    run.write("config.json", dataclasses.replace(cfg, out=None).to_json() + "\n")
    return HANDLERS[cfg.subcommand](run)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="regret-forge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file; flags override its fields")
        s.add_argument("--T", type=int)
        s.add_argument("--d", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--schedule", help="preset[:scale] or ftl")
        s.add_argument("--out", help="output directory")
        s.add_argument("--tol", type=float)
        s.add_argument("--workers", type=int)
        s.add_argument("--seq", help="random | uniform | canonical | piecewise | CSV path")
        s.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        if name == "adagrad":
            s.add_argument("--variant", choices=("diagonal", "full"))
        if name == "fairness":
            s.add_argument("--groups", type=int)
            s.add_argument("--pattern", choices=("round-robin", "block-permuted", "pair-shuffled", "random"))
        if name == "bounds":
            s.add_argument("--best-loss", type=float)
    return p


def config_from_args(ns) -> ExperimentConfig:
    if ns.config:
        cfg = ExperimentConfig.from_json(Path(ns.config).read_text())
        if cfg.subcommand != ns.subcommand:
            raise ConfigError("config subcommand does not match the command line")
    else:
        cfg = ExperimentConfig(ns.subcommand, **_DEFAULTS.get(ns.subcommand, {}))
    for k in ("T", "d", "seed", "schedule", "out", "tol", "workers", "seq"):
        v = getattr(ns, k)
        if v is not None:
            setattr(cfg, k, v)
    opts = dict(cfg.options)
    for k in ("variant", "groups", "pattern", "best_loss"):
        v = getattr(ns, k, None)
        if v is not None:
            opts[k] = v
    cfg.options = opts
    if cfg.subcommand == "adagrad" and "variant" in opts:
        cfg.engine = opts["variant"]
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if ns.dump_config:
            print(cfg.to_json())
            return EXIT_OK
        return run_experiment(cfg)
    except (ConfigError, FileNotFoundError) as e:
        print(f"regret-forge: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"regret-forge: invalid input: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
