"""Command-line entry point: ``robust-online {simulate,verify,sweep,gap,test-pair}``.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 a property check failed.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import report
from .dist import DivergenceKind
from .game import (PREDICTORS, AdversaryStrategy, EpochConstant, Experiment, FixedSequence,
                   HypothesisClass, MaxDisagreement, UniformFeatures, _bern_pair_table,
                   bernoulli_eps_for_hellinger, build_lower_bound_instance, build_soft_gap_instance,
                   build_tsybakov_instance, loglog_slope, monte_carlo, order_statistic_quantile)
from .kernel import (MassartBernoulli, RandomizedResponse, SingletonKernel, Tsybakov, TVBall,
                     UniformMixture, gap, min_pairwise_gap, sample_from)
from .pairwise import PairTester, budget, empirical_mean_step, lecam_birge_step
from .verify import SUITES, run_suites

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_PROPERTY = 0, 1, 2, 3

KERNELS = ("massart", "randomized-response", "tv-ball", "tsybakov", "singleton")
CLASSES = ("random", "cube", "constant", "explicit")
INSTANCES = ("lower-bound", "soft-gap", "tsybakov")
FEATURE_RULES = ("max-disagreement", "fixed", "epoch", "uniform")
AXES = ("T", "eta", "alpha", "K")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# config parsing


_SCHEMA = {
    "": {"kernel", "hypothesis_class", "predictor", "adversary", "instance", "T", "runs", "delta",
         "seed0", "output", "sweep_T", "pair"},
    "kernel.massart": {"name", "eta"},
    "kernel.randomized-response": {"name", "eta", "M"},
    "kernel.tv-ball": {"name", "canonical", "eps"},
    "kernel.tsybakov": {"name", "lambdas", "alpha", "A"},
    "kernel.singleton": {"name", "table", "gamma_H"},
    "hypothesis_class.random": {"type", "K", "F", "N", "seed"},
    "hypothesis_class.cube": {"type", "tau"},
    "hypothesis_class.constant": {"type", "F", "N"},
    "hypothesis_class.explicit": {"type", "labels", "N"},
    "predictor": {"name", "eta", "tester", "delta", "C"},
    "adversary": {"features", "noise", "ground_truth"},
    "adversary.features.max-disagreement": {"rule", "patience"},
    "adversary.features.fixed": {"rule", "sequence"},
    "adversary.features.epoch": {"rule", "features", "epoch_len"},
    "adversary.features.uniform": {"rule"},
    "instance.lower-bound": {"name", "tau", "gamma_H"},
    "instance.soft-gap": {"name", "alpha", "A"},
    "instance.tsybakov": {"name", "alpha", "A"},
    "pair": {"feature", "labels", "truth", "tester", "delta", "noise", "steps", "step"},
}


def _section(d, path: str, schema_key: str | None = None) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = _SCHEMA[schema_key if schema_key is not None else path]
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path + '.' if path else ''}{k}: unknown key")
    return d


def _named(d, path, key, choices) -> str:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    v = d.get(key)
    if v not in choices:
        raise ConfigError(f"{path}.{key}: unknown value {v!r}; choose from {list(choices)}")
    return v


def _num(d, path, key, default=None, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{path}.{key}: required")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not float(v).is_integer()):
        raise ConfigError(f"{path}.{key}: expected {'an integer' if kind is int else 'a number'}, got {v!r}")
    v = kind(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"{path}.{key}: {v} is below the allowed range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(f"{path}.{key}: {v} is above the allowed range")
    return v


@dataclass
class ExperimentConfig:
    """Validated experiment description. ``raw`` is the source document."""

    raw: dict
    T: int
    runs: int = 100
    delta: float = 0.05
    seed0: int = 0
    output: str = "results/run"
    predictor: str = "l2-reduction"
    predictor_params: dict = field(default_factory=dict)

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        """Copy with one sweep axis set to ``value``."""
        raw = copy.deepcopy(self.raw)
        if axis == "T":
            raw["T"] = int(value)
        elif axis == "eta":
            if "kernel" not in raw or "eta" not in _SCHEMA.get(f"kernel.{raw['kernel'].get('name')}", ()):
                raise ConfigError("sweep axis eta needs a kernel with an eta parameter")
            raw["kernel"]["eta"] = value
        elif axis == "alpha":
            target = raw.get("instance") or raw.get("kernel") or {}
            if "alpha" not in _SCHEMA.get(f"{'instance' if 'instance' in raw else 'kernel'}.{target.get('name')}", ()):
                raise ConfigError("sweep axis alpha needs a tsybakov or soft-gap setup")
            target["alpha"] = value
        elif axis == "K":
            hc = raw.get("hypothesis_class") or {}
            if hc.get("type") != "random":
                raise ConfigError("sweep axis K needs a random hypothesis class")
            hc["K"] = int(value)
        else:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        return config_from_dict(raw)

    # -- assembly -----------------------------------------------------------

    def build(self) -> Experiment:
        raw = self.raw
        params = dict(self.predictor_params)
        if "instance" in raw:
            inst = raw["instance"]
            name = inst["name"]
            if name == "lower-bound":
                h, k, a = build_lower_bound_instance(int(inst["tau"]), float(inst["gamma_H"]), self.T)
            else:
                builder = build_soft_gap_instance if name == "soft-gap" else build_tsybakov_instance
                h, k, a, C = builder(self.T, float(inst["alpha"]), float(inst.get("A", 1.0)), self.delta)
                if self.predictor == "pairwise-meta":
                    params.setdefault("C", C)
                    if name == "tsybakov":
                        params.setdefault("tester", "empirical-mean")
            return Experiment(h, k, self.predictor, a, self.T, params, self.delta)
        h = build_class(raw["hypothesis_class"])
        k = build_kernel(raw["kernel"], h.F, self.T)
        a = build_adversary(raw.get("adversary", {}), h, self.T, raw["hypothesis_class"]["type"])
        return Experiment(h, k, self.predictor, a, self.T, params, self.delta)


def build_class(d) -> HypothesisClass:
    t = d["type"]
    p = "hypothesis_class"
    if t == "random":
        return HypothesisClass.random(_num(d, p, "K", kind=int, lo=1), _num(d, p, "F", kind=int, lo=1),
                                      _num(d, p, "N", 2, int, lo=2), _num(d, p, "seed", 0, int))
    if t == "cube":
        return HypothesisClass.cube(_num(d, p, "tau", kind=int, lo=1, hi=16))
    if t == "constant":
        return HypothesisClass.constant(_num(d, p, "F", 1, int, lo=1), _num(d, p, "N", 2, int, lo=2))
    try:
        labels = np.asarray(d["labels"], dtype=np.int64)
        return HypothesisClass.explicit(labels, d.get("N"))
    except (KeyError, ValueError, TypeError) as err:
        raise ConfigError(f"{p}.labels: {err}") from None


def build_kernel(d, F: int, T: int):
    name = d["name"]
    p = "kernel"
    try:
        if name == "massart":
            return MassartBernoulli(_num(d, p, "eta", lo=0.0, hi=0.5, hi_open=True))
        if name == "randomized-response":
            return RandomizedResponse(_num(d, p, "eta", lo=0.0, hi=1.0, hi_open=True), _num(d, p, "M", 2, int, lo=2))
        if name == "tv-ball":
            return TVBall(d["canonical"], _num(d, p, "eps", lo=0.0))
        if name == "tsybakov":
            if "lambdas" in d:
                return Tsybakov(tuple(d["lambdas"]), _num(d, p, "A", 1.0, lo=0.0, lo_open=True),
                                _num(d, p, "alpha", 0.5, lo=0.0, hi=1.0, hi_open=True))
            return Tsybakov.worst_case(T, _num(d, p, "alpha", lo=0.0, hi=1.0, lo_open=True, hi_open=True),
                                       _num(d, p, "A", 1.0, lo=0.0, lo_open=True))
        if "table" in d:
            return SingletonKernel(np.asarray(d["table"], dtype=np.float64))
        g = _num(d, p, "gamma_H", lo=0.0, hi=2.0, lo_open=True)
        return SingletonKernel(_bern_pair_table(np.full(F, bernoulli_eps_for_hellinger(g))))
    except KeyError as err:
        raise ConfigError(f"{p}.{err.args[0]}: required") from None
    except (ValueError, TypeError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"{p}: {err}") from None


def build_adversary(d, h: HypothesisClass, T: int, class_type: str) -> AdversaryStrategy:
    p = "adversary.features"
    fd = d.get("features")
    if fd is None:
        fd = {"rule": "epoch"} if class_type == "cube" else {"rule": "max-disagreement"}
    rule = fd["rule"]
    if rule == "max-disagreement":
        fr = MaxDisagreement(_num(fd, p, "patience", 32, int, lo=1))
    elif rule == "fixed":
        seq = fd.get("sequence")
        if not isinstance(seq, list) or not seq or any(not isinstance(v, int) or not 0 <= v < h.F for v in seq):
            raise ConfigError(f"{p}.sequence: need a nonempty list of feature indices in [0, {h.F})")
        fr = FixedSequence(tuple(seq))
    elif rule == "epoch":
        feats = tuple(fd.get("features", range(h.F)))
        fr = EpochConstant(feats, _num(fd, p, "epoch_len", max(1, math.ceil(T / len(feats))), int, lo=1))
    else:
        fr = UniformFeatures()
    gt = d.get("ground_truth", "random")
    if gt != "random" and not (isinstance(gt, int) and 0 <= gt < h.K):
        raise ConfigError(f"adversary.ground_truth: expected 'random' or an index in [0, {h.K})")
    try:
        return AdversaryStrategy(fr, d.get("noise", "worst"), gt)
    except ValueError as err:
        raise ConfigError(f"adversary.noise: {err}") from None


def config_from_dict(doc) -> ExperimentConfig:
    _section(doc, "")
    if "instance" in doc:
        for k in ("kernel", "hypothesis_class", "adversary"):
            if k in doc:
                raise ConfigError(f"{k}: not allowed together with instance")
        name = _named(doc["instance"], "instance", "name", INSTANCES)
        _section(doc["instance"], "instance", f"instance.{name}")
    else:
        for k in ("kernel", "hypothesis_class"):
            if k not in doc:
                raise ConfigError(f"{k}: required")
        kname = _named(doc["kernel"], "kernel", "name", KERNELS)
        _section(doc["kernel"], "kernel", f"kernel.{kname}")
        ctype = _named(doc["hypothesis_class"], "hypothesis_class", "type", CLASSES)
        _section(doc["hypothesis_class"], "hypothesis_class", f"hypothesis_class.{ctype}")
        if "adversary" in doc:
            adv = _section(doc["adversary"], "adversary")
            if "features" in adv:
                rule = _named(adv["features"], "adversary.features", "rule", FEATURE_RULES)
                _section(adv["features"], "adversary.features", f"adversary.features.{rule}")
    pred = doc.get("predictor", {"name": "l2-reduction"})
    if isinstance(pred, str):
        pred = {"name": pred}
    pname = _named(pred, "predictor", "name", PREDICTORS)
    _section(pred, "predictor")
    if "pair" in doc:
        _section(doc["pair"], "pair")
    cfg = ExperimentConfig(
        raw=doc,
        T=_num(doc, "", "T", kind=int, lo=1),
        runs=_num(doc, "", "runs", 100, int, lo=1),
        delta=_num(doc, "", "delta", 0.05, lo=0.0, hi=1.0, lo_open=True, hi_open=True),
        seed0=_num(doc, "", "seed0", 0, int, lo=0),
        output=str(doc.get("output", "results/run")),
        predictor=pname,
        predictor_params={k: v for k, v in pred.items() if k != "name"},
    )
    if "sweep_T" in doc and (not isinstance(doc["sweep_T"], list) or not doc["sweep_T"]):
        raise ConfigError("sweep_T: expected a nonempty list of horizons")
    # resolve every name now so errors surface before any run starts
    try:
        cfg.build()
    except ConfigError:
        raise
    except (ValueError, IndexError, KeyError, TypeError) as err:
        raise ConfigError(f"invalid experiment: {err}") from None
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment document, applying defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"line {err.lineno}, column {err.colno}: {err.msg}") from None
    return config_from_dict(doc)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# commands


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed0 is not None:
        cfg.seed0 = args.seed0
    if args.out is not None:
        cfg.output = args.out
    return cfg


def _curve_point(x, summary):
    e = summary.cum_errors
    return (x, float(np.median(e)), order_statistic_quantile(e, 0.1), float(e.mean()))


def cmd_simulate(cfg: ExperimentConfig, jobs: int = 1, out=None) -> int:
    out = out or sys.stdout
    exp = cfg.build()
    t0 = time.perf_counter()
    s = monte_carlo(exp, cfg.runs, cfg.seed0, (cfg.delta,), jobs)
    rows = report.summary_rows(s, exp)
    path = report.write_text(f"{cfg.output}_summary.csv", report.format_summary(rows))
    ev = [e for e in s.events if e is not None]
    print(f"{exp.predictor} on {exp.kernel_name}: runs={s.runs} T={exp.T} mean={s.mean:.4g} "
          f"median={s.median:.4g} q(1-{cfg.delta:g})={s.quantile(cfg.delta):.4g}"
          + (f" event-held={np.mean(ev):.3f}" if ev else "")
          + f" [{time.perf_counter() - t0:.1f}s]", file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def _sweep_curve(cfg, axis, values, jobs):
    pts = []
    for v in values:
        c = cfg.with_value(axis, v)
        s = monte_carlo(c.build(), c.runs, c.seed0, (c.delta,), jobs)
        pts.append(_curve_point(v, s))
    return pts


def _emit_curve(prefix, axis, pts, out):
    csv_path = report.write_text(f"{prefix}_curve.csv", report.format_curve(pts))
    xs, med = [p[0] for p in pts], [p[1] for p in pts]
    svg_path = report.write_text(f"{prefix}_curve.svg", report.svg_line_chart(
        xs, med, loglog=axis == "T", title=f"median risk vs {axis}", xlabel=axis, ylabel="cumulative errors"))
    slope = loglog_slope(xs, med) if len(pts) > 1 else float("nan")
    for p in pts:
        print(f"  {axis}={p[0]:g} median={p[1]:g} q90={p[2]:g} mean={p[3]:.4g}", file=out)
    print(f"slope (log median vs log {axis}) = {slope:.4f}", file=out)
    print(f"wrote {csv_path} and {svg_path}", file=out)
    return slope


def cmd_sweep(cfg: ExperimentConfig, axis: str, values, jobs: int = 1, out=None) -> int:
    out = out or sys.stdout
    if axis not in AXES:
        raise ConfigError(f"--axis: unknown axis {axis!r}")
    if not values:
        raise ConfigError("--values: need at least one value")
    if axis == "alpha" and "sweep_T" in cfg.raw:
        # per-alpha scaling law in T
        for a in values:
            c = cfg.with_value("alpha", a)
            print(f"alpha={a:g}", file=out)
            pts = _sweep_curve(c, "T", cfg.raw["sweep_T"], jobs)
            _emit_curve(f"{cfg.output}_alpha{a:g}", "T", pts, out)
        return EXIT_OK
    pts = _sweep_curve(cfg, axis, values, jobs)
    _emit_curve(cfg.output, axis, pts, out)
    return EXIT_OK


def cmd_verify(suite: str, out=None) -> int:
    out = out or sys.stdout
    names = SUITES if suite == "all" else (suite,)
    t0 = time.perf_counter()
    reports = run_suites(names)
    for r in reports:
        print(r.line(), file=out)
    bad = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(bad)}/{len(reports)} checks passed in {time.perf_counter() - t0:.2f}s", file=out)
    for r in bad:
        print(f"FAILED: {r.name}", file=out)
    return EXIT_PROPERTY if bad else EXIT_OK


def cmd_gap(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    exp = cfg.build()
    k = exp.kernel
    feats = range(exp.hclass.F if k.F is None else min(k.F, exp.hclass.F))
    for d in (DivergenceKind.L2SQ, DivergenceKind.HELLINGER_SQ, DivergenceKind.TV):
        r = min_pairwise_gap(k, feats, d)
        p, q = (np.round(np.asarray(v), 6).tolist() for v in r.argmin_pair)
        print(f"{d.value}: gap={r.value:.10g} witness={r.witness} pair={p} vs {q}", file=out)
    return EXIT_OK


def cmd_test_pair(cfg: ExperimentConfig, seed: int, out=None) -> int:
    """Run one pairwise tester between two labels' kernel sets until it decides."""
    out = out or sys.stdout
    exp = cfg.build()
    d = cfg.raw.get("pair", {})
    k = exp.kernel
    x = _num(d, "pair", "feature", 0, int, lo=0)
    y0, y1 = d.get("labels", [0, 1])
    truth = _num(d, "pair", "truth", 0, int, lo=0, hi=1)
    delta = _num(d, "pair", "delta", cfg.delta, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    kind = d.get("tester", "lecam-birge")
    noise = d.get("noise", "worst")
    t_fixed = d.get("step", 0) if k.step_dependent else None
    s0, s1 = k.kernel_set(x, y0, t_fixed), k.kernel_set(x, y1, t_fixed)
    r = gap(s0, s1, DivergenceKind.HELLINGER_SQ)
    rng = np.random.default_rng(seed)
    true_set, law = (s0, r.argmin_pair[0]) if truth == 0 else (s1, r.argmin_pair[1])
    if kind == "lecam-birge":
        n = budget([r.value] * 1_000_000, delta)
        tester = PairTester.lecam_birge(budget=n)
    elif kind == "empirical-mean":
        n = _num(d, "pair", "steps", 100, int, lo=1)
        tester = PairTester.empirical_mean()
    else:
        raise ConfigError(f"pair.tester: unknown tester {kind!r}")
    for t in range(n):
        q = law if noise == "worst" else sample_from(true_set, UniformMixture(), rng)
        obs = int(rng.choice(k.M, p=np.asarray(q)))
        if kind == "lecam-birge":
            tester = lecam_birge_step(tester, r.argmin_pair[0], r.argmin_pair[1], obs)
        else:
            tester = empirical_mean_step(tester, int(obs == y1))
    decision = tester.prediction - 1
    print(f"{kind}: gamma_H={r.value:.6g} steps={n} decision=h{decision + 1} "
          f"truth=h{truth + 1} {'correct' if decision == truth else 'wrong'}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _values(text: str):
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {tok!r}") from None
        vals.append(int(v) if v.is_integer() else v)
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robust-online", description="Online classification under adversarial label noise.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON experiment file")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for Monte Carlo runs")
        sp.add_argument("--seed0", type=int, default=None, help="base seed (overrides the config)")
        sp.add_argument("--out", default=None, help="output path prefix (overrides the config)")

    common(sub.add_parser("simulate", help="run the Monte Carlo experiment in a config"))
    v = sub.add_parser("verify", help="run deterministic property suites")
    v.add_argument("suite", choices=SUITES + ("all",))
    s = sub.add_parser("sweep", help="Monte Carlo over one parameter axis")
    common(s)
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--values", required=True, type=_values, help="comma-separated values")
    common(sub.add_parser("gap", help="print the minimal pairwise gaps of a kernel"))
    common(sub.add_parser("test-pair", help="run one pairwise tester to decision"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.suite)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.jobs)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, args.values, args.jobs)
        if args.command == "gap":
            return cmd_gap(cfg)
        return cmd_test_pair(cfg, cfg.seed0)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as err:  # noqa: BLE001 - any run failure maps to the runtime exit code
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
