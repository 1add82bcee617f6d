"""Registered experiments: each writes counts CSV, estimates JSON and gnuplot scripts."""

from __future__ import annotations

import configparser
import json
import math
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .constructions import (BlockSpec, build_max_mdim_map, cylinder_points, predicted_mdim,
                            symbolic_separated_count)
from .covercount import (AVERAGE, BOWEN, CountCurve, CountEntry, bernoulli_cylinder_cover,
                         cylinder_cover_exact, greedy_measure_cover, greedy_separated,
                         min_cylinder_cover, shift_cover_upper)
from .dynsys import (ProductMeasure, bernoulli_atoms, cantor_points, discrete_base,
                     finite_base, identity_map, interval_base, interval_grid,
                     make_shift_system, sample_space)
from .errors import BudgetExceeded, ConfigError
from .estimators import (EstimateReport, box_dimension, digest, growth_rate, mdim_estimate,
                         windowed_fit)
from .infotheory import block_rate_distortion, sandwich_check, shannon_entropy

# ------------------------------------------------------------------ config


def _floats(v) -> list[float]:
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, str):
        return [float(x) for x in v.replace(" ", "").split(",") if x]
    return [float(x) for x in v]


def _ints(v) -> list[int]:
    out = [float(x) for x in _floats(v)]
    if any(x != int(x) for x in out):
        raise ConfigError(f"expected integers, got {v!r}")
    return [int(x) for x in out]


@dataclass
class ExperimentConfig:
    """Experiment name, seed, thread cap and experiment-specific parameters."""

    experiment: str
    out: Path = Path("out")
    seed: int = 0
    threads: int | None = None
    bits: bool = False
    params: dict = field(default_factory=dict)

    def get(self, key: str, default, conv: Callable = lambda v: v):
        try:
            return conv(self.params[key]) if key in self.params else default
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {self.params[key]!r}") from exc

    def digest(self) -> str:
        return digest({"experiment": self.experiment, "seed": self.seed,
                       "params": {k: str(v) for k, v in sorted(self.params.items())}})


def read_config(path) -> ExperimentConfig:
    """Parse an INI file with an ``[experiment]`` section (see the README)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if not cp.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config {path}")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "experiment" not in cp:
        raise ConfigError("config needs an [experiment] section")
    sec = dict(cp["experiment"])
    name = sec.pop("name", None)
    if not name:
        raise ConfigError("config needs 'name'")
    cfg = ExperimentConfig(name.strip())
    if "out" in sec:
        cfg.out = Path(sec.pop("out"))
    if "seed" in sec:
        cfg.seed = _ints(sec.pop("seed"))[0]
    if "threads" in sec:
        cfg.threads = _ints(sec.pop("threads"))[0]
    if "bits" in sec:
        cfg.bits = sec.pop("bits").strip().lower() in ("1", "true", "yes", "on")
    cfg.params = {k.replace("-", "_"): v for k, v in sec.items()}
    return cfg


# ----------------------------------------------------------------- outputs


class Outputs:
    """Collects the artifacts of one run under the output directory."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return self.root / name

    def counts(self, name: str, curve: CountCurve, title: str) -> None:
        curve.to_csv(self._path(name))
        self.plot(name, title, "n", "log count", "1:(log($5))")

    def csv(self, name: str, header: list[str], rows: list[list]) -> None:
        with open(self._path(name), "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_cell(v) for v in r) + "\n")

    def json(self, name: str, payload: dict) -> None:
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def plot(self, csv_name: str, title: str, xlabel: str, ylabel: str, using: str) -> None:
        stem = csv_name.rsplit(".", 1)[0]
        lines = ["set datafile separator ','", f"set title '{title}'",
                 f"set xlabel '{xlabel}'", f"set ylabel '{ylabel}'",
                 "set terminal pngcairo size 800,560", f"set output '{stem}.png'",
                 f"plot '{csv_name}' skip 1 using {using} with linespoints notitle"]
        with open(self._path(stem + ".gp"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass
class RunManifest:
    config_digest: str
    files: list[str]
    wall_clock: float
    version: str
    experiment: str
    summary: dict

    def to_dict(self) -> dict:
        return {"config_digest": self.config_digest, "files": self.files,
                "wall_clock_s": self.wall_clock, "version": self.version,
                "experiment": self.experiment, "summary": self.summary}


# ------------------------------------------------------------- experiments


def _mu_k_counts(k: int, ns, delta: float, budget: int, threads) -> CountCurve:
    """Cover counts of the uniform grid product measure at radius ``1/(3k)``."""
    r = 1.0 / (3 * k)
    grid = interval_grid(k)
    mu = ProductMeasure((grid, np.full(k, 1.0 / k)), 0, budget=budget)
    curve = CountCurve()
    for n in ns:
        sys = make_shift_system(interval_base(), 0, n)
        if k ** (n + 1) <= budget:
            res = greedy_measure_cover(mu.at(n), sys, n, r, delta, threads=threads)
            curve.add(CountEntry(n, r, res.count, "greedy", BOWEN, delta, res.covered_mass))
        else:
            # balls of radius < half the grid gap are cylinders: exact count
            curve.add(CountEntry(n, r, cylinder_cover_exact(k, n, r, delta), "exact", BOWEN,
                                 delta, None))
    return curve


def run_prop_3_4(cfg: ExperimentConfig, out: Outputs) -> dict:
    ks = cfg.get("k", [2, 4, 8, 16], _ints)
    deltas = sorted(set(cfg.get("delta", [0.1], _floats)))
    n_max = cfg.get("n_max", 8, lambda v: _ints(v)[0])
    budget = cfg.get("budget", 50_000, lambda v: _ints(v)[0])
    if len(ks) < 3 or min(ks) < 2:
        raise ConfigError("need at least three k values, all >= 2")
    ns = range(1, n_max + 1)
    curve, per_k = CountCurve(), []
    hs = np.zeros((len(deltas), len(ks)))
    radii = [1.0 / (3 * k) for k in sorted(ks)]
    for j, k in enumerate(sorted(ks)):
        for i, delta in enumerate(deltas):
            c = _mu_k_counts(k, ns, delta, budget, cfg.threads)
            curve.extend(c)
            hs[i, j] = growth_rate(c, "upper", 3, "h_mu").slope
        per_k.append({"k": k, "r": radii[j], "h": hs[0, j],
                      "ratio": hs[0, j] / abs(math.log(radii[j])),
                      "analytic": math.log(k) / math.log(3 * k)})
    # smallest delta plays the role of the outer limit; the sup is taken before the fit
    est = mdim_estimate(list(zip(radii, hs[0])), "upper", 3)
    est = EstimateReport(est.slope, est.intercept, est.rms_residual, est.window, est.mode,
                         "mdim_lower", est.inputs_digest)
    sup_inside = mdim_estimate(list(zip(radii, hs.max(axis=0))), "upper", 3).slope
    per_delta = [{"delta": d, "slope": mdim_estimate(list(zip(radii, h)), "upper", 3).slope}
                 for d, h in zip(deltas, hs)]
    out.counts("counts.csv", curve, "grid product measure covers")
    out.json("mdim_lower.json", {**est.to_dict(), "delta": deltas[0], "per_k": per_k,
                                 "per_delta": per_delta, "limit_outside": est.slope,
                                 "sup_inside": sup_inside})
    out.csv("ratios.csv", ["k", "ratio", "analytic"],
            [[p["k"], p["ratio"], p["analytic"]] for p in per_k])
    out.plot("ratios.csv", "entropy ratio per k", "k", "ratio", "1:2")
    return {"mdim_lower": est.slope, "sup_inside": sup_inside}


def _alphabet(name: str):
    if name == "four":
        return np.array([0.0, 1 / 3, 2 / 3, 1.0]), 2.0 ** -np.arange(2, 11), 0.0
    if name == "grid":
        return interval_grid(2 ** 14), 2.0 ** -np.arange(2, 11), 1.0
    if name == "cantor":
        return cantor_points(10), 3.0 ** -np.arange(2, 9), math.log(2) / math.log(3)
    raise ConfigError(f"unknown alphabet {name!r} (four, grid, cantor)")


def run_thm_3_5(cfg: ExperimentConfig, out: Outputs) -> dict:
    """Shift over a finite alphabet ``Y``: mdim against the box dimension of ``Y``."""
    names = cfg.get("alphabet", ["four", "grid", "cantor"],
                    lambda v: [s.strip() for s in v.split(",")] if isinstance(v, str) else list(v))
    delta = cfg.get("delta", 0.1, lambda v: _floats(v)[0])
    n_max = cfg.get("n_max", 8, lambda v: _ints(v)[0])
    budget = cfg.get("budget", 20_000, lambda v: _ints(v)[0])
    ns = range(1, n_max + 1)
    ident = identity_map()
    summary = {}
    for name in names:
        y, ladder, target = _alphabet(name)
        curve = CountCurve()
        box = box_dimension(y, ladder)
        lower_rows, upper_x, upper_y, checks = [], [], [], []
        for eps in ladder:
            m, wit = greedy_separated(y, ident, 1, float(eps))
            r = float(eps) / 3
            mu = ProductMeasure((np.sort(wit), np.full(m, 1.0 / m)), 0, budget=budget)
            c = CountCurve()
            for n in ns:
                if m ** (n + 1) <= budget:
                    sys = make_shift_system(finite_base(np.sort(wit)), 0, n)
                    res = greedy_measure_cover(mu.at(n), sys, n, r, delta, threads=cfg.threads)
                    c.add(CountEntry(n, r, res.count, "greedy", BOWEN, delta, res.covered_mass))
                else:
                    # witnesses are > eps = 3r apart, so r-balls are single cylinders
                    c.add(CountEntry(n, r, min_cylinder_cover(m ** n, delta), "exact", BOWEN,
                                     delta, None))
            curve.extend(c)
            lower_rows.append((r, growth_rate(c, "upper", 3, "h_mu")))
            upper_x.append(abs(math.log(eps)))
            upper_y.append(math.log(m))
        lower = mdim_estimate(lower_rows, "upper", 3)
        upper = windowed_fit(upper_x, upper_y, "upper", 3, "mdim_upper")
        # separated window counts against the exact covering bound M(eps/2)^(n+1)
        for eps in ladder[:3]:
            half, _ = greedy_separated(y, ident, 1, float(eps) / 2)
            for n in (1, 2):
                sys = make_shift_system(finite_base(np.unique(y)), 0, n)
                total = np.unique(y).size ** (n + 1)
                sample = sample_space(sys, min(2000, total), cfg.seed, base_grid=np.unique(y))
                cnt, _ = greedy_separated(sample, sys, n, float(eps), threads=cfg.threads)
                bound = shift_cover_upper(half, n, 0)
                checks.append({"eps": float(eps), "n": n, "separated": cnt, "bound": bound,
                               "ok": cnt <= bound})
        out.counts(f"counts_{name}.csv", curve, f"{name} alphabet shift covers")
        summary[name] = {"target": target, "box_dim": box.to_dict(),
                         "mdim_lower": lower.to_dict(), "mdim_upper": upper.to_dict(),
                         "upper_checks": checks}
    out.json("estimates.json", summary)
    return {k: {"dim_target": v["target"], "lower": v["mdim_lower"]["slope"],
                "upper": v["mdim_upper"]["slope"], "box": v["box_dim"]["slope"]}
            for k, v in summary.items()}


def run_lemma_3_1(cfg: ExperimentConfig, out: Outputs) -> dict:
    """Measure entropies against ``S(2 eps) - 3 delta S(eps)`` on a grid shift."""
    m = cfg.get("grid", 8, lambda v: _ints(v)[0])
    delta = cfg.get("delta", 0.1, lambda v: _floats(v)[0])
    eps_list = cfg.get("eps", [0.3, 0.2, 0.1, 0.05], _floats)
    n_max = cfg.get("n_max", 3, lambda v: _ints(v)[0])
    tol = cfg.get("tolerance", 0.1, lambda v: _floats(v)[0])
    g = interval_grid(m)
    ns = list(range(1, n_max + 1))
    sep_curve, cov_curve = CountCurve(), CountCurve()
    ident = identity_map()

    def S(eps):
        c = CountCurve()
        for n in ns:
            sys = make_shift_system(finite_base(g), 0, n)
            windows = sample_space(sys, m ** (n + 1), cfg.seed)
            cnt, _ = greedy_separated(windows, sys, n, eps, threads=cfg.threads)
            c.add(CountEntry(n, eps, cnt, "greedy", BOWEN, None, None))
        for e in c:
            if (e.n, e.eps) not in {(x.n, x.eps) for x in sep_curve}:
                sep_curve.add(e)
        return growth_rate(c, "upper", None, "S").slope

    rows = []
    for eps in eps_list:
        s_eps, s_2eps = S(eps), S(2 * eps)
        best, best_name = -math.inf, ""
        for tag, sub in (("all", g), ("sep2eps", np.sort(greedy_separated(g, ident, 1, 2 * eps)[1]))):
            mu = ProductMeasure((sub, np.full(sub.size, 1.0 / sub.size)), 0)
            c = CountCurve()
            for n in ns:
                sys = make_shift_system(finite_base(g), 0, n)
                res = greedy_measure_cover(mu.at(n), sys, n, eps, delta, threads=cfg.threads)
                c.add(CountEntry(n, eps, res.count, "greedy", BOWEN, delta, res.covered_mass))
            h = growth_rate(c, "upper", None, "h_mu").slope
            if h > best:
                best, best_name, best_curve = h, tag, c
        for e in best_curve:
            cov_curve.add(e)
        bound = s_2eps - 3 * delta * s_eps
        rows.append([eps, best, best_name, s_eps, s_2eps, bound, best - bound, best >= bound - tol])
    out.counts("separated.csv", sep_curve, "grid shift separated counts")
    out.counts("covers.csv", cov_curve, "best measure covers")
    out.csv("gap.csv", ["eps", "sup_h", "measure", "S_eps", "S_2eps", "bound", "margin", "ok"], rows)
    out.plot("gap.csv", "measure entropy vs bound", "eps", "nats", "1:7")
    out.json("estimates.json", {"delta": delta, "tolerance": tol,
                                "rows": [dict(zip(["eps", "sup_h", "measure", "S_eps", "S_2eps",
                                                   "bound", "margin", "ok"], r)) for r in rows]})
    return {"min_margin": min(r[6] for r in rows), "all_ok": all(r[7] for r in rows)}


def run_thm_4_7(cfg: ExperimentConfig, out: Outputs) -> dict:
    eps = cfg.get("eps", 0.1, lambda v: _floats(v)[0])
    L = cfg.get("L", 2, lambda v: _ints(v)[0])
    p = cfg.get("p", 0.5, lambda v: _floats(v)[0])
    n_max = cfg.get("n_max", 10, lambda v: _ints(v)[0])
    sys = make_shift_system(discrete_base(2), 0, n_max)
    mu = ProductMeasure(bernoulli_atoms(p), 0)
    rep = sandwich_check(sys, mu, eps, L, range(1, n_max + 1), threads=cfg.threads)
    from .estimators import cover_counts
    curve = CountCurve()
    curve.extend(cover_counts(sys, mu, 4 * L * eps, 1.0 / L, range(1, n_max + 1), AVERAGE,
                              threads=cfg.threads))
    curve.extend(cover_counts(sys, mu, eps, eps / (2 * sys.diameter), range(1, n_max + 1),
                              AVERAGE, threads=cfg.threads))
    out.counts("counts.csv", curve, "average-ball covers")
    out.csv("rate_by_n.csv", ["n", "rate_nats"], [[n, r] for n, r in rep.rate_by_n.items()])
    out.plot("rate_by_n.csv", "block rate by n", "n", "nats", "1:2")
    out.json("sandwich.json", rep.to_dict())
    return {"lower_margin": rep.lower_margin, "upper_margin": rep.upper_margin,
            "flagged": rep.flagged}


def run_prop_5_3(cfg: ExperimentConfig, out: Outputs) -> dict:
    K = cfg.get("K", 6, lambda v: _ints(v)[0])
    k = cfg.get("k", 3, lambda v: _ints(v)[0])
    n_max = cfg.get("n_max", 3, lambda v: _ints(v)[0])
    grid_bits = cfg.get("grid_bits", 18, lambda v: _ints(v)[0])
    spec = BlockSpec.inverse_square(K)
    if not 1 <= k <= K:
        raise ConfigError("measured block k must lie in 1..K")
    f, sys = build_max_mdim_map(spec)
    pieces = f.pieces()
    a = f.blocks()
    continuous = bool(np.all(f(f.breakpoints) == f.values))
    surjective = all(
        bool(np.all(np.isin(f.block_pieces(j)[:, 2:], [a[j - 1], a[j]])) and
             np.all(f.block_pieces(j)[:, 2] != f.block_pieces(j)[:, 3]))
        for j in range(1, K + 1))
    lo, hi = a[k - 1], a[k]
    l = spec.laps(k)
    eps = (hi - lo) / (2 * l + 1)
    grid = lo + (np.arange(2 ** grid_bits) + 0.5) / 2 ** grid_bits * (hi - lo)
    curve, rows = CountCurve(), []
    for n in range(1, n_max + 1):
        cnt, _ = greedy_separated(grid, sys, n, eps, threads=cfg.threads)
        cyl = cylinder_points(f, k, n) if (l + 1) ** n <= 200_000 else None
        cyl_cnt = greedy_separated(cyl, sys, n, eps)[0] if cyl is not None else None
        curve.add(CountEntry(n, eps, cnt, "greedy", BOWEN, None, None))
        rows.append([n, cnt, symbolic_separated_count(f, k, n),
                     "" if cyl_cnt is None else cyl_cnt])
    growth = growth_rate(curve, "upper", None, "S")
    pred = predicted_mdim(spec)
    f.to_csv(out._path("map.csv"))
    out.plot("map.csv", "interval map", "x", "f(x)", "1:2")
    out.counts("counts.csv", curve, f"separated counts on block {k}")
    out.csv("symbolic.csv", ["n", "greedy", "symbolic", "cylinder_points"], rows)
    out.csv("predicted_mdim.csv", ["k", "value"], [[kk, v] for kk, v in pred.rows])
    out.plot("predicted_mdim.csv", "predicted ratio per block", "k", "ratio", "1:2")
    payload = {"growth": growth.to_dict(), "threshold": 0.9 * math.log(l + 1), "block": k,
               "eps": eps, "laps": l, "continuous": continuous, "surjective": surjective,
               "pieces": int(len(pieces)), "predicted_increasing": pred.increasing,
               "predicted": pred.rows}
    out.json("estimates.json", payload)
    return {"growth": growth.slope, "threshold": payload["threshold"],
            "continuous": continuous, "surjective": surjective,
            "predicted_increasing": pred.increasing}


def run_katok(cfg: ExperimentConfig, out: Outputs) -> dict:
    p = cfg.get("p", 0.5, lambda v: _floats(v)[0])
    eps = cfg.get("eps", 0.4, lambda v: _floats(v)[0])
    delta = cfg.get("delta", 0.1, lambda v: _floats(v)[0])
    n_max = cfg.get("n_max", 12, lambda v: _ints(v)[0])
    if not 0 < p < 1:
        raise ConfigError("p must lie in (0, 1)")
    if 2 ** (n_max + 1) > 2_000_000:
        raise BudgetExceeded(f"n_max={n_max} needs 2^{n_max + 1} windows")
    sys = make_shift_system(discrete_base(2), 0, n_max)
    mu = ProductMeasure(bernoulli_atoms(p), 0)
    from .estimators import cover_counts
    ns = range(1, n_max + 1)
    curve = cover_counts(sys, mu, eps, delta, ns, BOWEN, threads=cfg.threads)
    est = growth_rate(curve, "upper", None, "h_mu")
    oracle = [bernoulli_cylinder_cover(p, n, delta) for n in ns]
    target = shannon_entropy([p, 1 - p])
    out.counts("counts.csv", curve, "Bernoulli covers")
    out.csv("oracle.csv", ["n", "greedy", "sorted_cylinders"],
            [[e.n, e.count, o] for e, o in zip(curve, oracle)])
    out.json("estimates.json", {**est.to_dict(), "target": target,
                                "relative_error": abs(est.slope - target) / target,
                                "p": p, "eps": eps, "delta": delta,
                                "matches_oracle": [e.count for e in curve] == oracle})
    return {"h_mu": est.slope, "target": target}


def run_rd_limit(cfg: ExperimentConfig, out: Outputs) -> dict:
    p = cfg.get("p", 0.5, lambda v: _floats(v)[0])
    n = cfg.get("n", 6, lambda v: _ints(v)[0])
    eps_list = cfg.get("eps", [0.4, 0.2, 0.1, 0.05], _floats)
    sys = make_shift_system(discrete_base(2), 0, n)
    mu = ProductMeasure(bernoulli_atoms(p), 0)
    curve = block_rate_distortion(mu, sys, n, eps_list, threads=cfg.threads)
    curve.to_csv(out._path("rd.csv"))
    out.plot("rd.csv", "block rate distortion", "eps", "nats", "2:3")
    h = shannon_entropy([p, 1 - p])
    rates = [pt.rate for pt in sorted(curve, key=lambda q: -q.eps)]
    out.json("estimates.json", {"h_mu": h, "n": n,
                                "points": [{"eps": pt.eps, "rate": pt.rate, "gap": h - pt.rate}
                                           for pt in curve],
                                "increasing_as_eps_decreases":
                                    all(b > a for a, b in zip(rates, rates[1:])),
                                "final_gap": h - rates[-1]})
    return {"final_gap": h - rates[-1]}


@dataclass(frozen=True)
class Experiment:
    name: str
    anchor: str
    description: str
    run: Callable[[ExperimentConfig, Outputs], dict]


REGISTRY: dict[str, Experiment] = {e.name: e for e in [
    Experiment("prop-3.4", "shift over [0,1]: mean dimension 1",
               "grid product measures, exact cylinder counts, mdim lower bound", run_prop_3_4),
    Experiment("thm-3.5-cantor", "shift over Y: mdim equals upper box dim of Y",
               "four-point set, [0,1] grid and Cantor set alphabets", run_thm_3_5),
    Experiment("lemma-3.1-gap", "measure entropy vs S(2eps) - 3 delta S(eps)",
               "grid shift, sup over product measures", run_lemma_3_1),
    Experiment("thm-4.7-sandwich", "average-ball Katok legs around the rate",
               "Bernoulli 2-shift, legs at 4 L eps and eps", run_thm_4_7),
    Experiment("prop-5.3-interval", "continuous interval map with mdim 1",
               "sawtooth blocks, separated growth and predicted ratios", run_prop_5_3),
    Experiment("katok-bernoulli", "Katok entropy of a Bernoulli shift",
               "greedy covers vs sorted-cylinder oracle", run_katok),
    Experiment("thm-1.3-rd-limit", "rate distortion tends to the entropy",
               "block rate at decreasing eps", run_rd_limit),
]}


def list_registry() -> list[dict]:
    return [{"name": e.name, "anchor": e.anchor, "description": e.description}
            for e in REGISTRY.values()]


class UnknownExperiment(ConfigError):
    pass


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Run a registered experiment; files are written only once it succeeds."""
    if cfg.experiment not in REGISTRY:
        raise UnknownExperiment(f"unknown experiment {cfg.experiment!r}; "
                                f"known: {', '.join(REGISTRY)}")
    exp = REGISTRY[cfg.experiment]
    start = time.perf_counter()
    out_dir = Path(cfg.out).resolve()
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir.parent, prefix=".mdimkit-") as tmp:
        out = Outputs(Path(tmp))
        summary = exp.run(cfg, out)
        out_dir.mkdir(exist_ok=True)
        for name in out.files:
            shutil.move(str(Path(tmp) / name), out_dir / name)
    manifest = RunManifest(cfg.digest(), sorted(out.files) + ["manifest.json"],
                           time.perf_counter() - start, __version__, exp.name, summary)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
