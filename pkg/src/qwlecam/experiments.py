"""Named batch experiments and their configuration.

Each experiment maps a validated configuration to a dictionary of output
files (name -> text). Writing is left to :func:`run`, which stages
everything in a temporary directory and renames it into place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distances as dist_mod
from .errors import CapExceeded, RangeError, UnsupportedBias
from .io import csv_text, dumps_json
from .langevin import (
    LangevinConfig,
    acceleration_comparison,
    diagnostics,
    integrate_overdamped,
    integrate_underdamped,
    observable_Xc,
    y_tv,
)
from .limitlaw import KonnoLaw, lattice_projection, regularize, tv_between_laws
from .oscillation import lower_bound_chain
from .params import WalkParams, build_params, hadamard, theta0
from .walk import DEFAULT_CAP, default_edges, evolve, randomize, smooth_cdf

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "load_config",
    "run",
    "run_experiment",
    "validate",
]


_NAMED_THETA = {"theta0": theta0, "hadamard": hadamard}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated batch configuration.

    Attributes
    ----------
    experiments : tuple of str
    theta : dict
        Six angles plus ``kappa_margin``.
    t : tuple of int
    eta : tuple of float
    epsilon : tuple of float
    langevin : dict
        Overrides for :class:`LangevinConfig` plus ``dynamics``,
        ``threshold``, ``horizon_time``, ``record_every``.
    seed : int
    output_dir : str
    plots : bool
        Emit a plot script next to every CSV.
    theta_grid : tuple of dict
        Extra parameter points for the deficiency LP.
    lp_bins : int
    """

    experiments: tuple
    theta: dict
    t: tuple = (1024,)
    eta: tuple = (0.02,)
    epsilon: tuple = (0.05,)
    langevin: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"
    plots: bool = True
    theta_grid: tuple = ()
    lp_bins: int = 32

    @property
    def params(self) -> WalkParams:
        return build_params(self.theta, self.theta["kappa_margin"])

    def to_dict(self) -> dict:
        return {
            "experiments": list(self.experiments),
            "theta": self.theta,
            "t": list(self.t),
            "eta": list(self.eta),
            "epsilon": list(self.epsilon),
            "langevin": self.langevin,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "plots": self.plots,
            "theta_grid": list(self.theta_grid),
            "lp_bins": self.lp_bins,
        }

    def fingerprint(self, experiment: str | None = None) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        if experiment is not None:
            d["experiments"] = [experiment]
        blob = json.dumps(d, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _theta_dict(obj) -> dict:
    if obj is None:
        obj = "theta0"
    if isinstance(obj, str):
        if obj not in _NAMED_THETA:
            raise ValueError(f"unknown named theta {obj!r}")
        return _NAMED_THETA[obj]().to_dict()
    if isinstance(obj, (list, tuple)):
        return build_params(obj).to_dict()
    p = build_params(obj, obj.get("kappa_margin", 0.05))
    return p.to_dict()


def config_from_dict(obj: dict) -> ExperimentConfig:
    """Parse and validate a configuration mapping.

    Raises
    ------
    RangeError, ValueError, KeyError
        Invalid fields; the message names the field.
    """
    exps = obj.get("experiments", obj.get("experiment"))
    if exps is None:
        raise KeyError("experiments")
    if isinstance(exps, str):
        exps = [exps]
    for e in exps:
        if e not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {e!r}")
    theta = _theta_dict(obj.get("theta"))
    ts = tuple(int(t) for t in obj.get("t", [1024]))
    for t in ts:
        if t < 1:
            raise RangeError("t", t, 1, DEFAULT_CAP)
    etas = tuple(float(v) for v in obj.get("eta", [0.02]))
    for v in etas:
        if not 0.0 < v < 1.0:
            raise RangeError("eta", v, 0.0, 1.0)
    epss = tuple(float(v) for v in obj.get("epsilon", [0.05]))
    for v in epss:
        if not 0.0 < v < 0.5:
            raise RangeError("epsilon", v, 0.0, 0.5)
    seed = int(obj.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise RangeError("seed", seed, 0, 2**64 - 1)
    grid = tuple(_theta_dict(g) for g in obj.get("theta_grid", []))
    lp_bins = int(obj.get("lp_bins", 32))
    if not 2 <= lp_bins <= dist_mod.LP_SIZE_CAP:
        raise RangeError("lp_bins", lp_bins, 2, dist_mod.LP_SIZE_CAP)
    lang = dict(obj.get("langevin", {}))
    cfg = ExperimentConfig(
        experiments=tuple(exps),
        theta=theta,
        t=ts,
        eta=etas,
        epsilon=epss,
        langevin=lang,
        seed=seed,
        output_dir=str(obj.get("output_dir", "out")),
        plots=bool(obj.get("plots", True)),
        theta_grid=grid,
        lp_bins=lp_bins,
    )
    _langevin_config(cfg, epss[0])
    return cfg


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


_LANGEVIN_EXTRA = ("dynamics", "threshold", "horizon_time", "record_every", "seeds")


def _langevin_config(cfg: ExperimentConfig, epsilon: float) -> LangevinConfig:
    kw = {k: v for k, v in cfg.langevin.items() if k not in _LANGEVIN_EXTRA}
    return LangevinConfig(epsilon=epsilon, params=cfg.params, seed=cfg.seed, **kw)


def _with_id(rows, fp: str, seed: int):
    for r in rows:
        yield (*r, fp, seed)


def _table(header, rows, fp, seed, meta=None) -> str:
    return csv_text(
        [*header, "fingerprint", "seed"],
        _with_id(rows, fp, seed),
        comment=json.dumps(meta, sort_keys=True) if meta else None,
    )


def _fine_edges(t: int, eta: float) -> np.ndarray:
    return default_edges(t, eta, min(eta / 4.0, 1.0 / (4.0 * t)))


def smoothed_tv(params: WalkParams, t: int, eta: float, target) -> float:
    """TV between the walk law at ``t`` smoothed by uniform ``(-eta, eta]``
    and a law with a ``cdf``, on the fine grid of cell width
    ``min(eta/4, 1/(4t))``."""
    d = evolve(params, t)
    edges = _fine_edges(t, eta)
    a = np.diff(smooth_cdf(d, eta)(edges))
    b = np.diff(target.cdf(edges))
    return float(0.5 * np.abs(a - b).sum())


def exp_walk_dist(cfg: ExperimentConfig, fp: str) -> dict:
    p = cfg.params
    out, summary = {}, []
    for t in cfg.t:
        d = evolve(p, t)
        out[f"walk_t{t}.csv"] = _table(
            ["k", "prob"], zip(d.sites, d.probs), fp, cfg.seed,
            {"t": t, "checksum": d.checksum(), "theta": p.to_dict()},
        )
        summary.append({"t": t, "mass": d.total_mass(), "mean_x": d.moment(1),
                        "second_moment_x": d.moment(2), "checksum": d.checksum()})
    out["walk_summary.json"] = dumps_json({"fingerprint": fp, "seed": cfg.seed, "rows": summary})
    return out


def exp_limit_check(cfg: ExperimentConfig, fp: str) -> dict:
    p = cfg.params
    law = KonnoLaw(p)
    rows = []
    for t in cfg.t:
        d = evolve(p, t)
        q_full = lattice_projection(law, t, "full")
        for eta in cfg.eta:
            r = randomize(d, eta)
            a, b = dist_mod.align(r, q_full)
            rows.append((t, eta, r.r, smoothed_tv(p, t, eta, law), dist_mod.tv(a, b)))
    ratios = {}
    for t in cfg.t:
        col = [row[3] for row in rows if row[0] == t]
        ratios[str(t)] = [col[i] / col[i + 1] for i in range(len(col) - 1)]
    return {
        "limit_check.csv": _table(
            ["t", "eta", "r", "tv_smoothed", "tv_randomized_lattice"], rows, fp, cfg.seed
        ),
        "limit_check.json": dumps_json(
            {"fingerprint": fp, "seed": cfg.seed, "ratios": ratios,
             "drift_sign": law.drift_sign}
        ),
    }


def exp_langevin_sample(cfg: ExperimentConfig, fp: str) -> dict:
    out = {}
    dyn = cfg.langevin.get("dynamics", "underdamped")
    for eps in cfg.epsilon:
        lc = _langevin_config(cfg, eps)
        ens = integrate_underdamped(lc) if dyn == "underdamped" else integrate_overdamped(lc)
        diag = diagnostics(ens)
        law = regularize(KonnoLaw(lc.params), eps)
        h = y_tv(ens.y.ravel(), law)
        inner = h.edges
        rows = zip(inner[:-1], inner[1:], h.counts, h.ref_mass)
        out[f"langevin_eps{eps:g}_hist.csv"] = _table(
            ["lo", "hi", "count", "ref_mass"], rows, fp, cfg.seed
        )
        t_obs = cfg.t[0]
        xc = observable_Xc(ens, t_obs) / t_obs
        diag["xc_abs_max"] = float(np.abs(xc).max())
        diag["fingerprint"] = fp
        diag["seed"] = cfg.seed
        out[f"langevin_eps{eps:g}.json"] = dumps_json(diag)
    return out


def exp_tv_curves(cfg: ExperimentConfig, fp: str) -> dict:
    p = cfg.params
    law = KonnoLaw(p)
    t = cfg.t[-1]
    rows = []
    u = law.abs_u11
    for eta in cfg.eta:
        tv_sq = smoothed_tv(p, t, eta, law)
        for eps in cfg.epsilon:
            reg = regularize(law, eps)
            rows.append((
                t, eta, eps, tv_sq,
                tv_between_laws(law, reg, -u, u),
                smoothed_tv(p, t, eta, reg),
                math.sqrt(eps) + math.sqrt(eta),
            ))
    return {
        "tv_curves.csv": _table(
            ["t", "eta", "epsilon", "tv_smoothed_vs_limit", "tv_limit_vs_regularized",
             "tv_smoothed_vs_regularized", "sqrt_eps_plus_sqrt_eta"],
            rows, fp, cfg.seed,
        )
    }


def exp_c0_estimate(cfg: ExperimentConfig, fp: str) -> dict:
    if abs(cfg.params.phi - math.pi / 4) > 1e-12:
        raise UnsupportedBias("c0-estimate needs the unbiased coin")
    out, rows = {}, []
    for t in cfg.t:
        rep = lower_bound_chain(max(t, 100))
        ch = rep.lower_bound_chain
        rows.append((t, rep.abs_H_integral, rep.f_weighted_integral, ch["abs_H_bound"],
                     ch["triangle_sum"], ch["explicit_constant"], ch["tv_plateau"],
                     ch["equidistribution_heuristic"], ch["node_count"]))
        body = json.loads(rep.to_json())
        body.update(fingerprint=fp, seed=cfg.seed)
        out[f"oscillation_t{t}.json"] = dumps_json(body)
    out["c0_estimate.csv"] = _table(
        ["t", "abs_H_integral", "f_weighted_integral", "abs_H_bound", "triangle_sum",
         "explicit_constant", "tv_plateau", "equidistribution_heuristic", "node_count"],
        rows, fp, cfg.seed,
    )
    return out


def _coarse(values_x, probs, bins):
    edges = np.linspace(-1.0 - 1e-12, 1.0 + 1e-12, bins + 1)
    idx = np.clip(np.searchsorted(edges, values_x, side="left") - 1, 0, bins - 1)
    m = np.bincount(idx, weights=probs, minlength=bins)
    return dist_mod.FiniteDist(np.arange(bins), m / m.sum())


def default_theta_grid(base: WalkParams, spread: float = 0.15) -> list:
    """Base point plus two perturbations of the rotation angle."""
    out = [base]
    for dv in (-spread, spread):
        d = base.to_dict()
        d["vartheta"] = base.vartheta + dv
        out.append(build_params(d, d["kappa_margin"]))
    return out


def pipeline_kernel(t: int, eta: float, sites) -> dist_mod.StochasticKernel:
    """Uniform ``(-eta, eta]`` spread onto a grid of width ``1/(4t)``
    followed by discretization back to the lattice cells."""
    edges = default_edges(t, eta, 1.0 / (4.0 * t))
    lo = int(np.ceil(edges[0] * t)) + 1
    hi = int(np.floor(edges[-1] * t)) - 1
    K = dist_mod.uniform_convolution_kernel(t, eta, sites, edges)
    D = dist_mod.discretization_kernel(t, edges, np.arange(lo - 1, hi + 2))
    return K.compose(D)


def exp_deficiency(cfg: ExperimentConfig, fp: str) -> dict:
    if cfg.theta_grid:
        grid = [cfg.params] + [build_params(g, g["kappa_margin"]) for g in cfg.theta_grid]
    else:
        grid = default_theta_grid(cfg.params)
    rows, lp_rows, out = [], [], {}
    for t in cfg.t:
        for eta in cfg.eta:
            for eps in cfg.epsilon:
                ps, qs = [], []
                for j, p in enumerate(grid):
                    raw = evolve(p, t)
                    d = randomize(raw, eta)
                    q = lattice_projection(regularize(KonnoLaw(p), eps), t, "full")
                    K = pipeline_kernel(t, eta, raw.sites)
                    up = dist_mod.deficiency_upper(raw, q, K)
                    a, b = dist_mod.align(d, q)
                    rows.append((t, eta, eps, j, up, dist_mod.tv(a, b)))
                    ps.append(_coarse(d.x, d.probs, cfg.lp_bins))
                    qs.append(_coarse(q.x, q.probs, cfg.lp_bins))
                fwd = dist_mod.deficiency_lp(ps, qs)
                bwd = dist_mod.deficiency_lp(qs, ps)
                lp_rows.append((t, eta, eps, len(grid), fwd.value, bwd.value,
                                max(fwd.value, bwd.value), fwd.gap, bwd.gap))
                kern = fwd.kernel
                out[f"lp_kernel_t{t}_eta{eta:g}_eps{eps:g}.csv"] = _table(
                    ["in", *(f"out_{s}" for s in kern.out_support)],
                    ([s, *row] for s, row in zip(kern.in_support, kern.dense())),
                    fp, cfg.seed, {"dual_value": fwd.dual_value, "gap": fwd.gap,
                                   "value": fwd.value},
                )
    out["deficiency_upper.csv"] = _table(
        ["t", "eta", "epsilon", "theta_index", "kernel_upper", "tv_randomized"],
        rows, fp, cfg.seed,
    )
    out["deficiency_lp.csv"] = _table(
        ["t", "eta", "epsilon", "grid_size", "forward", "backward", "distance", "gap_fwd",
         "gap_bwd"], lp_rows, fp, cfg.seed,
    )
    return out


def exp_speedup(cfg: ExperimentConfig, fp: str) -> dict:
    L = cfg.langevin
    seeds = L.get("seeds", [cfg.seed, cfg.seed + 1, cfg.seed + 2])
    rows = []
    for s in seeds:
        r = acceleration_comparison(
            cfg.params, epsilon=cfg.epsilon[0], h=L.get("h", 0.01),
            horizon_time=L.get("horizon_time", 30.0), record_every=L.get("record_every", 0.1),
            chains=L.get("chains", 20_000), seed=int(s),
            init_halfwidth=L.get("init_halfwidth", 10.0), threshold=L.get("threshold", 0.1),
        )
        rows.append((s, r["underdamped_time"], r["overdamped_time"],
                     r["underdamped_min_tv"], r["overdamped_min_tv"]))
    return {
        "speedup.csv": _table(
            ["run_seed", "underdamped_time", "overdamped_time", "underdamped_min_tv",
             "overdamped_min_tv"], rows, fp, cfg.seed,
        )
    }


EXPERIMENTS = {
    "walk-dist": exp_walk_dist,
    "limit-check": exp_limit_check,
    "langevin-sample": exp_langevin_sample,
    "tv-curves": exp_tv_curves,
    "c0-estimate": exp_c0_estimate,
    "deficiency": exp_deficiency,
    "speedup": exp_speedup,
}

DESCRIPTIONS = {
    "walk-dist": "exact walk distribution p(k, t) per t",
    "limit-check": "smoothed and randomized walk vs limit law, TV over eta and t",
    "langevin-sample": "Langevin stationarity diagnostics and observable law",
    "tv-curves": "TV sweeps over epsilon and eta",
    "c0-estimate": "oscillation functionals and TV plateau",
    "deficiency": "kernel upper bounds and exact LP deficiency on coarse bins",
    "speedup": "overdamped vs underdamped time to TV threshold",
}


_PLOT_TEMPLATE = '''"""Plot {name}. Requires matplotlib."""
import csv

import matplotlib.pyplot as plt

with open("{name}", newline="") as fh:
    lines = [ln for ln in fh if not ln.startswith("#")]
rows = list(csv.reader(lines))
header, data = rows[0], rows[1:]
x = [float(r[0]) for r in data]
for j in range(1, len(header) - 2):
    try:
        y = [float(r[j]) for r in data]
    except ValueError:
        continue
    plt.plot(x, y, label=header[j])
plt.xlabel(header[0])
plt.legend()
plt.savefig("{stem}.png", dpi=150)
'''


def run_experiment(cfg: ExperimentConfig, name: str) -> dict:
    fp = cfg.fingerprint(name)
    files = EXPERIMENTS[name](cfg, fp)
    if cfg.plots:
        for fname in list(files):
            if fname.endswith(".csv"):
                stem = fname[:-4]
                files[stem + ".plot.py"] = _PLOT_TEMPLATE.format(name=fname, stem=stem)
    single = config_dict_for(cfg, name)
    files["config.json"] = dumps_json(single)
    return files


def config_dict_for(cfg: ExperimentConfig, name: str) -> dict:
    d = cfg.to_dict()
    d["experiments"] = [name]
    d["fingerprint"] = cfg.fingerprint(name)
    return d


def _commit(out_dir: Path, name: str, fp: str, files: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    final = out_dir / f"{name}-{fp}"
    stage = Path(tempfile.mkdtemp(dir=out_dir, prefix=f".stage-{name}-"))
    try:
        for fname, text in files.items():
            with open(stage / fname, "w", newline="") as fh:
                fh.write(text)
        if final.exists():
            shutil.rmtree(final)
        os.replace(stage, final)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return final


def run(cfg: ExperimentConfig, out: str | None = None, threads: int = 1) -> list[Path]:
    """Run every configured experiment; returns the output directories.

    Each experiment's files are staged in a temporary directory and renamed
    to ``<out>/<experiment>-<fingerprint>`` only after all of them are
    written.
    """
    out_dir = Path(out or cfg.output_dir)

    def one(name):
        files = run_experiment(cfg, name)
        return _commit(out_dir, name, cfg.fingerprint(name), files)

    if threads <= 1 or len(cfg.experiments) == 1:
        return [one(n) for n in cfg.experiments]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(one, cfg.experiments))


def validate(obj: dict) -> dict:
    """Dry run: parse, validate and estimate cost without computing.

    Returns a report with ``ok``, ``errors`` (type, field, message),
    ``warnings``, ``op_count`` (sum of ``t^2`` over the t list) and
    ``langevin_samples``.
    """
    report = {"ok": True, "errors": [], "warnings": [], "op_count": 0, "langevin_samples": 0}
    ts = [int(t) for t in obj.get("t", [1024])] if isinstance(obj, dict) else []
    over = [t for t in ts if t > DEFAULT_CAP]
    if over:
        report["warnings"].append({
            "type": CapExceeded.__name__,
            "field": "t",
            "message": f"t values {over} exceed the evolution cap",
            "suggested_max": DEFAULT_CAP,
        })
        obj = dict(obj)
        obj["t"] = [t for t in ts if t <= DEFAULT_CAP] or [1]
    try:
        cfg = config_from_dict(obj)
    except RangeError as e:
        report["ok"] = False
        report["errors"].append({"type": "RangeError", "field": e.field, "message": str(e)})
        return report
    except (ValueError, KeyError, TypeError) as e:
        report["ok"] = False
        report["errors"].append({"type": type(e).__name__, "field": None, "message": str(e)})
        return report
    report["op_count"] = int(sum(t * t for t in ts))
    lc = _langevin_config(cfg, cfg.epsilon[0])
    if any(e in ("langevin-sample",) for e in cfg.experiments):
        report["langevin_samples"] = lc.chains * lc.retained * len(cfg.epsilon)
    report["fingerprints"] = {e: cfg.fingerprint(e) for e in cfg.experiments}
    return report

