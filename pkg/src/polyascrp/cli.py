"""Batch experiment runner.

Every subcommand writes its CSV artifacts plus ``manifest.json`` into
``--out``.  The manifest holds the resolved configuration (defaults
included), package versions and the TestReports; it contains nothing
that depends on wall-clock time, the output path or the worker count, so
a fixed seed yields byte-identical files.

Configuration precedence: built-in defaults < ``--config`` JSON file <
command-line flags.  Replicate ``i`` of an experiment draws from
``RngStream(derive_seed(seed, <subcommand>), i)``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import scipy
from scipy import stats

from . import __version__
from . import crp_bridge as crp
from . import hydro_fluct as hf
from . import mprw
from .measure_core import BaseMeasure, Window, count, write_configuration_csv
from .rand_kit import NegativeBinomial, RngStream, derive_seed, poisson_pmf
from .replicates import run_replicates
from .scrp import arrival_law, sample_arrivals_stick, sample_path
from .stats_harness import (
    ALPHA,
    TestReport,
    chi_square_gof,
    exact_check,
    histogram,
    independence_test,
    ks_test,
    mean_check,
)

MANIFEST = "manifest.json"

# per-subcommand defaults; anything left unset here falls back to ExperimentConfig
DEFAULTS: dict[str, dict] = {
    "simulate-path": {"rho": [2.0], "grid": [0.2, 0.4, 0.6], "reps": 10_000},
    "arrivals": {"rho": [0.5, 1.0, 3.0], "jmax": 5, "reps": 10_000},
    "crp": {"rho": [1.0], "n": 4, "reps": 10_000},
    "mprw": {"rho": [2.0], "t": [0.5], "jmax": 60, "reps": 10_000},
    "hydro": {"t_end": 0.9, "jmax": 60, "step": 1e-4},
    "fluct": {"rho": [1e2, 1e3, 1e4], "t": [0.3, 0.6], "jmax": 3, "reps": 20_000},
    "verify": {},
}


@dataclass
class ExperimentConfig:
    experiment: str
    rho: list[float] = field(default_factory=lambda: [1.0])
    windows: dict[str, float] | None = None
    grid: list[float] | None = None
    t: list[float] = field(default_factory=lambda: [0.5])
    t_end: float = 0.9
    jmax: int = 10
    step: float = 1e-4
    reps: int = 1000
    n: int = 4
    lln_reps: int = 100
    g: list[float] = field(default_factory=lambda: [0.8, -0.5, 0.6])
    seed: int = 42
    alpha: float = ALPHA
    only: list[str] | None = None
    # not echoed into the manifest: they must not change any output
    out: str = "run"
    workers: int = 1

    def validate(self) -> None:
        times = list(self.t) + list(self.grid or []) + [self.t_end]
        if any(not 0.0 <= x < 1.0 for x in times):
            raise ValueError("all times must lie in [0, 1)")
        if self.grid is not None and any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.reps < 1 or self.lln_reps < 1:
            raise ValueError("replicate count must be >= 1")
        if any(not r > 0 for r in self.rho):
            raise ValueError("rho(B) values must be positive")
        if self.windows is not None and any(not m > 0 for m in self.windows.values()):
            raise ValueError("window masses must be positive")
        if self.jmax < 1 or self.n < 1:
            raise ValueError("jmax and n must be >= 1")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        del d["out"], d["workers"]
        return d

    def base_measure(self) -> BaseMeasure:
        if self.windows:
            return BaseMeasure(tuple(Window(k, float(v)) for k, v in self.windows.items()))
        return BaseMeasure.single(self.rho[0])

    def stream_seed(self) -> int:
        return derive_seed(self.seed, self.experiment)


# -- artifact helpers -----------------------------------------------------------


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_manifest(cfg: ExperimentConfig, reports: list[TestReport], extra=None) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "config": cfg.echo(),
        "versions": {"polyascrp": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "reports": [json.loads(r.to_json()) for r in reports],
        "passed": all(r.passed for r in reports),
        "summary": extra or {},
    }
    path = out / MANIFEST
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


# -- replicate kernels ------------------------------------------------------------


def _path_counts(rng: RngStream, grid, base: BaseMeasure) -> tuple[tuple[int, ...], ...]:
    traj = sample_path(grid, base, None, rng)
    return tuple(tuple(count(s, w) for w in base.windows) for s in traj.states)


def _seating(rng: RngStream, theta: float, n: int) -> tuple[int, ...]:
    events = crp.sample_arrival_events(BaseMeasure.single(theta), None, n, rng)
    return crp.extract_seating(events).table_of


def _terminal_profile(rng: RngStream, rho_b: float, t: float, j_max: int) -> np.ndarray:
    return mprw.simulate_events(rho_b, t, rng, record=False).final.as_array(j_max)


def _lln_error(rng: RngStream, rho_b: float, t: float, j_sup: int) -> float:
    eta = mprw.simulate_events(rho_b, t, rng, record=False).final
    v = hf.scaled_profile(eta, rho_b, j_sup).values
    return float(np.max(np.abs(v - hf.tau(t, j_sup))))


def _fluct(rng: RngStream, rho_b: float, t: float, j_max: int) -> np.ndarray:
    return hf.fluct_sample(rho_b, t, rng, j_max, jitter=True).values


def _stick(rng: RngStream, rho_b: float, m_max: int) -> np.ndarray:
    return sample_arrivals_stick(rho_b, m_max, rng)


def _nb_report(values, r, z, name, alpha, seed) -> TestReport:
    law = NegativeBinomial(r, z)
    obs = histogram(values, max(law.cutoff(1e-9), int(np.max(values)) + 1) + 1)
    return chi_square_gof(obs, law.pmf, name=name, alpha=alpha, seed=seed)


# -- subcommands --------------------------------------------------------------------


def cmd_simulate_path(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    base, grid, out = cfg.base_measure(), cfg.grid, Path(cfg.out)
    master = cfg.stream_seed()
    seed = {"seed": cfg.seed, "master_seed": master}
    rows = run_replicates(partial(_path_counts, grid=grid, base=base), cfg.reps, master, cfg.workers)
    _write_rows(
        out / "counts.csv",
        ("replicate", "t", "window_id", "count"),
        ((i, _fmt(t), w.id, row[k][wi])
         for i, row in enumerate(rows) for k, t in enumerate(grid)
         for wi, w in enumerate(base.windows)),
    )
    # replicate 0 again on its own stream, for the full configurations
    traj = sample_path(grid, base, None, RngStream(master, 0))
    for k, (t, state) in enumerate(zip(grid, traj.states)):
        with (out / f"path_t{k}.csv").open("w", newline="") as fh:
            write_configuration_csv(state, fh)
    arr = np.array(rows)
    reports = []
    for k, t in enumerate(grid):
        for wi, w in enumerate(base.windows):
            reports.append(_nb_report(arr[:, k, wi], w.mass, t,
                                      f"Y_{t}({w.id}) ~ NB({w.mass}, {t})", cfg.alpha, seed))
        if len(base.windows) > 1:
            reports.append(_nb_report(arr[:, k, :].sum(axis=1), base.total_mass, t,
                                      f"Y_{t}(all) ~ NB({base.total_mass}, {t})", cfg.alpha, seed))
    return reports, {"grid": list(grid), "windows": {w.id: w.mass for w in base.windows}}


def cmd_arrivals(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    master = cfg.stream_seed()
    seed = {"seed": cfg.seed, "master_seed": master}
    reports, out_rows = [], []
    for k, rho_b in enumerate(cfg.rho):
        taus = np.array(run_replicates(partial(_stick, rho_b=rho_b, m_max=cfg.jmax), cfg.reps,
                                       master, cfg.workers, start=k * cfg.reps))
        for i, row in enumerate(taus):
            out_rows.extend((_fmt(rho_b), i, m, _fmt(x)) for m, x in enumerate(row, start=1))
        for m in range(1, cfg.jmax + 1):
            law = arrival_law(m - 1, rho_b).beta()
            reports.append(ks_test(taus[:, m - 1], law.cdf, name=f"tau_{m} ~ Beta({m}, {rho_b})",
                                   alpha=cfg.alpha, seed=seed))
    _write_rows(Path(cfg.out) / "arrivals.csv", ("rho", "replicate", "m", "tau"), out_rows)
    return reports, {}


def cmd_crp(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    master = cfg.stream_seed()
    seed = {"seed": cfg.seed, "master_seed": master}
    out = Path(cfg.out)
    reports, seat_rows, summary = [], [], {}
    with (out / "partitions.txt").open("w") as fh:
        for k, theta in enumerate(cfg.rho):
            seatings = run_replicates(partial(_seating, theta=theta, n=cfg.n), cfg.reps, master,
                                      cfg.workers, start=k * cfg.reps)
            for i, s in enumerate(seatings):
                seat_rows.extend((_fmt(theta), i, c, tb) for c, tb in enumerate(s, start=1))
                fh.write(f"# theta={theta!r} replicate={i}\n")
                fh.write(crp.SeatingSequence(s).partition().export())
            if cfg.n <= 8:
                law = crp.crp_partition_law(cfg.n, theta)
                keys = sorted(law)
                index = {key: j for j, key in enumerate(keys)}
                obs = np.zeros(len(keys))
                for s in seatings:
                    obs[index[crp.SeatingSequence(s).partition().key()]] += 1
                probs = np.array([float(law[key]) for key in keys])
                reports.append(chi_square_gof(obs, lambda idx, p=probs: p[idx],
                                              name=f"partition law n={cfg.n}, theta={theta}",
                                              alpha=cfg.alpha, seed=seed))
            tables = [max(s) for s in seatings]
            target = crp.expected_tables(cfg.n, theta)
            reports.append(mean_check(tables, target=target,
                                      name=f"mean tables n={cfg.n}, theta={theta}", seed=seed))
            summary[f"mean_tables_theta={theta!r}"] = float(np.mean(tables))
    _write_rows(out / "seatings.csv", ("theta", "replicate", "customer", "table"), seat_rows)
    return reports, summary


def cmd_mprw(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    master = cfg.stream_seed()
    seed = {"seed": cfg.seed, "master_seed": master}
    rho_b, t, out = cfg.rho[0], cfg.t[0], Path(cfg.out)
    with (out / "trajectory.csv").open("w", newline="") as fh:
        mprw.simulate_events(rho_b, t, RngStream(master, 0)).write_csv(fh)
    rows = np.array(run_replicates(partial(_terminal_profile, rho_b=rho_b, t=t, j_max=cfg.jmax),
                                   cfg.reps, master, cfg.workers))
    nz = np.nonzero(rows)
    _write_rows(out / "profiles.csv", ("replicate", "j", "count"),
                ((i, j + 1, int(rows[i, j])) for i, j in zip(*nz)))
    reports = []
    for j in range(1, min(5, cfg.jmax) + 1):
        lam = rho_b * t**j / j
        reports.append(chi_square_gof(histogram(rows[:, j - 1], 12), partial(poisson_pmf, lam=lam),
                                      name=f"U(j={j}) ~ Poisson({lam:.6g})", alpha=cfg.alpha,
                                      seed=seed))
    for a in range(1, min(3, cfg.jmax) + 1):
        for b in range(a + 1, min(3, cfg.jmax) + 1):
            if rows[:, a - 1].std() > 0 and rows[:, b - 1].std() > 0:
                reports.append(independence_test(rows[:, [a - 1, b - 1]],
                                                 name=f"independence U({a}), U({b})", seed=seed))
    tables = rows.sum(axis=1)
    target = -rho_b * math.log1p(-t)
    reports.append(mean_check(tables, target=target, name=f"E[#tables] = {target:.6g}", seed=seed))
    if cfg.jmax >= NegativeBinomial(rho_b, t).cutoff(1e-9):
        J = rows @ np.arange(1, cfg.jmax + 1)
        reports.append(_nb_report(J, rho_b, t, f"J(U) ~ NB({rho_b}, {t})", cfg.alpha, seed))
    return reports, {"mean_tables": float(tables.mean()),
                     "se_tables": float(tables.std(ddof=1) / math.sqrt(len(tables))),
                     "expected_tables": target}


def cmd_hydro(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    times = cfg.grid or [round(cfg.t_end * k / 10, 12) for k in range(1, 11)]
    if times[-1] != cfg.t_end:
        times = [x for x in times if x < cfg.t_end] + [cfg.t_end]
    states = hf.hydro_curve(times, cfg.jmax, cfg.step)
    rows = []
    for st in states:
        an = st.analytic()
        for j in range(1, cfg.jmax + 1):
            rows.append((_fmt(st.t), j, _fmt(st.V[j - 1]), _fmt(an[j - 1]),
                         _fmt(abs(st.V[j - 1] - an[j - 1]))))
    _write_rows(Path(cfg.out) / "hydro.csv", ("t", "j", "V_numeric", "V_analytic", "abs_err"), rows)
    err = states[-1].max_abs_error()
    reports = [exact_check(f"max_j |V(j) - t^j/j| <= 1e-8 at t={cfg.t_end}", err <= 1e-8, err)]
    return reports, {"max_abs_err": err}


def cmd_fluct(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    master = cfg.stream_seed()
    seed = {"seed": cfg.seed, "master_seed": master}
    out = Path(cfg.out)
    rho_b = max(cfg.rho)
    reports, summary = [], {}
    offset = 0
    for k, t in enumerate(cfg.t):
        Z = np.array(run_replicates(partial(_fluct, rho_b=rho_b, t=t, j_max=cfg.jmax), cfg.reps,
                                    master, cfg.workers, start=offset))
        offset += cfg.reps
        _write_rows(out / f"fluct_t{k}.csv", ("j", "sample_id", "z_value"),
                    ((j, i, _fmt(Z[i, j - 1])) for j in range(1, cfg.jmax + 1)
                     for i in range(cfg.reps)))
        summary[f"fluct_t{k}"] = t
        for j in range(1, cfg.jmax + 1):
            reports.append(ks_test(Z[:, j - 1], stats.norm(0, math.sqrt(t**j / j)).cdf,
                                   name=f"Z(j={j}) ~ N(0, t^j/j) at t={t}", alpha=cfg.alpha,
                                   seed=seed))
        for a in range(1, cfg.jmax + 1):
            for b in range(a + 1, cfg.jmax + 1):
                reports.append(independence_test(Z[:, [a - 1, b - 1]],
                                                 name=f"independence Z({a}), Z({b}) at t={t}",
                                                 seed=seed))
    t = cfg.t[0]
    lln_rows, means = [], {}
    for rb in cfg.rho:
        errs = run_replicates(partial(_lln_error, rho_b=rb, t=t, j_sup=10), cfg.lln_reps, master,
                              cfg.workers, start=offset)
        offset += cfg.lln_reps
        means[rb] = float(np.mean(errs))
        lln_rows.extend((_fmt(rb), i, _fmt(e)) for i, e in enumerate(errs))
    _write_rows(out / "lln.csv", ("rho", "replicate", "sup_err"), lln_rows)
    if len(means) >= 2:
        slope = float(np.polyfit(np.log10(list(means)), np.log10(list(means.values())), 1)[0])
        summary["lln_slope"] = slope
        reports.append(exact_check("LLN log-log slope = -0.5 +- 0.1", abs(slope + 0.5) <= 0.1,
                                   slope))
    res = hf.mgf_check(cfg.g, t, rho_b, cfg.reps, RngStream(master, offset))
    mgf = asdict(res)
    _write_rows(out / "mgf.csv", ("key", "value"), ((k, _fmt(v)) for k, v in sorted(mgf.items())))
    reports.append(exact_check(
        "limit log-MGF within 3 SE of 1/2 sum (s^j/j) g(j)^2",
        abs(res.empirical_limit - res.analytic) < 3 * res.se_limit,
        res.empirical_limit - res.analytic, n=res.n))
    return reports, summary


def cmd_verify(cfg: ExperimentConfig) -> tuple[list[TestReport], dict]:
    from .verify import run_all

    results = run_all(cfg.seed, cfg.workers, only=cfg.only,
                      log=lambda line: print(line, flush=True))
    reports = [r for rs in results.values() for r in rs]
    summary = {key: all(r.passed for r in rs) for key, rs in results.items()}
    return reports, summary


COMMANDS = {
    "simulate-path": cmd_simulate_path,
    "arrivals": cmd_arrivals,
    "crp": cmd_crp,
    "mprw": cmd_mprw,
    "hydro": cmd_hydro,
    "fluct": cmd_fluct,
    "verify": cmd_verify,
}


# -- plotting -----------------------------------------------------------------------


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def export_plots(run_dir: str | Path) -> list[Path]:
    """Plot-ready CSV (and SVG when matplotlib is installed) for a finished run."""
    run = Path(run_dir)
    if not run.is_dir():
        raise FileNotFoundError(f"run directory {run} does not exist")
    if not any(run.iterdir()):
        raise FileNotFoundError(f"run directory {run} is empty")
    plots = run / "plots"
    plots.mkdir(exist_ok=True)
    written: list[Path] = []
    series: list[tuple[str, dict]] = []

    if (run / "hydro.csv").exists():
        rows = _read_csv(run / "hydro.csv")
        js = sorted({int(r["j"]) for r in rows})[:6]
        out_rows = [(r["t"], r["j"], r["V_numeric"], r["V_analytic"]) for r in rows
                    if int(r["j"]) in js]
        path = plots / "hydro_curves.csv"
        _write_rows(path, ("t", "j", "V_numeric", "V_analytic"), out_rows)
        written.append(path)
        series.append(("hydro", {"rows": out_rows, "js": js}))

    for fpath in sorted(run.glob("fluct_t*.csv")):
        rows = _read_csv(fpath)
        manifest = json.loads((run / MANIFEST).read_text()) if (run / MANIFEST).exists() else {}
        t = manifest.get("summary", {}).get(fpath.stem)
        by_j: dict[int, list[float]] = {}
        for r in rows:
            by_j.setdefault(int(r["j"]), []).append(float(r["z_value"]))
        hist_rows = []
        for j, vals in sorted(by_j.items()):
            counts, edges = np.histogram(vals, bins=40)
            width = edges[1] - edges[0]
            density = counts / (len(vals) * width)
            mids = (edges[:-1] + edges[1:]) / 2
            sd = math.sqrt(t**j / j) if t is not None else float(np.std(vals))
            gauss = stats.norm(0, sd).pdf(mids)
            hist_rows.extend((j, _fmt(m), _fmt(d), _fmt(g)) for m, d, g in zip(mids, density, gauss))
        path = plots / f"clt_hist_{fpath.stem}.csv"
        _write_rows(path, ("j", "bin_mid", "density", "gaussian"), hist_rows)
        written.append(path)
        series.append(("clt", {"rows": hist_rows, "name": fpath.stem, "t": t}))

    if (run / "lln.csv").exists():
        rows = _read_csv(run / "lln.csv")
        by_rho: dict[float, list[float]] = {}
        for r in rows:
            by_rho.setdefault(float(r["rho"]), []).append(float(r["sup_err"]))
        pts = [(rb, float(np.mean(v))) for rb, v in sorted(by_rho.items())]
        slope = (float(np.polyfit(np.log10([p[0] for p in pts]), np.log10([p[1] for p in pts]), 1)[0])
                 if len(pts) >= 2 else float("nan"))
        path = plots / "lln_error.csv"
        _write_rows(path, ("rho", "mean_sup_err"), ((_fmt(a), _fmt(b)) for a, b in pts))
        written.append(path)
        (plots / "lln_slope.txt").write_text(f"{slope!r}\n")
        written.append(plots / "lln_slope.txt")
        series.append(("lln", {"pts": pts, "slope": slope}))

    if not series:
        raise FileNotFoundError(f"no plottable artifacts in {run}")
    written.extend(_render_svgs(plots, series))
    return written


def _render_svgs(plots: Path, series) -> list[Path]:
    try:
        import matplotlib
    except ImportError:
        return []
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "polyascrp"
    import matplotlib.pyplot as plt

    out = []
    for kind, data in series:
        fig, ax = plt.subplots(figsize=(6, 4))
        if kind == "hydro":
            for j in data["js"]:
                pts = [(float(r[0]), float(r[2]), float(r[3])) for r in data["rows"] if int(r[1]) == j]
                ts = [p[0] for p in pts]
                ax.plot(ts, [p[1] for p in pts], "o", ms=3, label=f"j={j} RK4")
                ax.plot(ts, [p[2] for p in pts], "-", lw=1, color=ax.lines[-1].get_color())
            ax.set_xlabel("t")
            ax.set_ylabel("V(j)")
            ax.legend(fontsize=7)
            name = "hydro_curves.svg"
        elif kind == "clt":
            for j in sorted({int(r[0]) for r in data["rows"]}):
                pts = [r for r in data["rows"] if int(r[0]) == j]
                mids = [float(r[1]) for r in pts]
                ax.step(mids, [float(r[2]) for r in pts], where="mid", label=f"j={j}")
                ax.plot(mids, [float(r[3]) for r in pts], "--", color=ax.lines[-1].get_color())
            ax.set_xlabel("z")
            ax.set_ylabel("density")
            ax.set_title(f"t = {data['t']}")
            ax.legend(fontsize=7)
            name = f"clt_hist_{data['name']}.svg"
        else:
            xs, ys = zip(*data["pts"])
            ax.loglog(xs, ys, "o-")
            ax.set_xlabel("rho(B)")
            ax.set_ylabel("mean sup_j |V(j) - t^j/j|")
            ax.set_title(f"slope {data['slope']:.3f}")
            name = "lln_error.svg"
        path = plots / name
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        out.append(path)
    return out


# -- argument handling --------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _windows(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        if not key or not val:
            raise argparse.ArgumentTypeError(f"window spec {part!r} is not id=mass")
        out[key.strip()] = float(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyascrp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--rho", type=_floats, help="rho(B) value(s), comma separated")
    common.add_argument("--windows", type=_windows, help="disjoint windows, e.g. A=1,B=2")
    common.add_argument("--grid", type=_floats, help="increasing time grid in [0, 1)")
    common.add_argument("--t", type=_floats, help="time(s) in [0, 1)")
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--jmax", type=int, help="profile truncation / number of arrivals")
    common.add_argument("--step", type=float, help="RK4 step")
    common.add_argument("--reps", type=int, help="replicate count")
    common.add_argument("--n", type=int, help="customers (crp)")
    common.add_argument("--lln-reps", dest="lln_reps", type=int)
    common.add_argument("--g", type=_floats, help="test function for the MGF check")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=float,
                        help="per-test level for experiment runs (verify uses its own levels)")
    common.add_argument("--workers", type=int)

    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        if name == "verify":
            p.add_argument("--only", type=lambda s: s.split(","),
                           help="comma-separated criteria, e.g. C01,C10")
    p = sub.add_parser("export-plots", help="plot data for a finished run")
    p.add_argument("run_dir")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = dict(DEFAULTS[args.command])
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(loaded) - set(ExperimentConfig.__dataclass_fields__) - {"experiment"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key, val in vars(args).items():
        if key not in ("command", "config") and val is not None:
            values[key] = val
    values["experiment"] = args.command
    if isinstance(values.get("rho"), (int, float)):
        values["rho"] = [float(values["rho"])]
    if isinstance(values.get("t"), (int, float)):
        values["t"] = [float(values["t"])]
    cfg = ExperimentConfig(**values)
    if cfg.experiment == "simulate-path" and cfg.grid is None:
        cfg.grid = [0.2, 0.4, 0.6]
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "export-plots":
            for path in export_plots(args.run_dir):
                print(path)
            return 0
        cfg = resolve_config(args)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        reports, summary = COMMANDS[cfg.experiment](cfg)
    except (ValueError, FileNotFoundError, OSError, hf.HydroInstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = write_manifest(cfg, reports, summary)
    if cfg.experiment != "verify":
        for r in reports:
            print(r.line())
    failed = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} reports passed; manifest at {path}")
    if failed and cfg.experiment == "verify":
        print("failed reports:", file=sys.stderr)
        for r in failed:
            print("  " + r.line(), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
