"""Command-line front end: design, verify, sweep, simulate, halanay.

Exit codes: 0 success/feasible, 2 configuration or assumption error,
3 solver inconclusive, 4 infeasible, 5 simulation/analysis failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import sdp
from . import synthesis as syn
from .config import RunConfig
from .errors import (AnalysisError, AssumptionError, ConfigError,
                     HeatCtrlError, SimulationError, SynthesisError)
from .modal import reduced_matrices
from .sim import Sampling, SimConfig, decay_rate_estimate, simulate_continuous, \
    simulate_sampled
from .svg import line_plot

log = logging.getLogger("heatctrl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_INFEASIBLE = 4
EXIT_SIM = 5

PAPER_GAINS = {"l0": [0.7062], "k0": [-4.8237, -5.2287]}


def _prepare_out(cfg: RunConfig, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "effective_config.ini"), "w") as fh:
        fh.write(cfg.dump_ini())
    return out_dir


def _build_model(cfg: RunConfig, m_max=None):
    sys_cfg = cfg.system_config()
    tol = cfg.get("design", "assumption_tol")
    return reduced_matrices(sys_cfg, M_max=m_max, assumption_tol=tol)


def _gains_to_json(gains: syn.GainSet, model, delta) -> dict:
    return {
        "N0": model.N0,
        "delta": delta,
        "L0": gains.L0.ravel().tolist(),
        "K0": gains.K0.ravel().tolist(),
        "Po": gains.Po.tolist(),
        "Pc": gains.Pc.tolist(),
        "margin": gains.margin,
    }


def _gains_from_json(doc: dict, model, delta) -> syn.GainSet:
    return syn.gains_from_vectors(model, doc["L0"], doc["K0"], delta)


def _resolve_gains(cfg: RunConfig, model, gains_path=None) -> syn.GainSet:
    delta = cfg.get("system", "delta")
    if gains_path:
        doc = json.load(open(gains_path))
        return _gains_from_json(doc, model, delta)
    l0 = cfg.get("gains", "l0")
    if l0 is not None:
        return syn.gains_from_vectors(model, l0, cfg.get("gains", "k0"), delta)
    return syn.design_gains(model, delta,
                            margin_req=cfg.get("design", "margin_req"),
                            options=cfg.solve_options(),
                            decay_slack=cfg.get("design", "decay_slack"))


def cmd_design(cfg: RunConfig, out_dir: str) -> int:
    out_dir = _prepare_out(cfg, out_dir)
    model = _build_model(cfg)
    delta = cfg.get("system", "delta")
    gains = syn.design_gains(model, delta,
                             margin_req=cfg.get("design", "margin_req"),
                             options=cfg.solve_options(),
                             decay_slack=cfg.get("design", "decay_slack"))
    rep = syn.verify_gains(gains, model, delta)
    doc = _gains_to_json(gains, model, delta)
    with open(os.path.join(out_dir, "gains.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    lines = [
        f"N0 = {model.N0}",
        f"N = {model.N}",
        f"x_star = {model.x_star!r}",
        f"L0 = {gains.L0.ravel().tolist()}",
        f"K0 = {gains.K0.ravel().tolist()}",
        f"observer abscissa = {rep.obs_abscissa!r}",
        f"controller abscissa = {rep.ctrl_abscissa!r}",
        f"certified margin = {gains.margin!r}",
    ]
    report = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "design_report.txt"), "w") as fh:
        fh.write(report)
    print(report, end="")
    return EXIT_OK


def _certificate_doc(cert: syn.LmiCertificate) -> dict:
    doc = {"margin": cert.margin, "alpha1": cert.alpha1,
           "P": cert.P.tolist()}
    if cert.alpha2 is not None:
        doc["alpha2"] = cert.alpha2
    if cert.W1 is not None:
        doc["W1"] = cert.W1.tolist()
    if cert.W2 is not None:
        doc["W2"] = cert.W2
    return doc


def cmd_verify(cfg: RunConfig, out_dir: str, gains_path=None) -> int:
    out_dir = _prepare_out(cfg, out_dir)
    model = _build_model(cfg)
    gains = _resolve_gains(cfg, model, gains_path)
    opts = cfg.solve_options()
    delta = cfg.get("system", "delta")
    lines = [f"N = {model.N}", f"N0 = {model.N0}"]
    if cfg.sampled:
        d0 = cfg.get("system", "delta0")
        d1 = cfg.get("system", "delta1")
        t_y = cfg.get("system", "tau_my")
        t_u = cfg.get("system", "tau_mu")
        out, cert = syn.certify_sampled(model, gains, d0, d1, t_y, t_u, opts)
        d_tau = syn.halanay_rate(d0, d1, t_y)
        lines += [f"mode = sampled", f"tau_my = {t_y!r}", f"tau_mu = {t_u!r}",
                  f"delta_tau = {d_tau!r}"]
    else:
        out, cert = syn.certify_continuous(model, gains, delta, opts)
        lines += ["mode = continuous", f"delta = {delta!r}"]
    lines += [f"status = {out.status.value}", f"margin = {out.margin!r}"]
    report = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "verify_report.txt"), "w") as fh:
        fh.write(report)
    print(report, end="")
    if cert is not None:
        with open(os.path.join(out_dir, "certificate.json"), "w") as fh:
            json.dump(_certificate_doc(cert), fh, indent=1, sort_keys=True)
    if out.status is sdp.SolveStatus.FEASIBLE:
        return EXIT_OK
    if out.status is sdp.SolveStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_INCONCLUSIVE


def _sweep_column(payload) -> tuple[int, list]:
    """Worker: one observer dimension, all tau_my rows (top to bottom)."""
    values, n_col, gains_doc = payload
    cfg = RunConfig(values)
    base = dict(values["system"])
    base["n"] = n_col
    cfg.values["system"] = base
    model = _build_model(cfg)
    gains = syn.gains_from_vectors(model, gains_doc["l0"], gains_doc["k0"],
                                   values["system"]["delta"])
    opts = cfg.solve_options()
    d0 = values["system"]["delta0"]
    d1 = values["system"]["delta1"]
    step = values["sweep"]["grid_step"]
    cap = values["sweep"]["cap"]
    cells = []
    hint = None
    for tau_my in values["sweep"]["tau_my_values"]:
        try:
            val = syn.max_feasible_tau_u(model, gains, tau_my, d0, d1, step,
                                         cap=cap, options=opts, hi_hint=hint)
        except Exception as exc:        # cell-level fault: mark and continue
            log.warning("sweep cell N=%d tau_my=%g failed: %s", n_col, tau_my, exc)
            cells.append("?")
            hint = None
            continue
        cells.append(val)
        hint = val if val is not None else step
    return n_col, cells


def cmd_sweep(cfg: RunConfig, out_dir: str, jobs: int, gains_path=None) -> int:
    out_dir = _prepare_out(cfg, out_dir)
    n_values = cfg.get("sweep", "n_values")
    tau_rows = cfg.get("sweep", "tau_my_values")
    step = cfg.get("sweep", "grid_step")
    if not cfg.sampled:
        raise ConfigError("sweep needs the sampled-data parameters "
                          "(delta0, delta1, tau_my, tau_mu)")
    # gains are shared across columns (their dimension depends only on N0)
    if gains_path:
        doc = json.load(open(gains_path))
        gains_doc = {"l0": doc["L0"], "k0": doc["K0"]}
    elif cfg.get("gains", "l0") is not None:
        gains_doc = {"l0": cfg.get("gains", "l0"), "k0": cfg.get("gains", "k0")}
    else:
        model0 = _build_model(cfg)
        g = syn.design_gains(model0, cfg.get("system", "delta"),
                             margin_req=cfg.get("design", "margin_req"),
                             options=cfg.solve_options(),
                             decay_slack=cfg.get("design", "decay_slack"))
        gains_doc = {"l0": g.L0.ravel().tolist(), "k0": g.K0.ravel().tolist()}

    payloads = [(cfg.values, n, gains_doc) for n in n_values]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_sweep_column, payloads))
    else:
        results = dict(map(_sweep_column, payloads))

    decimals = max(0, int(np.ceil(-np.log10(step))))
    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["tau_my"] + [f"N={n}" for n in n_values])
        for i, tau_my in enumerate(tau_rows):
            row = [f"{tau_my:.{decimals}f}"]
            for n in n_values:
                cell = results[n][i]
                if cell is None:
                    row.append("-")
                elif cell == "?":
                    row.append("?")
                else:
                    row.append(f"{cell:.{decimals}f}")
            wr.writerow(row)
    with open(csv_path) as fh:
        print(fh.read(), end="")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out_dir: str, gains_path=None,
                 seed=None) -> int:
    out_dir = _prepare_out(cfg, out_dir)
    m = cfg.get("sim", "m")
    model = _build_model(cfg, m_max=max(m, 100))
    delta = cfg.get("system", "delta")
    if cfg.get("sim", "open_loop"):
        gains = syn.GainSet(L0=np.zeros((model.N0, 1)),
                            K0=np.zeros((1, model.N0 + 1)),
                            Po=np.eye(model.N0), Pc=np.eye(model.N0 + 1),
                            margin=0.0)
    else:
        gains = _resolve_gains(cfg, model, gains_path)

    horizon = cfg.get("sim", "horizon")
    kind = cfg.get("sim", "sampling").lower()
    seed = cfg.get("sim", "seed") if seed is None else seed
    sampling = None
    if kind != "continuous":
        if not cfg.sampled:
            raise ConfigError("sampled simulation needs tau_my and tau_mu")
        t_y = cfg.get("system", "tau_my")
        t_u = cfg.get("system", "tau_mu")
        if kind == "uniform":
            sampling = Sampling.uniform(t_y, t_u, horizon)
        elif kind == "jittered":
            sampling = Sampling.jittered(t_y, t_u, horizon, seed=seed,
                                         low=cfg.get("sim", "jitter_low"))
        else:
            raise ConfigError(f"unknown sampling kind {kind!r}")

    sim_cfg = SimConfig(M=m, T=horizon, dt=cfg.get("sim", "dt"),
                        initial=_initial_from_config(cfg), sampling=sampling)
    traj = (simulate_continuous(model, gains, sim_cfg) if sampling is None
            else simulate_sampled(model, gains, sim_cfg))

    q = traj.h1_sq() + traj.usq()
    window = cfg.get("sim", "fit_window")
    rate = decay_rate_estimate(traj.times, q, window=window)
    if cfg.sampled and sampling is not None:
        d_theory = syn.halanay_rate(cfg.get("system", "delta0"),
                                    cfg.get("system", "delta1"),
                                    cfg.get("system", "tau_my"))
        theory_name = "delta_tau"
    else:
        d_theory = delta
        theory_name = "delta"

    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    envelope = q[0] * np.exp(-2.0 * d_theory * traj.times)
    line_plot(os.path.join(out_dir, "decay.svg"),
              [(traj.times, q, "||w||_H1^2 + u^2"),
               (traj.times, envelope, f"envelope exp(-2 {theory_name} t)")],
              title="closed-loop energy decay",
              xlabel="t", ylabel="log10 energy", ylog=True)
    lines = [
        f"mode = {'sampled' if sampling is not None else 'continuous'}",
        f"M = {m}",
        f"fitted_rate = {rate!r}",
        f"theory_rate ({theory_name}) = {d_theory!r}",
        f"rate_ratio = {rate / d_theory!r}",
    ]
    report = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "simulate_report.txt"), "w") as fh:
        fh.write(report)
    print(report, end="")
    return EXIT_OK


def _initial_from_config(cfg: RunConfig):
    spec = cfg.get("sim", "initial").strip()
    if spec == "parabola":
        return None
    if spec.startswith("modes:"):
        return [float(v) for v in spec[len("modes:"):].replace(",", " ").split()]
    raise ConfigError(f"unknown initial condition spec {spec!r}")


def cmd_halanay(cfg: RunConfig, out_dir: str) -> int:
    out_dir = _prepare_out(cfg, out_dir)
    if not cfg.sampled:
        raise ConfigError("halanay needs delta0, delta1 and tau_my")
    d0 = cfg.get("system", "delta0")
    d1 = cfg.get("system", "delta1")
    h = cfg.get("system", "tau_my")
    d_tau = syn.halanay_rate(d0, d1, h)
    report = f"delta_tau = {d_tau!r}\n"
    with open(os.path.join(out_dir, "halanay.txt"), "w") as fh:
        fh.write(report)
    print(report, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="heatctrl",
        description="Observer-based Dirichlet boundary control toolkit for "
                    "the 1D heat equation")
    p.add_argument("command",
                   choices=["design", "verify", "sweep", "simulate", "halanay"])
    p.add_argument("--config", help="INI or JSON configuration file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--gains", help="gains.json produced by 'design'")
    p.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1),
                   help="worker processes for the sweep")
    p.add_argument("--seed", type=int, help="override the sampling jitter seed")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.defaults()
        if args.command == "design":
            return cmd_design(cfg, args.out)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.gains)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.jobs, args.gains)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.gains, args.seed)
        return cmd_halanay(cfg, args.out)
    except (ConfigError, AssumptionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SynthesisError as exc:
        print(f"synthesis error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SimulationError, AnalysisError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except HeatCtrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
