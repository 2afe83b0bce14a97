"""Command-line entry point for the experiment suite.

Every subcommand writes its result tables (CSV), a manifest echoing the
configuration and seed, and rendered figures into the output directory.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import figures
from .baselines import train_mlp
from .channel import sample_topology
from .checkpoint import CheckpointError, load_model, save_model
from .gnn import TrainingDivergedError, train_gnn, transfer_train
from .harness import (
    ConfigError,
    bench_inference,
    load_config,
    run_cdf,
    run_deploy_compare,
    run_eval,
    run_sweep,
    smoothed,
    write_csv,
    write_manifest,
)
from .rng import substream
from .sac import train_sac


def _common_args(p):
    p.add_argument("--config", default="default",
                   help="preset name ('default', 'full') or path to a JSON config")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering, write CSVs only")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uavsec",
        description="secure-beamforming and UAV-deployment experiment suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, extra in [
        ("train-gnn", []),
        ("train-mlp", []),
        ("train-sac", ["checkpoint"]),
        ("eval", ["checkpoint", "mlp_checkpoint", "users"]),
        ("sweep-users", ["checkpoint", "mlp_checkpoint"]),
        ("sweep-power", ["checkpoint", "mlp_checkpoint"]),
        ("sweep-noise", ["checkpoint", "mlp_checkpoint"]),
        ("cdf", ["checkpoint", "mlp_checkpoint"]),
        ("deploy-compare", ["checkpoint", "grid", "topologies"]),
        ("bench", ["checkpoint", "mlp_checkpoint", "repeats", "grid"]),
        ("transfer", ["checkpoint", "users"]),
    ]:
        p = sub.add_parser(name)
        _common_args(p)
        if "checkpoint" in extra:
            p.add_argument("--checkpoint", required=True,
                           help="trained beamformer checkpoint (gnn)")
        if "mlp_checkpoint" in extra:
            p.add_argument("--mlp-checkpoint", default=None)
        if "users" in extra:
            p.add_argument("--users", type=int, default=None)
        if "grid" in extra:
            p.add_argument("--grid", type=int, default=None, help="grid resolution")
        if "repeats" in extra:
            p.add_argument("--repeats", type=int, default=None)
        if "topologies" in extra:
            p.add_argument("--topologies", type=int, default=None)
    return parser


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "users", None):
        cfg = replace(cfg, scenario=replace(cfg.scenario, n_users=args.users))
    if getattr(args, "grid", None):
        cfg = replace(cfg, eval=replace(cfg.eval, grid_resolution=args.grid))
    if getattr(args, "topologies", None):
        cfg = replace(cfg, eval=replace(cfg.eval, deploy_topologies=args.topologies))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.txt", cfg, cfg.seed, " ".join(sys.argv))
    return cfg, out


def _load_models(args):
    gnn_model = load_model(args.checkpoint, expect="gnn")
    mlp_model = None
    if getattr(args, "mlp_checkpoint", None):
        mlp_model = load_model(args.mlp_checkpoint, expect="mlp")
    return gnn_model, mlp_model


def cmd_train_gnn(args):
    cfg, out = _prepare(args)
    model, losses = train_gnn(cfg.scenario, cfg.gnn, cfg.seed)
    model.meta = {"seed": cfg.seed, "config_hash": cfg.config_hash()}
    write_csv(out / "loss_curve.csv", ["epoch", "loss"],
              [[i, v] for i, v in enumerate(losses)])
    save_model(out / "gnn_checkpoint.json", model)
    if not args.no_figures:
        figures.plot_loss_curve(out / "loss_curve.csv", out / "loss_curve.png",
                                title="graph beamformer training")
    print(f"trained gnn: final loss {losses[-1]:.4f} -> {out}")
    return 0


def cmd_train_mlp(args):
    cfg, out = _prepare(args)
    model, losses = train_mlp(cfg.scenario, cfg.mlp, cfg.seed)
    model.meta = {"seed": cfg.seed, "config_hash": cfg.config_hash()}
    write_csv(out / "loss_curve.csv", ["epoch", "loss"],
              [[i, v] for i, v in enumerate(losses)])
    save_model(out / "mlp_checkpoint.json", model)
    if not args.no_figures:
        figures.plot_loss_curve(out / "loss_curve.csv", out / "loss_curve.png",
                                title="MLP beamformer training")
    print(f"trained mlp: final loss {losses[-1]:.4f} -> {out}")
    return 0


def cmd_train_sac(args):
    cfg, out = _prepare(args)
    gnn_model, _ = _load_models(args)
    model, episodes, trace = train_sac(cfg.scenario, cfg.sac, gnn_model, cfg.seed)
    model.meta = {"seed": cfg.seed, "config_hash": cfg.config_hash()}
    topo = sample_topology(cfg.scenario, substream(cfg.seed, "sac-topo"))
    write_csv(out / "sac_curve.csv",
              ["episode", "cumulative_reward", "final_secrecy_rate"],
              [[e, c, f] for e, c, f in episodes])
    write_csv(out / "trace.csv", ["step", "x", "y", "reward"],
              [[s, float(x), float(y), float(r)] for s, x, y, r in trace])
    topo_rows = [["user", i, float(p[0]), float(p[1])] for i, p in enumerate(topo.users)]
    topo_rows += [["eve", i, float(p[0]), float(p[1])] for i, p in enumerate(topo.eves)]
    write_csv(out / "topology.csv", ["role", "index", "x", "y"], topo_rows)
    save_model(out / "sac_checkpoint.json", model)
    if not args.no_figures:
        figures.plot_sac_curve(out / "sac_curve.csv", out / "sac_curve.png")
        figures.plot_trace(out / "trace.csv", out / "trace.png",
                           topology_csv=out / "topology.csv")
    print(f"trained sac: end position ({trace[-1][1]:.1f}, {trace[-1][2]:.1f}), "
          f"reward {trace[-1][3]:.3f} -> {out}")
    return 0


def cmd_eval(args):
    cfg, out = _prepare(args)
    gnn_model, mlp_model = _load_models(args)
    header, rows = run_eval(cfg, gnn_model, mlp_model)
    write_csv(out / "eval.csv", header, rows)
    for row in rows:
        print(f"{row[0]}: mean sum secrecy {row[2]:.4f} bits/s/Hz")
    return 0


def cmd_sweep(kind):
    def run(args):
        cfg, out = _prepare(args)
        gnn_model, mlp_model = _load_models(args)
        header, rows = run_sweep(kind, cfg, gnn_model, mlp_model)
        path = out / f"sweep_{kind}.csv"
        write_csv(path, header, rows)
        if not args.no_figures:
            figures.plot_sweep(path, out / f"sweep_{kind}.png")
        print(f"wrote {path}")
        return 0

    return run


def cmd_cdf(args):
    cfg, out = _prepare(args)
    gnn_model, mlp_model = _load_models(args)
    header, rows = run_cdf(cfg, gnn_model, mlp_model)
    write_csv(out / "cdf.csv", header, rows)
    if not args.no_figures:
        figures.plot_cdf(out / "cdf.csv", out / "cdf.png")
    print(f"wrote {out / 'cdf.csv'}")
    return 0


def cmd_deploy_compare(args):
    cfg, out = _prepare(args)
    gnn_model, _ = _load_models(args)
    topologies = [
        sample_topology(cfg.scenario, substream(cfg.seed, "deploy-topo", i))
        for i in range(cfg.eval.deploy_topologies)
    ]
    positions = []
    for i, topo in enumerate(topologies):
        _, _, trace = train_sac(
            cfg.scenario, cfg.sac, gnn_model, cfg.seed + i, topology=topo
        )
        positions.append((trace[-1][1], trace[-1][2]))
    header, rows = run_deploy_compare(cfg, gnn_model, positions, topologies)
    write_csv(out / "deploy_compare.csv", header, rows)
    if not args.no_figures:
        figures.plot_deploy_compare(out / "deploy_compare.csv",
                                    out / "deploy_compare.png")
    print(f"wrote {out / 'deploy_compare.csv'}")
    return 0


def cmd_bench(args):
    cfg, out = _prepare(args)
    gnn_model, mlp_model = _load_models(args)
    header, rows = bench_inference(cfg, gnn_model, mlp_model,
                                   repeats=args.repeats)
    write_csv(out / "bench.csv", header, rows)
    if not args.no_figures:
        figures.plot_bench(out / "bench.csv", out / "bench.png")
    print(f"wrote {out / 'bench.csv'}")
    return 0


def cmd_transfer(args):
    cfg, out = _prepare(args)
    gnn_model, _ = _load_models(args)
    new_users = args.users or 12
    scenario = replace(cfg.scenario, n_users=new_users)
    scratch, scratch_losses = train_gnn(scenario, cfg.gnn, cfg.seed)
    tuned, tuned_losses = transfer_train(gnn_model, scenario, cfg.gnn, cfg.seed)
    rows = [["scratch", i, v] for i, v in enumerate(scratch_losses)]
    rows += [["finetune", i, v] for i, v in enumerate(tuned_losses)]
    write_csv(out / "transfer.csv", ["run", "epoch", "loss"], rows)
    save_model(out / "gnn_transfer_checkpoint.json", tuned)
    if not args.no_figures:
        figures.plot_transfer(out / "transfer.csv", out / "transfer.png")
    target = smoothed(scratch_losses, 10)[-1]
    reached = next(
        (i for i, v in enumerate(smoothed(tuned_losses, 10)) if v <= target),
        None,
    )
    print(f"scratch final smoothed loss {target:.4f}; "
          f"finetune reached it at epoch {reached}")
    return 0


HANDLERS = {
    "train-gnn": cmd_train_gnn,
    "train-mlp": cmd_train_mlp,
    "train-sac": cmd_train_sac,
    "eval": cmd_eval,
    "sweep-users": cmd_sweep("users"),
    "sweep-power": cmd_sweep("power"),
    "sweep-noise": cmd_sweep("noise"),
    "cdf": cmd_cdf,
    "deploy-compare": cmd_deploy_compare,
    "bench": cmd_bench,
    "transfer": cmd_transfer,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, CheckpointError, TrainingDivergedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
