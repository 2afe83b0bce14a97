"""Figure rendering for the experiment CSVs.

Every plot reads only the delimited output written next to it, so figures
can be regenerated after the fact from a results directory alone.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    return header, rows


def _save(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_loss_curve(csv_path, out_path, title="training loss"):
    _, rows = _read_csv(csv_path)
    epochs = [int(r[0]) for r in rows]
    losses = [float(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(epochs, losses, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss (− sum secrecy rate)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    _save(fig, out_path)


def plot_transfer(csv_path, out_path):
    _, rows = _read_csv(csv_path)
    series = defaultdict(lambda: ([], []))
    for run, epoch, loss in rows:
        series[run][0].append(int(epoch))
        series[run][1].append(float(loss))
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for run, (x, y) in sorted(series.items()):
        ax.plot(x, y, lw=1.2, label=run)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("fine-tune vs from-scratch")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, out_path)


def plot_sac_curve(csv_path, out_path):
    _, rows = _read_csv(csv_path)
    ep = [int(r[0]) for r in rows]
    cum = [float(r[1]) for r in rows]
    final = [float(r[2]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.plot(ep, cum, lw=0.9)
    ax1.set_xlabel("episode")
    ax1.set_ylabel("cumulative reward")
    ax1.grid(alpha=0.3)
    ax2.plot(ep, final, lw=0.9, color="tab:orange")
    ax2.set_xlabel("episode")
    ax2.set_ylabel("final secrecy rate (bits/s/Hz)")
    ax2.grid(alpha=0.3)
    _save(fig, out_path)


def plot_trace(csv_path, out_path, topology_csv=None):
    _, rows = _read_csv(csv_path)
    xs = [float(r[1]) for r in rows]
    ys = [float(r[2]) for r in rows]
    fig, ax = plt.subplots(figsize=(4.6, 4.4))
    if topology_csv and Path(topology_csv).exists():
        _, trows = _read_csv(topology_csv)
        users = [(float(r[2]), float(r[3])) for r in trows if r[0] == "user"]
        eves = [(float(r[2]), float(r[3])) for r in trows if r[0] == "eve"]
        if users:
            ax.scatter(*zip(*users), marker="o", s=40, label="users")
        if eves:
            ax.scatter(*zip(*eves), marker="x", s=40, c="tab:red", label="eavesdroppers")
    ax.plot(xs, ys, "-", lw=1.0, c="tab:green", label="UAV path")
    ax.scatter([xs[0]], [ys[0]], marker="s", c="k", s=40, label="start")
    ax.scatter([xs[-1]], [ys[-1]], marker="*", c="tab:purple", s=120, label="end")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("deployment trajectory")
    ax.legend(fontsize=8)
    ax.set_aspect("equal")
    _save(fig, out_path)


def plot_sweep(csv_path, out_path):
    _, rows = _read_csv(csv_path)
    sweep_name = rows[0][1] if rows else "value"
    series = defaultdict(lambda: ([], []))
    for r in rows:
        if int(r[5]) != 1:
            continue
        series[r[0]][0].append(float(r[2]))
        series[r[0]][1].append(float(r[3]))
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for scheme, (x, y) in sorted(series.items()):
        ax.plot(x, y, "o-", lw=1.2, label=scheme)
    if sweep_name in ("power", "noise"):
        ax.set_xscale("log")
    ax.set_xlabel(sweep_name)
    ax.set_ylabel("mean sum secrecy rate (bits/s/Hz)")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, out_path)


def plot_cdf(csv_path, out_path):
    _, rows = _read_csv(csv_path)
    series = defaultdict(lambda: ([], []))
    for r in rows:
        key = f"{r[0]} (K={r[1]})"
        series[key][0].append(float(r[2]))
        series[key][1].append(float(r[3]))
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for key, (x, y) in sorted(series.items()):
        ax.plot(x, y, lw=1.2, label=key)
    ax.set_xlabel("per-user secrecy rate (bits/s/Hz)")
    ax.set_ylabel("CDF")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, out_path)


def plot_deploy_compare(csv_path, out_path):
    _, rows = _read_csv(csv_path)
    topos = sorted({int(r[0]) for r in rows})
    strategies = []
    for r in rows:
        if r[1] not in strategies:
            strategies.append(r[1])
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    width = 0.8 / len(strategies)
    for j, strat in enumerate(strategies):
        vals = [
            next(float(r[4]) for r in rows if int(r[0]) == t and r[1] == strat)
            for t in topos
        ]
        ax.bar([t + j * width for t in topos], vals, width=width, label=strat)
    ax.set_xticks([t + 0.4 for t in topos])
    ax.set_xticklabels([f"topology {t}" for t in topos])
    ax.set_ylabel("secrecy rate (bits/s/Hz)")
    ax.legend(fontsize=8)
    _save(fig, out_path)


def plot_bench(csv_path, out_path):
    _, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    labels = [f"{r[0]}\nK={r[1]}" for r in rows]
    totals = [float(r[3]) for r in rows]
    ax.bar(range(len(rows)), totals, color="tab:blue")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("total seconds")
    ax.set_title("inference timing")
    _save(fig, out_path)
