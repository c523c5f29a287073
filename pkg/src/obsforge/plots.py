"""Matplotlib SVG rendering for trajectory files.

SVG output is byte-deterministic: fixed hash salt for element ids and no
date metadata in the header.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "obsforge"

import matplotlib.pyplot as plt
import numpy as np

from .system_model import ContractViolation

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_error_norm(data: dict, path, title: str = "Estimation error norm"):
    """One polyline: ||xhat - x|| against time (log scale when it spans
    decades)."""
    t, e = data["t"], data["err_norm"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, e, lw=1.2)
    pos = e[e > 0]
    if pos.size and pos.max() / max(pos.min(), 1e-300) > 1e3:
        ax.set_yscale("log")
    ax.set_xlabel("time")
    ax.set_ylabel(r"$\|\hat{x} - x\|$")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def _state_columns(data: dict) -> int:
    return sum(1 for k in data if k.startswith("x_") and not k.startswith("xhat"))


def plot_node_estimates(data: dict, node: int, path,
                        title: str | None = None):
    """True vs. estimated infectious and recovered fractions of one node
    (solid = true, dashed = estimate). State layout (x_I_1..n, x_R_1..n)."""
    n_x = _state_columns(data)
    if n_x % 2 != 0:
        raise ContractViolation("node plots need an even state dimension")
    n = n_x // 2
    if not (1 <= node <= n):
        raise ContractViolation(f"node must be in 1..{n}")
    t = data["t"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, data[f"x_{node}"], "-", color="tab:red", lw=1.2,
            label=f"$x_I^{{{node}}}$ true")
    ax.plot(t, data[f"xhat_{node}"], "--", color="tab:red", lw=1.2,
            label=f"$x_I^{{{node}}}$ estimate")
    ax.plot(t, data[f"x_{node + n}"], "-", color="tab:blue", lw=1.2,
            label=f"$x_R^{{{node}}}$ true")
    ax.plot(t, data[f"xhat_{node + n}"], "--", color="tab:blue", lw=1.2,
            label=f"$x_R^{{{node}}}$ estimate")
    ax.set_xlabel("time")
    ax.set_ylabel("fraction")
    ax.set_title(title or f"Node {node} state estimation")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def plot_all_nodes(data: dict, path, title: str = "Per-node estimates"):
    """Grid of per-node panels (true solid, estimate dashed)."""
    n_x = _state_columns(data)
    n = n_x // 2
    cols = min(n, 5)
    rows = (n + cols - 1) // cols
    t = data["t"]
    fig, axes = plt.subplots(rows, cols, figsize=(2.4 * cols, 2.0 * rows),
                             sharex=True, squeeze=False)
    for i in range(rows * cols):
        ax = axes[i // cols][i % cols]
        if i >= n:
            ax.axis("off")
            continue
        ax.plot(t, data[f"x_{i + 1}"], "-", color="tab:red", lw=0.9)
        ax.plot(t, data[f"xhat_{i + 1}"], "--", color="tab:red", lw=0.9)
        ax.plot(t, data[f"x_{i + 1 + n}"], "-", color="tab:blue", lw=0.9)
        ax.plot(t, data[f"xhat_{i + 1 + n}"], "--", color="tab:blue", lw=0.9)
        ax.set_title(f"node {i + 1}", fontsize=8)
        ax.tick_params(labelsize=7)
    fig.suptitle(title)
    _finish(fig, path)


def plot_columns(data: dict, spec: str, path):
    """Renderer behind the plot command: spec is `err_norm` or `node:i`."""
    if not data or len(data.get("t", ())) == 0:
        raise ContractViolation("empty trajectory data")
    if spec == "err_norm":
        plot_error_norm(data, path)
    elif spec.startswith("node:"):
        try:
            node = int(spec.split(":", 1)[1])
        except ValueError:
            raise ContractViolation(f"bad node index in {spec!r}")
        plot_node_estimates(data, node, path)
    else:
        raise ContractViolation(f"unknown column spec {spec!r}")


def plot_ell_histogram(values, path, paper_range=(7.5, 25.6)):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(values, bins=15, color="tab:gray", edgecolor="black", lw=0.5)
    ax.axvspan(*paper_range, color="tab:orange", alpha=0.2,
               label="reference range")
    ax.set_xlabel(r"estimated Lipschitz constant $\ell$")
    ax.set_ylabel("instances")
    ax.legend(fontsize=8)
    _finish(fig, path)
