"""Render trajectory files as three stacked panels: sigma_x, active count, eps^2.

    python -m atvmc.plotting output/trajectory.csv [more.csv ...] -o panels.png

Needs matplotlib (``pip install artifact[plot]``). A ``comparison.csv`` next to
the first trajectory adds the exact sigma_x as a dashed line.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .io import read_trajectory


def _column(rows, name):
    return np.array([float(r[name]) for r in rows])


def plot_trajectories(paths, output, labels=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_x, ax_n, ax_e) = plt.subplots(3, 1, sharex=True, figsize=(6, 8))
    labels = labels or [Path(p).stem for p in paths]
    for path, label in zip(paths, labels):
        _, _, rows = read_trajectory(path)
        t = _column(rows, "time")
        ax_x.plot(t, _column(rows, "sigma_x"), label=label)
        ax_n.step(t, _column(rows, "active_count"), where="post", label=label)
        line, = ax_e.semilogy(t, _column(rows, "epsilon_sq"), label=label)
        ax_e.semilogy(t, _column(rows, "lambda_lite_sq"), "--", color=line.get_color(), lw=0.8)

    comparison = Path(paths[0]).with_name("comparison.csv")
    if comparison.exists():
        _, _, rows = read_trajectory(comparison)
        ax_x.plot(_column(rows, "time"), _column(rows, "sigma_x_exact"), "k--", label="exact")

    ax_x.set_ylabel(r"$\sigma_x$")
    ax_n.set_ylabel("active parameters")
    ax_e.set_ylabel(r"$\varepsilon^2$")
    ax_e.set_xlabel("t J")
    ax_x.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(output, dpi=150)
    plt.close(fig)
    return output


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("trajectories", nargs="+")
    p.add_argument("-o", "--output", default="panels.png")
    args = p.parse_args(argv)
    print(plot_trajectories(args.trajectories, args.output))


if __name__ == "__main__":
    main()
