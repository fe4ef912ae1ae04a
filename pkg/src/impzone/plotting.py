"""Static figures of sets and trajectories (files only, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

plt.rcParams["figure.dpi"] = 120
plt.rcParams["savefig.bbox"] = "tight"
plt.rcParams["axes.linewidth"] = 0.6
plt.rcParams["font.size"] = 9


def _patch(ax, P, **kw):
    if P is None or P.is_empty or P.dim != 2:
        return
    V = P.vertices
    if len(V) == 1:
        ax.plot(V[0, 0], V[0, 1], "o", color=kw.get("edgecolor", "k"), label=kw.get("label"))
        return
    if len(V) == 2:
        ax.plot(V[:, 0], V[:, 1], "-", lw=2, color=kw.get("edgecolor", "k"), label=kw.get("label"))
        return
    ax.add_patch(Polygon(V, closed=True, **kw))


def _finish(ax, bounds):
    (x0, y0), (x1, y1) = bounds
    px, py = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    ax.set_xlim(x0 - px, x1 + px)
    ax.set_ylim(y0 - py, y1 + py)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.legend(loc="best", fontsize=7, frameon=False)


def plot_sets(sets, target, path):
    """State-side and target-side sets in one panel each."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    ax = axes[0]
    X = sets.system.state_set
    _patch(ax, X, facecolor="white", edgecolor="k", label="X")
    _patch(ax, sets.state_inner, facecolor="0.85", edgecolor="0.5", label="admissible (inner)")
    _patch(ax, sets.state_inv, facecolor="0.55", edgecolor="0.3", label="invariant")
    if sets.ces_segment is not None:
        a, b = sets.ces_segment
        ax.plot([a[0], b[0]], [a[1], b[1]], "k--", lw=1, label="equilibria")
    _finish(ax, X.bounding_box() if X.is_bounded else sets.state_inner.bounding_box())
    ax.set_title("state constraints")
    ax = axes[1]
    _patch(ax, target, facecolor="white", edgecolor="r", label="target")
    _patch(ax, sets.target_inner, facecolor="#bfe6ef", edgecolor="c", label="admissible (inner)")
    _patch(ax, sets.target_inv, facecolor="#8fd18f", edgecolor="g", label="invariant")
    _patch(ax, sets.ices_state, edgecolor="orange", label="impulsive equilibria")
    _finish(ax, target.bounding_box())
    ax.set_title("target zone")
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_trajectory(traj, sets, target, path):
    """Phase portrait with dense flow and post-jump states, and time series."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    ax = axes[0]
    _patch(ax, sets.system.state_set, facecolor="white", edgecolor="k", label="X")
    _patch(ax, target, facecolor="white", edgecolor="r", label="target")
    _patch(ax, sets.target_inv, facecolor="#8fd18f", edgecolor="g", label="invariant")
    for k in range(traj.steps):
        ax.plot(traj.dense_x[k, :, 0], traj.dense_x[k, :, 1], "b-", lw=0.8)
        ax.plot([traj.pre[k, 0], traj.post[k + 1, 0]], [traj.pre[k, 1], traj.post[k + 1, 1]], "b:", lw=0.8)
    ax.plot(traj.post[:, 0], traj.post[:, 1], "bo", ms=3, label="post-jump")
    _finish(ax, sets.system.state_set.bounding_box())
    ax = axes[1]
    t = traj.dense_t.ravel()
    for i in range(traj.post.shape[1]):
        ax.plot(t, traj.dense_x[:, :, i].ravel(), lw=0.9, label=f"$x_{i + 1}$")
    tk = np.arange(traj.steps) * traj.period
    for j in range(traj.inputs.shape[1]):
        ax.step(tk, traj.inputs[:, j], where="post", lw=0.9, label=f"$u_{j + 1}$")
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=7, frameon=False)
    fig.savefig(path)
    plt.close(fig)
    return path
