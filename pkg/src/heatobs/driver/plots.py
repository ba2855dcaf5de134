"""Report figures rendered to files (Agg backend, no display needed)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..geometry import Polygon  # noqa: E402


def _closed(poly: Polygon) -> np.ndarray:
    return np.vstack([poly.vertices, poly.vertices[:1]])


def plot_fronts(report, domain: Polygon, path, truth: list[Polygon] | None = None) -> None:
    """Successive fronts (light to dark), the true obstacle dashed and the outer boundary."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot(*_closed(domain).T, color="k", lw=1.2)
    recs = report.records
    cmap = plt.get_cmap("viridis")
    for i, rec in enumerate(recs):
        colour = cmap(i / max(len(recs) - 1, 1))
        last = i == len(recs) - 1
        for poly in rec.fronts:
            ax.plot(*_closed(poly).T, color="tab:red" if last else colour, lw=1.8 if last else 0.7)
    for poly in truth or []:
        ax.plot(*_closed(poly).T, "k--", lw=1.2)
    ax.set_aspect("equal")
    ax.set_title(f"{len(recs) - 1} iterations ({report.stop_reason})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(report, path) -> None:
    it = [r.iteration for r in report.records]
    fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
    ax[0].plot(it, [r.hausdorff for r in report.records], "o-")
    ax[0].set_xlabel("iteration")
    ax[0].set_ylabel("Hausdorff distance to truth")
    ax[1].semilogy(it[1:], [r.misfit for r in report.records[1:]], "s-", label="data misfit")
    ax[1].semilogy(it[1:], [r.residual for r in report.records[1:]], "^-", label="PDE residual")
    ax[1].set_xlabel("iteration")
    ax[1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_field(mesh, values, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    tpc = ax.tripcolor(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles, values, shading="gouraud")
    fig.colorbar(tpc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
