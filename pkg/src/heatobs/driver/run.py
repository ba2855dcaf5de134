"""Full reconstruction loop and its on-disk artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..forward import CauchyData, DirichletDataSpec, ForwardHistory, add_noise, extract_cauchy, solve_forward
from ..geometry import Polygon, hausdorff_curves, sample_polar_boundary, write_polygons
from ..levelset import LevelSetParams, ObstacleState, compute_velocity, front_polygon, initial_state, update_obstacle
from ..mesh import TimeGrid, TriMesh, make_time_grid, tag_gamma, triangulate
from ..qr import QrParams, QrSolution, solve_qr
from ..spaces import write_vtk
from .config import ReconstructionConfig

log = logging.getLogger("heatobs")

FORWARD_TIME_REFINEMENT = 4
INVERSION_MESH_SEED = 0
FORWARD_MESH_SEED = 1


class ReconstructionFailed(RuntimeError):
    """A stage raised; ``report`` holds the iterations completed before it."""

    def __init__(self, report: "ReconstructionReport", cause: BaseException):
        super().__init__(f"reconstruction aborted after {len(report.records)} iterations: {cause}")
        self.report = report
        self.cause = cause


@dataclass
class IterationRecord:
    iteration: int
    hausdorff: float
    misfit: float
    residual: float
    seconds: float
    n_triangles: int
    movement: float
    fronts: list[Polygon] = field(repr=False, default_factory=list)
    containment_violations: int = 0
    monotone: bool = True


@dataclass
class ReconstructionReport:
    config: dict
    records: list[IterationRecord] = field(default_factory=list)
    final_state: ObstacleState | None = None
    stop_reason: str = ""
    seconds: float = 0.0
    truth: list[Polygon] = field(default_factory=list, repr=False)

    @property
    def iterations(self) -> int:
        """Outer iterations performed (the initial guess is record 0)."""
        return max(len(self.records) - 1, 0)

    @property
    def final_hausdorff(self) -> float:
        return self.records[-1].hausdorff if self.records else math.inf

    @property
    def final_fronts(self) -> list[Polygon]:
        return self.records[-1].fronts if self.records else []

    @property
    def monotone(self) -> bool:
        return all(r.monotone for r in self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "hausdorff", "misfit", "residual", "seconds"])
            for r in self.records:
                w.writerow([r.iteration, f"{r.hausdorff:.12g}", f"{r.misfit:.12g}",
                            f"{r.residual:.12g}", f"{r.seconds:.3f}"])


@dataclass(eq=False)
class Setup:
    inv_mesh: TriMesh
    fwd_mesh: TriMesh
    inv_grid: TimeGrid
    fwd_grid: TimeGrid
    truth: list[Polygon]


def build_setup(cfg: ReconstructionConfig) -> Setup:
    """Inversion mesh of the whole domain and an independent forward mesh with the true obstacle."""
    outer = sample_polar_boundary(cfg.domain, cfg.domain_segments)
    inv = tag_gamma(triangulate(outer, [], cfg.h_inv, seed=INVERSION_MESH_SEED), cfg.gamma_ranges)
    holes: list[Polygon] = []
    truth: list[Polygon] = []
    if cfg.obstacle is not None:
        for comp in cfg.obstacle.components():
            fine = sample_polar_boundary(comp, 720)
            n = cfg.obstacle_segments or max(12, int(math.ceil(fine.perimeter() / cfg.h_fwd)))
            holes.append(sample_polar_boundary(comp, n))
            truth.append(sample_polar_boundary(comp, 720))
    n_outer = max(cfg.domain_segments, int(round(cfg.domain_segments * cfg.h_inv / cfg.h_fwd)))
    fwd = triangulate(sample_polar_boundary(cfg.domain, n_outer), holes, cfg.h_fwd, seed=FORWARD_MESH_SEED)
    inv_grid = make_time_grid(cfg.T, cfg.n_time)
    fwd_grid = make_time_grid(cfg.T, FORWARD_TIME_REFINEMENT * cfg.n_time)
    return Setup(inv, fwd, inv_grid, fwd_grid, truth)


def generate_data(cfg: ReconstructionConfig, setup: Setup) -> tuple[ForwardHistory, CauchyData]:
    history = solve_forward(setup.fwd_mesh, setup.fwd_grid, DirichletDataSpec(cfg.data_kind))
    spec = "full" if not cfg.gamma_ranges else ",".join(f"{a:.6g}:{b:.6g}" for a, b in cfg.gamma_ranges)
    data = extract_cauchy(history, setup.inv_mesh, setup.inv_grid, gamma_spec=spec)
    return history, add_noise(data, cfg.delta, cfg.seed)


def true_obstacle_triangles(mesh: TriMesh, cfg: ReconstructionConfig) -> np.ndarray:
    if cfg.obstacle is None:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero([cfg.obstacle.contains(c) for c in mesh.centroids])


def containment_violations(mesh: TriMesh, obstacle_tris: np.ndarray, true_tris: np.ndarray) -> int:
    """True-obstacle triangles outside O_n that do not even touch O_n."""
    inside = np.zeros(mesh.n_triangles, dtype=bool)
    inside[obstacle_tris] = True
    missing = true_tris[~inside[true_tris]]
    if missing.size == 0:
        return 0
    touched = np.zeros(mesh.n_vertices, dtype=bool)
    touched[mesh.triangles[obstacle_tris].ravel()] = True
    return int(np.count_nonzero(~touched[mesh.triangles[missing]].any(axis=1)))


@contextmanager
def _log_to(path: Path | None):
    if path is None:
        yield
        return
    handler = logging.FileHandler(path, mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    prev = log.level
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    try:
        yield
    finally:
        log.removeHandler(handler)
        log.setLevel(prev)
        handler.close()


def _write_iteration(out: Path, n: int, state: ObstacleState, velocity, sol: QrSolution | None) -> None:
    write_polygons(out / f"front_{n:04d}.csv", front_polygon(state))
    if sol is not None:
        sol.write_diagnostics(out / f"qr_diagnostics_{n:04d}.csv")
    fields = {}
    if velocity is not None:
        fields["velocity"] = np.nan_to_num(velocity, nan=0.0)
    if state.phi is not None:
        fields["phi"] = np.nan_to_num(state.phi, nan=0.0)
    mask = np.zeros(state.mesh.n_vertices)
    if not state.empty:
        mask[state.view.parent_vertices] = 1.0
    fields["obstacle_vertex"] = mask
    write_vtk(out / f"fields_{n:04d}.vtk", state.mesh, fields)


def run_reconstruction(cfg: ReconstructionConfig, write: bool = True, figures: bool = True,
                       setup: Setup | None = None, data: CauchyData | None = None) -> ReconstructionReport:
    """Data generation, then QR solve / velocity / level-set shrink until the front stops moving."""
    out = Path(cfg.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    report = ReconstructionReport(cfg.echo())
    t_start = time.perf_counter()
    with _log_to(out / "run.log" if write else None):
        try:
            _loop(cfg, report, out if write else None, setup, data)
        except Exception as exc:
            report.seconds = time.perf_counter() - t_start
            report.stop_reason = f"error: {exc}"
            log.error("aborted: %s", exc)
            if write:
                report.write_csv(out / "report.csv")
            raise ReconstructionFailed(report, exc) from exc
        report.seconds = time.perf_counter() - t_start
        log.info("stopped (%s) after %d iterations, %.1f s", report.stop_reason, report.iterations, report.seconds)
    if write:
        report.write_csv(out / "report.csv")
        with open(out / "config.json", "w") as fh:
            json.dump(cfg.echo(), fh, indent=2, default=str)
        if figures:
            from .plots import plot_convergence, plot_fronts
            plot_fronts(report, sample_polar_boundary(cfg.domain, 400), out / "fronts.png", report.truth)
            plot_convergence(report, out / "convergence.png")
    return report


def _loop(cfg, report, out, setup, data) -> None:
    t0 = time.perf_counter()
    setup = setup or build_setup(cfg)
    mesh = setup.inv_mesh
    log.info("inversion mesh: %d vertices, %d triangles; forward mesh: %d vertices",
             mesh.n_vertices, mesh.n_triangles, setup.fwd_mesh.n_vertices)
    if data is None:
        _, data = generate_data(cfg, setup)
    if out is not None:
        data.to_csv(out / "cauchy.csv")
        mesh.write(out / "mesh_inv.txt")
        write_polygons(out / "truth.csv", setup.truth)
    report.truth = setup.truth
    true_tris = true_obstacle_triangles(mesh, cfg)
    state = initial_state(mesh, cfg.init_center, cfg.init_radius)

    def distance(fronts):
        return hausdorff_curves(fronts, setup.truth) if setup.truth else math.nan

    fronts = front_polygon(state)
    report.records.append(IterationRecord(0, distance(fronts), math.nan, math.nan,
                                          time.perf_counter() - t0, len(state.view.tri_ids), math.nan, fronts,
                                          containment_violations(mesh, state.view.tri_ids, true_tris)))
    if out is not None:
        _write_iteration(out, 0, state, None, None)
    qr_params = QrParams(cfg.epsilon, cfg.M)
    ls_params = LevelSetParams(cfg.f, cfg.velocity_window)
    report.stop_reason = "max_iter"
    for n in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        sol = solve_qr(state.exterior(), setup.inv_grid, data, qr_params)
        velocity = compute_velocity(sol, ls_params.window or cfg.velocity_window, n_parent=mesh.n_vertices)
        new = update_obstacle(state, velocity, ls_params)
        monotone = bool(np.isin(new.view.tri_ids, state.view.tri_ids).all())
        if not monotone:  # cannot happen by construction; recorded rather than silently accepted
            log.error("iteration %d enlarged the obstacle", n)
        fronts = front_polygon(new)
        movement = hausdorff_curves(front_polygon(state), fronts)
        rec = IterationRecord(n, distance(fronts), sol.misfit[-1], sol.residual[-1], time.perf_counter() - t0,
                              len(new.view.tri_ids), movement, fronts,
                              containment_violations(mesh, new.view.tri_ids, true_tris), monotone)
        report.records.append(rec)
        log.info("iteration %d: %d triangles, hausdorff %.4f, movement %.4f, misfit %.3e, residual %.3e, %.1f s",
                 n, rec.n_triangles, rec.hausdorff, movement, rec.misfit, rec.residual, rec.seconds)
        if out is not None:
            _write_iteration(out, n, new, velocity, sol)
        state = new
        report.final_state = state
        if state.empty:
            report.stop_reason = "empty"
            break
        if movement < cfg.stop_tolerance:
            report.stop_reason = "converged"
            break
    report.final_state = state
    if out is not None:
        write_polygons(out / "front_final.csv", front_polygon(state))
