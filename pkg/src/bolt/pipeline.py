"""Outfit pipeline: proxy, transfer, pattern, progressive drape, reconstitution, rig weights."""

from __future__ import annotations

import json
import logging
import os
import shutil
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig
from .drape import progressive_drape
from .errors import BoltError, StageError
from .io import (REPORT_FORMAT, BodyBundle, OutfitManifest, load_body_bundle, load_garment_bundle,
                 load_manifest, save_garment_bundle, save_weights, write_obj)
from .pattern.estimator import PatternOptimizer
from .proxy import generate_proxy, reconstitute
from .rig import SkinWeightTransfer
from .sdf import dump_sdf
from .transfer.estimator import GarmentTransfer

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    status: str = "ok"
    failed_stage: str | None = None
    failed_garment: str | None = None
    error: str | None = None
    timings: dict = field(default_factory=dict)
    transfer_jobs: list = field(default_factory=list)
    garments: dict = field(default_factory=dict)
    drape_order: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    seed: int = 0
    config: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__
    format: str = REPORT_FORMAT

    @property
    def ok(self):
        return self.status == "ok"

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


def _slug(i, name):
    keep = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
    return f"{i:02d}_{keep}"


class _Run:
    """Mutable state of one pipeline run; stages fill it in order."""

    def __init__(self, manifest, config, workdir, threads, emit_debug_sdf, emit_frames, report):
        self.m = manifest
        self.cfg = config
        self.work = workdir
        self.threads = max(1, int(threads))
        self.emit_debug_sdf = emit_debug_sdf
        self.emit_frames = emit_frames
        self.report = report
        self.stage = "load"
        self.garment = None

    @contextmanager
    def stage_of(self, stage, garment=None):
        self.stage, self.garment = stage, garment
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.report.timings[stage] = self.report.timings.get(stage, 0.0) + \
                time.perf_counter() - t0

    def _map(self, fn, items):
        if self.threads == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    def load(self):
        with self.stage_of("load"):
            self.bodies = {}
            for name, ref in sorted(self.m.bodies.items()):
                self.garment = None
                self.bodies[name] = load_body_bundle(self.m.resolve(ref))
            self.detailed = []
            for e in self.m.garments:
                self.garment = e.bundle
                g = load_garment_bundle(self.m.resolve(e.bundle))
                if e.layer is not None:
                    g = replace(g, layer=e.layer)
                self.detailed.append(g)
            self.names = [_slug(i, g.name) for i, g in enumerate(self.detailed)]
            for n, g in zip(self.names, self.detailed):
                self.report.garments[n] = {"name": g.name, "layer": int(g.layer)}

    def proxies(self):
        with self.stage_of("proxy"):
            self.proxy, self.pmaps = [], []
            for n, g, e in zip(self.names, self.detailed, self.m.garments):
                self.garment = n
                p, pm = generate_proxy(g, e.drop_tags)
                self.proxy.append(p)
                self.pmaps.append(pm)
                self.report.garments[n]["proxy"] = {
                    "dropped_vertices": int(len(pm.dropped)),
                    "triangles": int(p.mesh3d.n_triangles),
                    "detailed_triangles": int(g.mesh3d.n_triangles)}

    def transfer(self):
        target: BodyBundle = self.bodies[self.m.target]
        jobs = {}
        for i, e in enumerate(self.m.garments):
            jobs.setdefault(e.source, []).append(i)

        def run(item):
            src, idx = item
            pts = np.vstack([self.proxy[i].mesh3d.positions for i in idx])
            est = GarmentTransfer.from_config(self.cfg.transfer)
            est.fit(self.bodies[src].mesh, target.mesh, points=pts)
            return est, [est.transform(self.proxy[i].mesh3d.positions) for i in idx]

        with self.stage_of("transfer", ",".join(sorted(jobs))):
            items = sorted(jobs.items())
            results = self._map(run, items)
            self.moved = [None] * len(self.proxy)
            for (src, idx), (est, moved) in zip(items, results):
                rep = est.report_.to_dict()
                self.report.transfer_jobs.append({
                    "source": src, "target": self.m.target,
                    "garments": [self.names[i] for i in idx], **rep})
                for i, X in zip(idx, moved):
                    self.moved[i] = X
                    d = float(np.linalg.norm(X - self.proxy[i].mesh3d.positions, axis=1).max())
                    self.report.garments[self.names[i]]["transfer"] = {
                        "source": src, "outer_iterations": rep["outer_iterations"],
                        "final_gap": rep["gap_history"][-1], "max_displacement": d}

    def pattern(self):
        def run(i):
            g = self.proxy[i]
            if not self.cfg.optimize_pattern:
                return g.layout2d.positions2d, None
            opt = PatternOptimizer.from_config(self.cfg.pattern).fit(g)
            return opt.transform(self.moved[i]), opt.report_

        with self.stage_of("pattern"):
            self.ready = []
            results = self._map(run, list(range(len(self.proxy))))
            for i, (x, rep) in enumerate(results):
                self.garment = self.names[i]
                g = self.proxy[i].with_positions(self.moved[i]).with_layout(x).reseamed()
                self.ready.append(g)
                if rep is not None:
                    self.report.garments[self.names[i]]["pattern"] = {
                        "iterations": rep.iterations, "converged": rep.converged,
                        "final_primal": rep.primal_history[-1] if rep.primal_history else 0.0,
                        "final_dual": rep.dual_history[-1] if rep.dual_history else 0.0,
                        "seam_length_deltas": rep.seam_length_deltas,
                        "max_seam_length_delta": rep.max_seam_length_delta}

    def _detailed_at(self, i, proxy_positions):
        g = reconstitute(self.detailed[i], proxy_positions, self.pmaps[i])
        uv = self.detailed[i].layout2d.positions2d.copy()
        uv[self.pmaps[i].kept] = self.ready[i].layout2d.positions2d
        return g.with_layout(uv)

    def drape(self):
        sim = self.cfg.sim
        target = self.bodies[self.m.target].mesh

        def write_frame(i, f, X):
            d = self._detailed_at(i, X)
            write_obj(self.work / "frames" / self.names[i] / f"frame_{f:03d}.obj",
                      d.mesh3d.positions, d.mesh3d.triangles)

        def write_sdf(i, s):
            dump_sdf(s, self.work / "debug" / f"sdf_before_{self.names[i]}.bin")

        on_frame = write_frame if self.emit_frames else None
        on_sdf = write_sdf if self.emit_debug_sdf else None
        with self.stage_of("drape"):
            res = progressive_drape(
                self.ready, target, sim.sim_params(), sim.frames, None, self.cfg.sdf.resolution,
                self.cfg.sdf.margin, self.cfg.sdf.winding_threshold, self.cfg.sdf.union_mode,
                details=lambda i, out: self._detailed_at(i, out.mesh3d.positions),
                rest_curvature=sim.rest_curvature, mesh_colliders=sim.mesh_colliders,
                on_frame=on_frame, on_sdf=on_sdf, final_union=self.emit_debug_sdf)
            if self.emit_debug_sdf:
                dump_sdf(res.sdf, self.work / "debug" / "sdf_final.bin")
            self.draped = res.detailed
            self.report.drape_order = [self.names[i] for i in res.order]
            for i, st in zip(res.order, res.layers):
                d = st.to_dict()
                d.pop("telemetry")
                d["frames_telemetry"] = [{k: t[k] for k in ("frame", "max_penetration",
                                                            "kinetic_energy")} for t in st.telemetry]
                self.report.garments[self.names[i]]["drape"] = d
                if st.warning:
                    self.report.warnings.append(st.warning)

    def rig(self):
        target = self.bodies[self.m.target]
        self.weights = [None] * len(self.draped)
        if not self.cfg.transfer_rig:
            return
        if target.weights is None:
            self.report.warnings.append(f"target body '{self.m.target}' has no rig.json; "
                                        "skipping weight transfer")
            return
        with self.stage_of("rig"):
            est = SkinWeightTransfer(**asdict(self.cfg.rig)).fit(target.mesh, target.weights)
            for i, g in enumerate(self.draped):
                self.garment = self.names[i]
                self.weights[i] = est.transform(g.mesh3d, g.seams)
                self.report.garments[self.names[i]]["rig"] = {
                    "fallback_fraction": est.fallback_fraction_,
                    "joints": len(self.weights[i].joints)}

    def write(self):
        with self.stage_of("write"):
            for i, g in enumerate(self.draped):
                d = self.work / "garments" / self.names[i]
                save_garment_bundle(g, d)
                self.report.outputs.append(f"garments/{self.names[i]}/garment.obj")
                if self.weights[i] is not None:
                    save_weights(self.weights[i], d / "weights.json")


def _publish(tmp: Path, out: Path):
    """Move ``tmp`` to ``out``; a previous run at ``out`` is replaced only after success."""
    old = None
    if out.exists():
        old = out.with_name(f".{out.name}.old-{os.getpid()}")
        os.replace(out, old)
    os.replace(tmp, out)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def run_pipeline(manifest, out_dir, config: PipelineConfig | dict | None = None, frames=None,
                 threads=1, emit_debug_sdf=False, emit_frames=False, seed=0) -> RunReport:
    """Run an outfit end to end and write the output bundle to ``out_dir``.

    ``config`` overrides are layered on top of the manifest's ``config``
    section. Stage failures do not raise: the report names the failing stage
    and the partial outputs land under ``out_dir/failed``.
    """
    out = Path(out_dir).resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp-{os.getpid()}")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    report = RunReport(seed=int(seed))
    t_all = time.perf_counter()
    run = None
    try:
        try:
            m = manifest if isinstance(manifest, OutfitManifest) else load_manifest(manifest)
            cfg = PipelineConfig().merged(m.config)
            if isinstance(config, PipelineConfig):
                cfg = config
            elif config:
                cfg = cfg.merged(config)
            if frames is not None:
                cfg = cfg.with_frames(frames)
            report.config = cfg.to_dict()
        except BoltError as exc:
            raise StageError("load", None, exc) from exc
        run = _Run(m, cfg, tmp, threads, emit_debug_sdf, emit_frames, report)
        for step in (run.load, run.proxies, run.transfer, run.pattern, run.drape, run.rig,
                     run.write):
            try:
                step()
            except StageError:
                raise
            except Exception as exc:
                raise StageError(run.stage, run.garment, exc) from exc
    except StageError as exc:
        report.status = "failed"
        report.failed_stage = exc.stage
        report.failed_garment = exc.garment
        report.error = f"{type(exc.cause).__name__}: {exc.cause}"
        log.error("%s", exc)
        log.debug("%s", "".join(traceback.format_exception(exc.cause)))
        failed = tmp / "failed"
        failed.mkdir()
        for child in sorted(tmp.iterdir()):
            if child.name != "failed":
                os.replace(child, failed / child.name)
        if run is not None and run.stage in ("rig", "write") and getattr(run, "draped", None):
            for i, g in enumerate(run.draped):
                save_garment_bundle(g, failed / "garments" / run.names[i])
    report.timings["total"] = time.perf_counter() - t_all
    (tmp / "report.json").write_text(report.dumps())
    _publish(tmp, out)
    return report


def format_report(report: dict) -> str:
    """Plain-text tables of a report dictionary."""
    lines = [f"status: {report.get('status')}"]
    if report.get("failed_stage"):
        lines.append(f"failed stage: {report['failed_stage']} "
                     f"(garment {report.get('failed_garment')}): {report.get('error')}")
    lines.append("")
    lines.append(f"{'stage':<12}{'seconds':>10}")
    for k, v in report.get("timings", {}).items():
        lines.append(f"{k:<12}{v:>10.2f}")
    rows = []
    for name, g in report.get("garments", {}).items():
        tr = g.get("transfer", {})
        pa = g.get("pattern", {})
        dr = g.get("drape", {})
        rg = g.get("rig", {})
        rows.append((name, str(g.get("layer", "")), str(tr.get("outer_iterations", "-")),
                     _f(tr.get("final_gap")), _f(pa.get("max_seam_length_delta")),
                     _f(dr.get("max_penetration")), _f(rg.get("fallback_fraction"))))
    if rows:
        head = ("garment", "layer", "outer", "gap_cm", "seam_delta", "max_pen_cm", "fallback")
        widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(head)]
        lines.append("")
        lines.append("  ".join(h.ljust(w) for h, w in zip(head, widths)))
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def _f(x):
    if x is None:
        return "-"
    try:
        return f"{float(x):.4g}"
    except (TypeError, ValueError):
        return str(x)
