"""HTTP project service backing the annotator UI and batch workflows.

Single project, single training job at a time. Predictions are computed on
demand and cached keyed by the checkpoint file hash; corrections posted here
use the exact schema the hitl module reads from disk.
"""
from __future__ import annotations

import hashlib
import io
import json
import threading
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from .data import load_dataset
from .errors import MalformedJson
from .evalharness import evaluate
from .hitl import CorrectionSet
from .imaging import encode_features
from .model import load_checkpoint, predict_contour, save_checkpoint
from .training import TrainConfig, finetune_hitl


class Project:
    """Project state: dataset, current checkpoint, one-slot job queue."""

    def __init__(self, root, checkpoint_path=None):
        self.root = Path(root)
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path \
            else self.root / "checkpoint.bin"
        self.lock = threading.RLock()
        self.jobs: dict = {}
        self._job_counter = 0
        self._active_job: str | None = None
        self._pred_cache: dict = {}
        self.reload()

    def reload(self):
        self.dataset = load_dataset(self.root)

    # -- checkpoint / prediction ------------------------------------------

    def checkpoint_hash(self) -> str:
        if not self.checkpoint_path.exists():
            raise FileNotFoundError(self.checkpoint_path)
        return hashlib.sha256(self.checkpoint_path.read_bytes()).hexdigest()

    def predict(self, image_id: str):
        key = (self.checkpoint_hash(), image_id)
        with self.lock:
            if key in self._pred_cache:
                return self._pred_cache[key]
        params = load_checkpoint(self.checkpoint_path)
        item = self.dataset.get(image_id)
        contour = predict_contour(params, item.image,
                                  encode_features(item.image),
                                  self.dataset.exemplar.contour)
        with self.lock:
            self._pred_cache[key] = contour
        return contour

    # -- corrections -------------------------------------------------------

    def save_corrections(self, image_id: str, cset: CorrectionSet):
        with self.lock:
            path = self.root / "corrections" / f"{image_id}.json"
            path.parent.mkdir(exist_ok=True)
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(cset.to_json(), sort_keys=True,
                                      separators=(",", ":")), encoding="utf-8")
            tmp.replace(path)
            self.reload()

    # -- jobs --------------------------------------------------------------

    def start_finetune(self, cfg: TrainConfig) -> str:
        with self.lock:
            if self._active_job is not None \
                    and self.jobs[self._active_job]["status"] == "running":
                raise RuntimeError("a job is already running")
            self._job_counter += 1
            job_id = f"job{self._job_counter:04d}"
            self.jobs[job_id] = {"id": job_id, "status": "running",
                                 "epoch": 0, "epochs": cfg.epochs, "error": None}
            self._active_job = job_id
        thread = threading.Thread(target=self._run_finetune, args=(job_id, cfg),
                                  daemon=True)
        thread.start()
        return job_id

    def _run_finetune(self, job_id: str, cfg: TrainConfig):
        try:
            params = load_checkpoint(self.checkpoint_path)
            self.reload()
            params, log = finetune_hitl(params, self.dataset, cfg)
            # atomic checkpoint swap
            tmp = self.checkpoint_path.with_suffix(".bin.tmp")
            save_checkpoint(params, tmp)
            tmp.replace(self.checkpoint_path)
            with self.lock:
                self.jobs[job_id].update(status="done", epoch=cfg.epochs)
        except Exception as e:  # job failures surface via the status endpoint
            with self.lock:
                self.jobs[job_id].update(
                    status="failed",
                    error=f"{type(e).__name__}: {e}\n{traceback.format_exc(limit=3)}")


def create_app(project: Project) -> FastAPI:
    app = FastAPI(title="ctseg project service")

    def get_item_or_404(image_id: str):
        try:
            return project.dataset.get(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")

    @app.get("/api/images")
    def list_images():
        return [{"id": it.image_id,
                 "corrected": it.corrections is not None,
                 "is_exemplar": it.image_id == project.dataset.exemplar_id}
                for it in project.dataset.items]

    @app.get("/api/images/{image_id}")
    def render_image(image_id: str):
        from PIL import Image

        item = get_item_or_404(image_id)
        arr = np.round(item.image.values * 255).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(arr, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/api/predictions/{image_id}")
    def prediction(image_id: str):
        get_item_or_404(image_id)
        try:
            contour = project.predict(image_id)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="no checkpoint available")
        return contour.to_json()

    @app.post("/api/corrections/{image_id}")
    async def post_corrections(image_id: str, request: Request):
        get_item_or_404(image_id)
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="body is not valid JSON")
        try:
            cset = CorrectionSet.from_json(body)
        except MalformedJson as e:
            raise HTTPException(status_code=400, detail=str(e))
        if cset.image_id != image_id:
            raise HTTPException(status_code=400,
                                detail="image_id in body does not match URL")
        project.save_corrections(image_id, cset)
        return {"status": "saved", "segments": len(cset)}

    @app.post("/api/finetune")
    def start_finetune(cfg: dict | None = None):
        base = TrainConfig(**(cfg or {})) if cfg else _default_finetune_config(project)
        try:
            job_id = project.start_finetune(base)
        except RuntimeError as e:
            raise HTTPException(status_code=409, detail=str(e))
        return {"job": job_id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        with project.lock:
            if job_id not in project.jobs:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
            return dict(project.jobs[job_id])

    @app.get("/api/metrics")
    def metrics():
        if not all(it.contour is not None for it in project.dataset.items):
            raise HTTPException(status_code=404, detail="no ground truth available")
        try:
            params = load_checkpoint(project.checkpoint_path)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="no checkpoint available")
        report = evaluate(params, project.dataset)
        return {"aggregate": report.to_json(),
                "per_image": [{"id": r[0], "iou": r[1], "hd": r[2]}
                              for r in report.rows]}

    return app


def _default_finetune_config(project: Project) -> TrainConfig:
    from .training import DESK_PRESET

    params = load_checkpoint(project.checkpoint_path)
    return replace(DESK_PRESET,
                   n_vertices=params.config.n_vertices,
                   gcn_blocks=params.config.gcn_blocks,
                   hidden_channels=params.config.hidden_channels,
                   epochs=20)


def serve(project: Project, port: int = 8765, host: str = "127.0.0.1"):
    import uvicorn

    uvicorn.run(create_app(project), host=host, port=port)
