"""HTTP service exposing inference and kernel inspection.

Endpoints:
    POST /api/process   multipart (file: WAV, control: float in [0,1])
                        -> processed WAV bytes; timing and effect strength
                        in X-Processing-Time-Ms / X-Magnitude-Delta-L1
    GET  /api/kernel    -> KernelReport JSON
    GET  /api/health    -> status, checkpoint digest, uptime

The checkpoint is loaded once at startup and never mutated, so request
handlers share it freely. Errors return {"error": {"code", "message"}}.
"""

from __future__ import annotations

import hashlib
import logging
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, File, Form, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .audio_io import read_wav_bytes, write_wav_bytes
from .errors import CakError
from .inferencer import inspect_kernel, render
from .trainer import Checkpoint, load_checkpoint

log = logging.getLogger(__name__)

MAX_UPLOAD_BYTES = 50 * 1024 * 1024


class DominantCell(BaseModel):
    row: int
    col: int
    weight: float


class KernelResponse(BaseModel):
    schema_version: int
    kernel: list[list[float]]
    bias: float
    scale: float
    band_response: list[float]
    dominant: DominantCell


class HealthResponse(BaseModel):
    status: str
    checkpoint_digest: str | None
    uptime_seconds: float


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def create_app(checkpoint_path=None, ui_dir=None) -> FastAPI:
    """Build the service app. A missing checkpoint leaves it degraded."""
    ckpt: Checkpoint | None = None
    digest: str | None = None
    if checkpoint_path is not None:
        path = Path(checkpoint_path)
        if path.is_file():
            ckpt = load_checkpoint(path)
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
        else:
            log.warning("checkpoint %s not found; service starts degraded", checkpoint_path)

    app = FastAPI(title="cakaudio", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Processing-Time-Ms", "X-Control-Value", "X-Magnitude-Delta-L1"],
    )
    started = time.monotonic()

    @app.post("/api/process")
    async def process(file: UploadFile = File(...), control: float = Form(...)):
        if ckpt is None:
            return _error(500, "ERR:NO_CHECKPOINT", "no checkpoint loaded")
        data = await file.read()
        if len(data) > MAX_UPLOAD_BYTES:
            return _error(413, "ERR:TOO_LARGE", f"payload exceeds {MAX_UPLOAD_BYTES} bytes")
        if not 0.0 <= control <= 1.0:
            return _error(400, "ERR:BAD_CONTROL", "control must lie in [0, 1]")
        try:
            clip = read_wav_bytes(data, source_id=file.filename or "upload")
        except CakError as exc:
            return _error(400, "ERR:BAD_WAV", str(exc))
        t0 = time.perf_counter()
        try:
            out, stats = render(clip, control, ckpt)
        except CakError as exc:
            return _error(400, f"ERR:{exc.code}", str(exc))
        except Exception:
            incident = uuid.uuid4().hex[:12]
            log.exception("processing failed (incident %s)", incident)
            return _error(500, "ERR:INTERNAL", f"internal error, incident {incident}")
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        return Response(
            content=write_wav_bytes(out),
            media_type="audio/wav",
            headers={
                "X-Processing-Time-Ms": f"{elapsed_ms:.2f}",
                "X-Control-Value": f"{stats.control:g}",
                "X-Magnitude-Delta-L1": f"{stats.mag_delta_l1:.9e}",
            },
        )

    @app.get("/api/kernel", response_model=KernelResponse)
    def kernel():
        if ckpt is None:
            return _error(500, "ERR:NO_CHECKPOINT", "no checkpoint loaded")
        report = inspect_kernel(ckpt)
        return KernelResponse(
            schema_version=report.schema_version,
            kernel=report.kernel,
            bias=report.bias,
            scale=report.scale,
            band_response=report.band_response,
            dominant=DominantCell(**report.dominant),
        )

    @app.get("/api/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok" if ckpt is not None else "degraded",
            checkpoint_digest=digest,
            uptime_seconds=time.monotonic() - started,
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
