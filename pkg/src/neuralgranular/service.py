"""HTTP/WebSocket inference service over a trained checkpoint.

The checkpoint is loaded once at startup and shared read-only; every request
that needs randomness carries its own seed and renders through a private
generator, so concurrent requests cannot observe each other's state. Audio
leaves as 32-bit float WAV bytes; latent matrices travel as plain JSON
arrays. A bounded semaphore caps simultaneous renders.
"""

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from fastapi import Body, FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .checkpoint import load_checkpoint
from .synthesis import (
    PathSpec,
    decode_embedding,
    free_path,
    interpolate_embeddings,
    resynthesize,
)
from .temporal import sample_prior
from .wavio import load_wav, wav_bytes

logger = logging.getLogger(__name__)

ENV_CHECKPOINT = "NGS_CHECKPOINT"
STREAM_CHUNK_SAMPLES = 8192


@dataclass
class ServiceConfig:
    checkpoint: str = None
    host: str = "127.0.0.1"
    port: int = 8765
    max_renders: int = 2
    default_seed: int = 0

    def __post_init__(self):
        if self.checkpoint is None:
            self.checkpoint = os.environ.get(ENV_CHECKPOINT)
        if self.checkpoint is None:
            raise ValueError(
                f"no checkpoint given and {ENV_CHECKPOINT} is not set"
            )
        if self.max_renders < 1:
            raise ValueError("max_renders must be >= 1")


class DecodeRequest(BaseModel):
    latents: list
    condition: object = None
    seed: Optional[int] = None


class SampleRequest(BaseModel):
    seed: Optional[int] = None
    condition: object = None
    noise_seed: Optional[int] = None


class InterpRequest(BaseModel):
    alpha: float
    e1: Optional[list] = None
    e2: Optional[list] = None
    e1_seed: Optional[int] = None
    e2_seed: Optional[int] = None
    condition: object = None
    noise_seed: Optional[int] = None


def _model_summary(ckpt):
    cfg = ckpt.config
    return {
        "variant": cfg.variant,
        "latent_dim": cfg.latent_dim,
        "embed_dim": cfg.embed_dim,
        "grain_size": cfg.grain.grain_size,
        "seq_len": cfg.grain.seq_len,
        "hop": cfg.grain.hop,
        "sample_rate": cfg.grain.sample_rate,
        "label_schema": list(cfg.label_schema),
        "has_temporal": ckpt.has_temporal,
    }


def _resolve_embedding(explicit, seed, embed_dim, name):
    if explicit is not None and seed is not None:
        raise ValueError(f"give either {name} or {name}_seed, not both")
    if explicit is not None:
        vec = np.asarray(explicit, dtype=np.float32).reshape(-1)
        if vec.shape[0] != embed_dim:
            raise ValueError(f"{name} must have {embed_dim} entries, got {vec.shape[0]}")
        return torch.as_tensor(vec)
    if seed is not None:
        return sample_prior(embed_dim, seed)
    raise ValueError(f"missing {name}: pass a vector or {name}_seed")


def create_app(config=None, checkpoint=None):
    """Build the FastAPI app around one read-only checkpoint."""
    if checkpoint is None:
        if config is None:
            config = ServiceConfig()
        checkpoint = load_checkpoint(config.checkpoint)
    elif config is None:
        config = ServiceConfig(checkpoint=str(checkpoint.path or "<in-memory>"))

    ckpt = checkpoint
    model = ckpt.model
    model.eval()
    sr = ckpt.config.grain.sample_rate
    render_slots = threading.BoundedSemaphore(config.max_renders)

    app = FastAPI(title="granular synthesis service")
    app.state.checkpoint = ckpt
    app.state.config = config

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError):
        return JSONResponse(status_code=400,
                            content={"error": "invalid_input", "detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "invalid_input", "detail": str(exc)})

    @app.exception_handler(Exception)
    async def _internal_error(_request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"error": "internal", "detail": str(exc)})

    def _wav_response(audio):
        return Response(content=wav_bytes(audio, sr), media_type="audio/wav")

    def _timed_render(route, fn):
        """Run one render inside the bounded pool and log its latency."""
        with render_slots:
            start = time.perf_counter()
            audio = fn()
            elapsed_ms = (time.perf_counter() - start) * 1e3
        seconds = np.asarray(audio).shape[-1] / sr
        logger.info("%s rendered %.2f s of audio in %.1f ms", route, seconds,
                    elapsed_ms)
        return audio

    def _seed(value):
        return config.default_seed if value is None else int(value)

    def _render_sample(req: SampleRequest):
        seed = _seed(req.seed)
        e = sample_prior(ckpt.config.embed_dim, seed)
        noise_seed = seed if req.noise_seed is None else int(req.noise_seed)
        return decode_embedding(e, model, ckpt.temporal,
                                condition=req.condition, noise_seed=noise_seed)

    def _render_interp(req: InterpRequest):
        d_e = ckpt.config.embed_dim
        e1 = _resolve_embedding(req.e1, req.e1_seed, d_e, "e1")
        e2 = _resolve_embedding(req.e2, req.e2_seed, d_e, "e2")
        if req.noise_seed is not None:
            noise_seed = int(req.noise_seed)
        elif req.e1_seed is not None:
            noise_seed = int(req.e1_seed)  # scrubbing from alpha=0 matches /sample
        else:
            noise_seed = config.default_seed
        return interpolate_embeddings(e1, e2, req.alpha, model, ckpt.temporal,
                                      condition=req.condition, noise_seed=noise_seed)

    def _render_decode(req: DecodeRequest):
        z = np.asarray(req.latents, dtype=np.float32)
        if z.ndim != 2 or z.shape[1] != ckpt.config.latent_dim:
            raise ValueError(
                f"latents must be a (g, {ckpt.config.latent_dim}) matrix, "
                f"got shape {z.shape}"
            )
        with torch.no_grad():
            wave = model.decode(torch.as_tensor(z), condition=req.condition,
                                noise_seed=_seed(req.seed))
        return wave.numpy().astype(np.float32)

    @app.get("/health")
    def health():
        return {"status": "ok", "model": _model_summary(ckpt)}

    @app.get("/model")
    def model_info():
        return {
            "config": ckpt.config.to_dict(),
            "label_schema": list(ckpt.config.label_schema),
            "has_temporal": ckpt.has_temporal,
            "output_samples": model.output_samples,
        }

    @app.post("/encode")
    def encode(body: bytes = Body(media_type="audio/wav")):
        audio, file_sr = load_wav(body)
        if file_sr != sr:
            raise ValueError(f"expected {sr} Hz audio, got {file_sr} Hz")
        from .corpus import slice_waveform

        with render_slots:
            sequences = []
            for seq in slice_waveform(audio, ckpt.config.grain):
                with torch.no_grad():
                    mu = model.encode(torch.as_tensor(seq.grains)).mu
                sequences.append(mu.numpy().astype(float).tolist())
        return {"latents": sequences, "num_sequences": len(sequences),
                "seq_len": ckpt.config.grain.seq_len,
                "latent_dim": ckpt.config.latent_dim}

    @app.post("/decode")
    def decode(req: DecodeRequest):
        return _wav_response(_timed_render("/decode", lambda: _render_decode(req)))

    @app.post("/sample")
    def sample(req: SampleRequest):
        return _wav_response(_timed_render("/sample", lambda: _render_sample(req)))

    @app.post("/interp")
    def interp(req: InterpRequest):
        return _wav_response(_timed_render("/interp", lambda: _render_interp(req)))

    @app.post("/resynth")
    def resynth(body: bytes = Body(media_type="audio/wav"),
                condition: str = None, seed: int = None):
        audio, file_sr = load_wav(body)
        if file_sr != sr:
            raise ValueError(f"expected {sr} Hz audio, got {file_sr} Hz")
        out = _timed_render("/resynth", lambda: resynthesize(
            audio, model, condition=condition, noise_seed=_seed(seed)))
        return _wav_response(out)

    def _render_for_stream(request):
        kind = request.get("type")
        if kind == "sample":
            return _render_sample(SampleRequest(**{
                k: request[k] for k in ("seed", "condition", "noise_seed")
                if k in request
            }))
        if kind == "interp":
            return _render_interp(InterpRequest(**{
                k: request.get(k)
                for k in ("alpha", "e1", "e2", "e1_seed", "e2_seed",
                          "condition", "noise_seed")
                if k in request
            }))
        if kind == "decode":
            return _render_decode(DecodeRequest(**{
                k: request.get(k) for k in ("latents", "condition", "seed")
                if k in request
            }))
        if kind == "path":
            spec = PathSpec.from_dict(request["spec"])
            return free_path(spec, model, condition=request.get("condition"),
                             seed=int(request.get("seed", config.default_seed)))
        raise ValueError(f"unknown stream request type {kind!r}")

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                request = await ws.receive_json()
                try:
                    from starlette.concurrency import run_in_threadpool

                    def render():
                        return _timed_render("/stream", lambda: _render_for_stream(request))

                    audio = await run_in_threadpool(render)
                except (ValueError, KeyError, TypeError) as exc:
                    await ws.send_json({"type": "error", "error": "invalid_input",
                                        "detail": str(exc)})
                    continue
                audio = np.asarray(audio, dtype=np.float32)
                n_chunks = max(1, int(np.ceil(audio.shape[0] / STREAM_CHUNK_SAMPLES)))
                await ws.send_json({
                    "type": "header",
                    "sample_rate": sr,
                    "total_samples": int(audio.shape[0]),
                    "chunks": n_chunks,
                })
                for k in range(n_chunks):
                    chunk = audio[k * STREAM_CHUNK_SAMPLES:(k + 1) * STREAM_CHUNK_SAMPLES]
                    await ws.send_bytes(chunk.tobytes())
                await ws.send_json({"type": "done"})
        except WebSocketDisconnect:
            pass

    return app


def serve(config):
    """Run the service until interrupted."""
    import uvicorn

    # uvicorn only configures its own loggers; give ours a handler so the
    # per-render latency lines actually reach the console
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s:     %(message)s")
    app = create_app(config=config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
