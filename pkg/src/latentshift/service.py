"""HTTP JSON API for interactive invert / adapt / edit sessions.

Built on the standard library's threading HTTP server: sessions are
isolated (adaptation in one never touches another), long-running work
(latent optimization, adaptation) runs as polled jobs on worker
threads, and every generated image is served from a content-addressed
store so identical pixels always map to the same URL.

Adapted decoders live in a small LRU cache and are spooled to disk
checkpoints on eviction; the base model is read-only throughout.
"""

from __future__ import annotations

import json
import re
import tempfile
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from hashlib import sha256
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .adaptation import AdaptationConfig, adapt_decoder
from .checkpoint import load_checkpoint, save_checkpoint
from .editing import AttributeDirection, edit_latent, load_directions
from .errors import LatentShiftError
from .inversion import LatentOptConfig, project_latent_opt
from .model import GenerativeAutoencoder
from .pngio import decode_png, encode_png

MAX_UPLOAD_BYTES = 8_000_000
API = "/api/v1"


@dataclass
class Job:
    job_id: str
    kind: str                   # "latent_opt" | "adapt"
    status: str = "queued"      # queued -> running -> done | failed
    progress: float = 0.0
    loss_curve: list = field(default_factory=list)
    error: str | None = None
    result: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        with self.lock:
            out = {"job_id": self.job_id, "kind": self.kind, "status": self.status,
                   "progress": self.progress, "loss_curve": list(self.loss_curve)}
            if self.error is not None:
                out["error"] = self.error
            if self.result is not None:
                out["result"] = dict(self.result)
            return out


@dataclass
class Session:
    session_id: str
    input_image: np.ndarray | None = None
    latent: np.ndarray | None = None
    latent_id: str | None = None
    adapted: bool = False
    busy_job: str | None = None
    created_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class ServiceState:
    """All mutable service state behind one coarse lock plus per-session
    serialization; jobs update themselves under their own locks."""

    def __init__(self, model: GenerativeAutoencoder,
                 directions: list[AttributeDirection] | None = None,
                 adapted_cache_size: int = 8, spool_dir: str | Path | None = None):
        self.base = model
        self.directions = {d.name: d for d in (directions or [])}
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self.images: dict[str, bytes] = {}
        self.lock = threading.RLock()
        self.adapted: OrderedDict[str, GenerativeAutoencoder] = OrderedDict()
        self.adapted_cache_size = adapted_cache_size
        self.spool = Path(spool_dir) if spool_dir else Path(tempfile.mkdtemp(prefix="latentshift-"))
        self.spool.mkdir(parents=True, exist_ok=True)

    # -- stores ---------------------------------------------------------------

    def put_image(self, img: np.ndarray) -> str:
        data = encode_png(img)
        image_id = sha256(data).hexdigest()[:20]
        with self.lock:
            self.images[image_id] = data
        return image_id

    def image_url(self, image_id: str) -> str:
        return f"{API}/images/{image_id}"

    def store_adapted(self, session_id: str, model: GenerativeAutoencoder) -> None:
        with self.lock:
            self.adapted[session_id] = model
            self.adapted.move_to_end(session_id)
            while len(self.adapted) > self.adapted_cache_size:
                sid, evicted = self.adapted.popitem(last=False)
                save_checkpoint(evicted, self.spool / f"{sid}.ckpt")

    def get_adapted(self, session_id: str) -> GenerativeAutoencoder | None:
        with self.lock:
            model = self.adapted.get(session_id)
            if model is not None:
                self.adapted.move_to_end(session_id)
                return model
        path = self.spool / f"{session_id}.ckpt"
        if path.exists():
            model = load_checkpoint(path)
            self.store_adapted(session_id, model)
            return model
        return None

    def session(self, session_id: str) -> Session:
        with self.lock:
            sess = self.sessions.get(session_id)
        if sess is None:
            raise ApiError(404, f"unknown session {session_id}")
        return sess

    def job(self, job_id: str) -> Job:
        with self.lock:
            job = self.jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"unknown job {job_id}")
        return job

    def new_job(self, kind: str) -> Job:
        job = Job(job_id=uuid.uuid4().hex[:16], kind=kind)
        with self.lock:
            self.jobs[job.job_id] = job
        return job


def _latent_id(w: np.ndarray) -> str:
    return sha256(np.ascontiguousarray(w, dtype=np.float32).tobytes()).hexdigest()[:20]


# -- handlers ------------------------------------------------------------------

def _h_create_session(state: ServiceState, m, body) -> tuple[int, dict]:
    sess = Session(session_id=uuid.uuid4().hex[:16])
    with state.lock:
        state.sessions[sess.session_id] = sess
    return 201, {"session_id": sess.session_id}


def _h_put_image(state: ServiceState, m, body) -> tuple[int, dict]:
    sess = state.session(m.group(1))
    image = decode_png(body, size=state.base.image_size)
    with sess.lock:
        sess.input_image = image
        sess.latent = None
        sess.latent_id = None
        sess.adapted = False
    image_id = state.put_image(image)
    return 200, {"image_id": image_id, "image_url": state.image_url(image_id),
                 "size": state.base.image_size}


def _require_json(body: bytes) -> dict:
    if not body:
        return {}
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ApiError(422, f"malformed JSON body: {exc}")
    if not isinstance(obj, dict):
        raise ApiError(422, "JSON body must be an object")
    return obj


def _h_invert(state: ServiceState, m, body) -> tuple[int, dict]:
    sess = state.session(m.group(1))
    req = _require_json(body)
    method = req.get("method", "encoder")
    if method not in ("encoder", "latent_opt", "random"):
        raise ApiError(422, f"unknown invert method {method!r}")
    seed = req.get("seed", 0)
    if not isinstance(seed, int):
        raise ApiError(422, "seed must be an integer")

    if method == "random":
        w = state.base.sample_prior(seed)
        return 200, _finish_invert(state, sess, w)

    with sess.lock:
        image = sess.input_image
    if image is None:
        raise ApiError(409, "upload an image before inverting")

    if method == "encoder":
        w = state.base.encode(image)
        return 200, _finish_invert(state, sess, w)

    steps = req.get("steps", LatentOptConfig().steps)
    if not isinstance(steps, int) or steps < 1:
        raise ApiError(422, "steps must be a positive integer")
    job = state.new_job("latent_opt")

    def run():
        with job.lock:
            job.status = "running"
        try:
            cfg = LatentOptConfig(steps=steps, seed=seed)
            w, _curve = project_latent_opt(state.base, image, cfg,
                                           progress=_job_progress(job))
            payload = _finish_invert(state, sess, w)
            with job.lock:
                job.status = "done"
                job.progress = 1.0
                job.result = payload
        except LatentShiftError as exc:
            with job.lock:
                job.status = "failed"
                job.error = str(exc)

    threading.Thread(target=run, daemon=True).start()
    return 202, {"job_id": job.job_id}


def _job_progress(job: Job):
    def cb(step: int, steps: int, loss: float):
        with job.lock:
            job.progress = max(job.progress, step / steps)
            job.loss_curve.append(loss)
    return cb


def _finish_invert(state: ServiceState, sess: Session, w: np.ndarray) -> dict:
    recon = state.base.decode(w)
    image_id = state.put_image(recon)
    with sess.lock:
        sess.latent = w
        sess.latent_id = _latent_id(w)
        sess.adapted = False
        latent_id = sess.latent_id
    return {"latent_id": latent_id, "recon_image_url": state.image_url(image_id)}


def _h_adapt(state: ServiceState, m, body) -> tuple[int, dict]:
    sess = state.session(m.group(1))
    req = _require_json(body)
    defaults = AdaptationConfig()
    steps = req.get("steps", defaults.steps)
    lambda_mse = req.get("lambda_mse", defaults.lambda_mse)
    lambda_vgg = req.get("lambda_vgg", defaults.lambda_vgg)
    step_size = req.get("step_size", defaults.step_size)
    if not isinstance(steps, int) or steps < 1:
        raise ApiError(422, "steps must be a positive integer")
    try:
        config = AdaptationConfig(steps=steps, lambda_mse=float(lambda_mse),
                                  lambda_vgg=float(lambda_vgg),
                                  step_size=float(step_size))
    except (TypeError, ValueError, LatentShiftError) as exc:
        raise ApiError(422, f"bad adaptation parameters: {exc}")

    with sess.lock:
        if sess.busy_job is not None:
            raise ApiError(409, "an adaptation job is already running for this session")
        if sess.input_image is None:
            raise ApiError(409, "upload an image before adapting")
        if sess.latent is None:
            raise ApiError(409, "invert before adapting")
        image, w = sess.input_image, sess.latent
        latent_at_submit = sess.latent_id
        job = state.new_job("adapt")
        sess.busy_job = job.job_id

    def run():
        with job.lock:
            job.status = "running"
        try:
            result = adapt_decoder(state.base, w, image, config,
                                   progress=_job_progress(job))
            state.store_adapted(sess.session_id, result.adapted_model)
            recon = result.adapted_model.decode(result.fixed_latent)
            image_id = state.put_image(recon)
            with sess.lock:
                # a newer invert supersedes this adaptation's latent
                sess.adapted = sess.latent_id == latent_at_submit
                sess.busy_job = None
            with job.lock:
                job.status = "done"
                job.progress = 1.0
                job.result = {"recon_image_url": state.image_url(image_id),
                              "final_loss": result.loss_curve[-1]}
        except LatentShiftError as exc:
            with sess.lock:
                sess.busy_job = None
            with job.lock:
                job.status = "failed"
                job.error = str(exc)

    threading.Thread(target=run, daemon=True).start()
    return 202, {"job_id": job.job_id}


def _h_edit(state: ServiceState, m, body) -> tuple[int, dict]:
    sess = state.session(m.group(1))
    req = _require_json(body)
    attribute = req.get("attribute")
    alpha = req.get("alpha")
    use_base = bool(req.get("use_base", False))
    if attribute not in state.directions:
        raise ApiError(422, f"unknown attribute {attribute!r}; "
                            f"available: {sorted(state.directions)}")
    if not isinstance(alpha, (int, float)) or not np.isfinite(alpha):
        raise ApiError(422, "alpha must be a finite number")

    with sess.lock:
        w = sess.latent
        adapted_ready = sess.adapted
    if w is None:
        raise ApiError(409, "invert before editing")
    if not adapted_ready and not use_base:
        raise ApiError(409, "adapt first, or pass use_base=true")
    model = state.base
    if adapted_ready and not use_base:
        model = state.get_adapted(sess.session_id)
        if model is None:
            raise ApiError(409, "adapted decoder unavailable; re-run adaptation")
    direction = state.directions[attribute]
    edited = model.decode(edit_latent(w, direction,
                                      float(alpha) * direction.latent_sigma))
    image_id = state.put_image(edited)
    return 200, {"image_url": state.image_url(image_id), "alpha": alpha,
                 "attribute": attribute}


def _h_job(state: ServiceState, m, body) -> tuple[int, dict]:
    return 200, state.job(m.group(1)).snapshot()


def _h_attributes(state: ServiceState, m, body) -> tuple[int, list]:
    return 200, [{"name": d.name, "train_accuracy": d.train_accuracy}
                 for d in state.directions.values()]


_ROUTES = [
    ("POST", re.compile(rf"^{API}/sessions$"), _h_create_session),
    ("PUT", re.compile(rf"^{API}/sessions/([0-9a-f]+)/image$"), _h_put_image),
    ("POST", re.compile(rf"^{API}/sessions/([0-9a-f]+)/invert$"), _h_invert),
    ("POST", re.compile(rf"^{API}/sessions/([0-9a-f]+)/adapt$"), _h_adapt),
    ("POST", re.compile(rf"^{API}/sessions/([0-9a-f]+)/edit$"), _h_edit),
    ("GET", re.compile(rf"^{API}/jobs/([0-9a-f]+)$"), _h_job),
    ("GET", re.compile(rf"^{API}/attributes$"), _h_attributes),
]


def make_handler(state: ServiceState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):   # quiet by default
            pass

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _reply_json(self, code: int, obj) -> None:
            data = json.dumps(obj).encode("utf-8")
            self.send_response(code)
            self._cors()
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _reply_png(self, data: bytes) -> None:
            self.send_response(200)
            self._cors()
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> bytes:
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_UPLOAD_BYTES:
                remaining = length   # drain so the reply reaches the client
                while remaining > 0:
                    chunk = self.rfile.read(min(remaining, 1 << 20))
                    if not chunk:
                        break
                    remaining -= len(chunk)
                raise ApiError(413, f"body exceeds {MAX_UPLOAD_BYTES} bytes")
            return self.rfile.read(length) if length else b""

        def _dispatch(self, method: str) -> None:
            try:
                if method == "GET":
                    img = re.match(rf"^{API}/images/([0-9a-f]+)$", self.path)
                    if img:
                        with state.lock:
                            data = state.images.get(img.group(1))
                        if data is None:
                            raise ApiError(404, "unknown image")
                        self._reply_png(data)
                        return
                for verb, pattern, fn in _ROUTES:
                    if verb != method:
                        continue
                    m = pattern.match(self.path)
                    if m:
                        code, obj = fn(state, m, self._body())
                        self._reply_json(code, obj)
                        return
                raise ApiError(404, f"no route for {method} {self.path}")
            except ApiError as exc:
                self._reply_json(exc.status, {"error": exc.message})
            except LatentShiftError as exc:
                self._reply_json(422, {"error": str(exc)})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


def build_server(state: ServiceState, host: str = "127.0.0.1",
                 port: int = 0) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(state))


def serve(checkpoint: str, directions: str | None = None,
          host: str = "127.0.0.1", port: int = 8765) -> None:
    model = load_checkpoint(checkpoint)
    dirs = load_directions(directions) if directions else []
    state = ServiceState(model, dirs)
    server = build_server(state, host, port)
    print(f"serving on http://{host}:{server.server_address[1]} "
          f"(model {model.image_size}x{model.image_size}, "
          f"{len(dirs)} attribute directions)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
