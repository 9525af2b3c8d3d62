"""HTTP service: endpoint contracts, job lifecycle, session isolation."""

import json
import threading
import time
import urllib.error
import urllib.request

import numpy as np
import pytest

from latentshift import generate_dataset, load_directions
from latentshift.pngio import decode_png, encode_png
from latentshift.service import ServiceState, build_server


@pytest.fixture(scope="module")
def server(tiny_model, tiny_directions_path, tmp_path_factory):
    state = ServiceState(tiny_model, load_directions(tiny_directions_path),
                         adapted_cache_size=2,
                         spool_dir=tmp_path_factory.mktemp("spool"))
    srv = build_server(state, "127.0.0.1", 0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()


def _req(base, method, path, body=None, content_type="application/json"):
    data = None
    if body is not None:
        data = body if isinstance(body, bytes) else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers={"Content-Type": content_type})
    try:
        with urllib.request.urlopen(req) as resp:
            payload = resp.read()
            ct = resp.headers.get("Content-Type", "")
            return resp.status, (json.loads(payload) if "json" in ct else payload)
    except urllib.error.HTTPError as exc:
        payload = exc.read()
        try:
            return exc.code, json.loads(payload)
        except json.JSONDecodeError:
            return exc.code, payload


def _png(seed=0, size=32):
    return encode_png(generate_dataset(seed, 1, size).images[0])


def _new_session_with_image(base, seed=0):
    status, obj = _req(base, "POST", "/api/v1/sessions")
    assert status == 201
    sid = obj["session_id"]
    status, _ = _req(base, "PUT", f"/api/v1/sessions/{sid}/image", _png(seed),
                     content_type="image/png")
    assert status == 200
    return sid


def _poll(base, job_id, timeout=30.0):
    snapshots = []
    deadline = time.time() + timeout
    while time.time() < deadline:
        status, job = _req(base, "GET", f"/api/v1/jobs/{job_id}")
        assert status == 200
        snapshots.append(job)
        if job["status"] in ("done", "failed"):
            return snapshots
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


def test_session_create_and_404(server):
    status, obj = _req(server, "POST", "/api/v1/sessions")
    assert status == 201 and "session_id" in obj
    status, obj = _req(server, "POST", "/api/v1/sessions/deadbeef/invert",
                       {"method": "encoder"})
    assert status == 404


def test_upload_validation(server):
    status, obj = _req(server, "POST", "/api/v1/sessions")
    sid = obj["session_id"]
    status, obj = _req(server, "PUT", f"/api/v1/sessions/{sid}/image",
                       b"not a png", content_type="image/png")
    assert status == 422
    status, obj = _req(server, "PUT", f"/api/v1/sessions/{sid}/image",
                       b"\x00" * 9_000_000, content_type="image/png")
    assert status == 413


def test_invert_encoder_flow(server):
    sid = _new_session_with_image(server, seed=1)
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                       {"method": "encoder"})
    assert status == 200
    assert obj["latent_id"]
    status, png = _req(server, "GET", obj["recon_image_url"])
    assert status == 200
    img = decode_png(png)
    assert img.shape == (32, 32, 3)


def test_invert_random_seeded_identical(server):
    sid = _new_session_with_image(server, seed=2)
    payloads = []
    for _ in range(2):
        status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                           {"method": "random", "seed": 11})
        assert status == 200
        payloads.append(obj)
    assert payloads[0]["latent_id"] == payloads[1]["latent_id"]
    assert payloads[0]["recon_image_url"] == payloads[1]["recon_image_url"]


def test_invert_without_image_conflict(server):
    status, obj = _req(server, "POST", "/api/v1/sessions")
    sid = obj["session_id"]
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                       {"method": "encoder"})
    assert status == 409


def test_invert_bad_method(server):
    sid = _new_session_with_image(server, seed=3)
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                       {"method": "teleport"})
    assert status == 422


def test_malformed_json_body(server):
    sid = _new_session_with_image(server, seed=4)
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                       b"{not json", content_type="application/json")
    assert status == 422


def test_attributes_listing(server):
    status, obj = _req(server, "GET", "/api/v1/attributes")
    assert status == 200
    names = {d["name"] for d in obj}
    assert names == {"age", "smile", "hair"}
    assert all(0.0 <= d["train_accuracy"] <= 1.0 for d in obj)


def test_edit_requires_adaptation_unless_base(server):
    sid = _new_session_with_image(server, seed=5)
    _req(server, "POST", f"/api/v1/sessions/{sid}/invert", {"method": "encoder"})
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/edit",
                       {"attribute": "smile", "alpha": 1.0})
    assert status == 409
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/edit",
                       {"attribute": "smile", "alpha": 1.0, "use_base": True})
    assert status == 200
    assert obj["image_url"].startswith("/api/v1/images/")


def test_edit_validation(server):
    sid = _new_session_with_image(server, seed=6)
    _req(server, "POST", f"/api/v1/sessions/{sid}/invert", {"method": "encoder"})
    status, _ = _req(server, "POST", f"/api/v1/sessions/{sid}/edit",
                     {"attribute": "nonsense", "alpha": 1.0, "use_base": True})
    assert status == 422
    status, _ = _req(server, "POST", f"/api/v1/sessions/{sid}/edit",
                     {"attribute": "smile", "alpha": "wide", "use_base": True})
    assert status == 422


def test_adapt_job_lifecycle_and_alpha_zero_identity(server):
    sid = _new_session_with_image(server, seed=7)
    status, inv = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                       {"method": "encoder"})
    assert status == 200
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt",
                       {"steps": 6})
    assert status == 202
    snapshots = _poll(server, obj["job_id"])
    final = snapshots[-1]
    assert final["status"] == "done"
    # progress non-decreasing across polls
    progress = [s["progress"] for s in snapshots]
    assert all(a <= b + 1e-12 for a, b in zip(progress, progress[1:]))
    # loss curve finite, final entry <= first
    curve = final["loss_curve"]
    assert len(curve) >= 1 and curve[-1] <= curve[0]
    # edit at alpha=0 returns the adapted reconstruction byte-for-byte
    status, edit = _req(server, "POST", f"/api/v1/sessions/{sid}/edit",
                        {"attribute": "smile", "alpha": 0.0})
    assert status == 200
    assert edit["image_url"] == final["result"]["recon_image_url"]
    _, png_edit = _req(server, "GET", edit["image_url"])
    _, png_recon = _req(server, "GET", final["result"]["recon_image_url"])
    assert png_edit == png_recon


def test_adapt_conflicts(server):
    sid = _new_session_with_image(server, seed=8)
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt", {})
    assert status == 409   # no latent yet
    _req(server, "POST", f"/api/v1/sessions/{sid}/invert", {"method": "encoder"})
    status, first = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt",
                         {"steps": 40})
    assert status == 202
    status, second = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt",
                          {"steps": 4})
    assert status == 409   # one adaptation at a time per session
    _poll(server, first["job_id"])


def test_adapt_param_validation(server):
    sid = _new_session_with_image(server, seed=9)
    _req(server, "POST", f"/api/v1/sessions/{sid}/invert", {"method": "encoder"})
    status, _ = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt",
                     {"steps": 0})
    assert status == 422
    status, _ = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt",
                     {"lambda_mse": 0, "lambda_vgg": 0})
    assert status == 422


def test_latent_opt_job(server):
    sid = _new_session_with_image(server, seed=10)
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                       {"method": "latent_opt", "steps": 5})
    assert status == 202
    snaps = _poll(server, obj["job_id"])
    assert snaps[-1]["status"] == "done"
    assert snaps[-1]["result"]["latent_id"]
    assert snaps[-1]["result"]["recon_image_url"]


def test_session_isolation(server, tiny_model):
    # B's base reconstruction is bitwise unchanged by A's adaptation
    sid_b = _new_session_with_image(server, seed=12)
    _, inv_before = _req(server, "POST", f"/api/v1/sessions/{sid_b}/invert",
                         {"method": "encoder"})
    _, png_before = _req(server, "GET", inv_before["recon_image_url"])

    sid_a = _new_session_with_image(server, seed=13)
    _req(server, "POST", f"/api/v1/sessions/{sid_a}/invert", {"method": "encoder"})
    _, job = _req(server, "POST", f"/api/v1/sessions/{sid_a}/adapt", {"steps": 5})
    _poll(server, job["job_id"])

    _, inv_after = _req(server, "POST", f"/api/v1/sessions/{sid_b}/invert",
                        {"method": "encoder"})
    _, png_after = _req(server, "GET", inv_after["recon_image_url"])
    assert png_before == png_after
    assert inv_before["recon_image_url"] == inv_after["recon_image_url"]


def test_adapted_cache_eviction_spools_to_disk(server):
    # cache holds 2; adapt three sessions, then edit the first again
    sids = []
    for seed in (14, 15, 16):
        sid = _new_session_with_image(server, seed=seed)
        _req(server, "POST", f"/api/v1/sessions/{sid}/invert", {"method": "encoder"})
        _, job = _req(server, "POST", f"/api/v1/sessions/{sid}/adapt", {"steps": 3})
        _poll(server, job["job_id"])
        sids.append(sid)
    status, obj = _req(server, "POST", f"/api/v1/sessions/{sids[0]}/edit",
                       {"attribute": "smile", "alpha": 0.5})
    assert status == 200


def test_unknown_image_and_job_404(server):
    status, _ = _req(server, "GET", "/api/v1/images/0123456789abcdef0123")
    assert status == 404
    status, _ = _req(server, "GET", "/api/v1/jobs/0123456789abcdef")
    assert status == 404


def test_get_is_idempotent(server):
    sid = _new_session_with_image(server, seed=17)
    _, inv = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                  {"method": "encoder"})
    for _ in range(3):
        status, png = _req(server, "GET", inv["recon_image_url"])
        assert status == 200
    status, again = _req(server, "POST", f"/api/v1/sessions/{sid}/invert",
                         {"method": "encoder"})
    assert again["latent_id"] == inv["latent_id"]


def test_cors_preflight(server):
    req = urllib.request.Request(server + "/api/v1/attributes", method="OPTIONS")
    with urllib.request.urlopen(req) as resp:
        assert resp.status == 204
        assert resp.headers["Access-Control-Allow-Origin"] == "*"
