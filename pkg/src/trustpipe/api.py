"""HTTP API (v1) over a workspace.

Error mapping: validation failures and malformed documents are 400 (with
the same violations payload the CLI prints), unknown names are 404, and
conflicting registrations or gate refusals are 409.
"""

from __future__ import annotations

import base64
import io
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse

from .docfmt import DocSyntaxError, canonical_json
from .errors import ConflictError, InvariantError, NotFoundError, TrustPipeError
from .gate import ModelRegistry, ServingState, evaluate_policy, parse_policy
from .model import BundleModel, ModelBundle
from .pipeline import ValidationFailure
from .workspace import Workspace, violations_payload


def _json(payload, status_code=200) -> Response:
    return Response(
        canonical_json(payload), status_code=status_code, media_type="application/json"
    )


def create_app(ws: Workspace | None = None) -> FastAPI:
    ws = ws or Workspace()
    app = FastAPI(title="trustpipe", version="1")
    models = ModelRegistry()

    def resolver(digest: str) -> BundleModel:
        return BundleModel(ModelBundle.from_json(ws.store.get_bytes(digest).decode("utf-8")))

    serving = ServingState(models, resolver)
    app.state.ws = ws
    app.state.models = models
    app.state.serving = serving

    @app.exception_handler(ValidationFailure)
    async def _validation(_req, exc):
        return _json(violations_payload(exc), 400)

    @app.exception_handler(DocSyntaxError)
    async def _syntax(_req, exc):
        return _json({"error": str(exc), "line": exc.line, "col": exc.col}, 400)

    @app.exception_handler(InvariantError)
    async def _invariant(_req, exc):
        return _json({"error": str(exc)}, 400)

    @app.exception_handler(NotFoundError)
    async def _missing(_req, exc):
        return _json({"error": str(exc)}, 404)

    @app.exception_handler(ConflictError)
    async def _conflict(_req, exc):
        return _json({"error": str(exc)}, 409)

    @app.exception_handler(TrustPipeError)
    async def _domain(_req, exc):
        return _json({"error": str(exc)}, 400)

    # -- components --------------------------------------------------------

    @app.get("/v1/components")
    def list_components():
        return _json({"components": ws.component_docs()})

    @app.post("/v1/components")
    async def register_component(request: Request):
        text = (await request.body()).decode("utf-8")
        m = ws.register_component(text)
        return _json({"registered": f"{m.id}@{m.version}"}, 201)

    # -- pipelines ---------------------------------------------------------

    @app.get("/v1/pipelines")
    def list_pipelines():
        return _json({"pipelines": ws.list_pipelines()})

    @app.get("/v1/pipelines/{name}")
    def get_pipeline(name: str):
        return PlainTextResponse(ws.load_pipeline(name))

    @app.put("/v1/pipelines/{name}")
    async def put_pipeline(name: str, request: Request):
        ws.save_pipeline(name, (await request.body()).decode("utf-8"))
        return _json({"saved": name})

    @app.post("/v1/pipelines/{name}/validate")
    async def validate_pipeline(name: str, request: Request):
        body = await request.body()
        text = body.decode("utf-8") if body else ws.load_pipeline(name)
        g = ws.validate_text(text)
        return _json(
            {
                "valid": True,
                "nodes": len(g.node_ids),
                "edges": len(g.edges),
                "layers": [sorted(l) for l in g.layers],
            }
        )

    # -- runs --------------------------------------------------------------

    @app.post("/v1/runs")
    async def start_run(request: Request):
        body = json.loads((await request.body()).decode("utf-8") or "{}")
        name = body.get("pipeline")
        if not isinstance(name, str):
            raise InvariantError("body needs a 'pipeline' name")
        rec = ws.run_text(
            ws.load_pipeline(name),
            params=body.get("params") or {},
            parallelism=int(body.get("parallelism", 2)),
            force=bool(body.get("force", False)),
        )
        return _json(rec.to_dict(), 201)

    @app.get("/v1/runs")
    def list_runs():
        return _json({"runs": ws.store.list_runs()})

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        return _json(ws.run_record(run_id))

    @app.get("/v1/runs/{run_id}/events")
    def run_events(run_id: str):
        events = ws.store.read_events(run_id)  # raises 404 before streaming

        def stream():
            for ev in events:
                yield f"id: {ev['seq']}\ndata: {canonical_json(ev)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- artifacts ---------------------------------------------------------

    @app.get("/v1/artifacts/{digest}")
    def get_artifact(digest: str):
        ref = ws.store.get_ref(digest)
        return _json(ref.to_dict())

    @app.get("/v1/artifacts/{digest}/content")
    def get_artifact_content(digest: str):
        data = ws.store.get_bytes(digest)
        return Response(data, media_type="application/octet-stream")

    @app.get("/v1/artifacts/{digest}/lineage")
    def get_lineage(digest: str):
        return _json(ws.store.lineage(digest))

    # -- blessing and serving ----------------------------------------------

    @app.post("/v1/models/{model_id}/bless")
    async def bless_model(model_id: str, request: Request):
        body = json.loads((await request.body()).decode("utf-8") or "{}")
        for key in ("model_artifact", "report_artifact", "policy"):
            if key not in body:
                raise InvariantError(f"body needs {key!r}")
        model_bytes = ws.store.get_bytes(body["model_artifact"])
        subjects = {
            "model": json.loads(model_bytes),
            "report": json.loads(ws.store.get_bytes(body["report_artifact"])),
        }
        record = evaluate_policy(parse_policy(body["policy"]), subjects, body["model_artifact"])
        payload = {"record": record}
        if record["decision"] == "blessed":
            payload["revision"] = models.publish(model_id, body["model_artifact"], record)
        return _json(payload, 201)

    @app.get("/v1/models/{model_id}")
    def model_revisions(model_id: str):
        revs = models.revisions(model_id)
        if not revs:
            raise NotFoundError(f"no published revisions for model {model_id}")
        return _json({"model": model_id, "revisions": revs, "routes": serving.routes(model_id)})

    @app.post("/v1/models/{model_id}/canary")
    async def set_canary(model_id: str, request: Request):
        body = json.loads((await request.body()).decode("utf-8") or "{}")
        if "revision" not in body or "weight" not in body:
            raise InvariantError("body needs 'revision' and 'weight'")
        serving.set_canary(model_id, int(body["revision"]), float(body["weight"]))
        return _json({"model": model_id, "routes": serving.routes(model_id)})

    @app.post("/v1/serve/{model_id}/predict")
    async def predict(model_id: str, request: Request):
        body = json.loads((await request.body()).decode("utf-8") or "{}")
        if "image_b64" not in body:
            raise InvariantError("body needs 'image_b64' (base64 PNG)")
        from PIL import Image

        try:
            image = Image.open(io.BytesIO(base64.b64decode(body["image_b64"])))
        except Exception as e:
            raise InvariantError(f"could not decode image: {e}") from None
        return _json(serving.predict(model_id, image))

    return app


def create_model_app(bundle_path) -> FastAPI:
    """Single-model ad-hoc prediction server."""
    from pathlib import Path

    from PIL import Image

    bundle = ModelBundle.from_json(Path(bundle_path).read_text(encoding="utf-8"))
    model = BundleModel(bundle)
    app = FastAPI(title="trustpipe-model", version="1")

    @app.get("/healthz")
    def healthz():
        return _json({"ok": True, "labels": list(bundle.labels)})

    @app.post("/predict")
    async def predict(request: Request):
        body = json.loads((await request.body()).decode("utf-8") or "{}")
        if "image_b64" not in body:
            return _json({"error": "body needs 'image_b64' (base64 PNG)"}, 400)
        try:
            image = Image.open(io.BytesIO(base64.b64decode(body["image_b64"])))
        except Exception as e:
            return _json({"error": f"could not decode image: {e}"}, 400)
        probs = model.predict_proba_image(image)
        best = max(range(len(bundle.labels)), key=lambda i: probs[i])
        return _json(
            {
                "label": bundle.labels[best],
                "probs": {bundle.labels[i]: float(probs[i]) for i in range(len(bundle.labels))},
            }
        )

    return app
