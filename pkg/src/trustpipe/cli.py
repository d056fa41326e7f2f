"""Command-line interface.

Exit codes: 0 success, 1 domain failure (invalid pipeline, failed run,
rejected blessing), 2 usage errors.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from .docfmt import canonical_json
from .errors import TrustPipeError
from .fixture import gen_fixture
from .gate import evaluate_policy, parse_policy
from .pipeline import ValidationFailure
from .workspace import Workspace, coerce_param, violations_payload


class Ctx:
    def __init__(self, root, as_json):
        self.root = root
        self.json = as_json
        self._ws = None

    @property
    def ws(self) -> Workspace:
        if self._ws is None:
            self._ws = Workspace(self.root)
        return self._ws

    def emit(self, payload: dict, human: str):
        click.echo(canonical_json(payload) if self.json else human)


@click.group()
@click.option("--store", "root", type=click.Path(), default=None,
              help="Workspace root (defaults to $CLAIMED_STORE or ~/.trustpipe/store).")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx, root, as_json):
    """Pipeline compiler, executor and trusted-AI gate."""
    ctx.obj = Ctx(root, as_json)


def _fail(ctx: Ctx, payload: dict, human: str, code: int = 1):
    click.echo(canonical_json(payload) if ctx.json else human, err=not ctx.json)
    sys.exit(code)


def _domain(ctx: Ctx, e: TrustPipeError):
    _fail(ctx, {"error": str(e)}, f"error: {e}")


# ---------------------------------------------------------------------------
# components


@main.group()
def components():
    """Inspect and register component manifests."""


@components.command("list")
@click.option("--category", default=None)
@click.pass_obj
def components_list(ctx, category):
    items = [m for m in ctx.ws.registry().list(category)]
    if ctx.json:
        click.echo(canonical_json({"components": ctx.ws.component_docs() if category is None else [
            d for d in ctx.ws.component_docs() if d["category"] == category]}))
        return
    for m in items:
        click.echo(f"{m.id}@{m.version}  {m.category:<16} {m.name}")


@components.command("register")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def components_register(ctx, path):
    try:
        m = ctx.ws.register_component(Path(path).read_text(encoding="utf-8"))
    except TrustPipeError as e:
        _domain(ctx, e)
    ctx.emit({"registered": f"{m.id}@{m.version}"}, f"registered {m.id}@{m.version}")


# ---------------------------------------------------------------------------
# pipelines


def _params_opt(f):
    return click.option(
        "--param", "params", multiple=True, metavar="NAME=VALUE",
        help="Override a pipeline parameter (repeatable).",
    )(f)


def _parse_params(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--param needs NAME=VALUE, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k] = coerce_param(v)
    return out


@main.group()
def pipeline():
    """Validate, compile and run pipelines."""


@pipeline.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@_params_opt
@click.pass_obj
def pipeline_validate(ctx, path, params):
    text = Path(path).read_text(encoding="utf-8")
    try:
        g = ctx.ws.validate_text(text, _parse_params(params))
    except ValidationFailure as e:
        payload = violations_payload(e)
        human = "\n".join(
            f"invalid: [{v['node_id'] or 'pipeline'}] {v['message']}" for v in payload["violations"]
        )
        _fail(ctx, payload, human)
    except TrustPipeError as e:
        _domain(ctx, e)
    ctx.emit(
        {"valid": True, "nodes": len(g.node_ids), "edges": len(g.edges),
         "layers": [sorted(l) for l in g.layers]},
        f"valid: {len(g.node_ids)} nodes, {len(g.edges)} edges, {len(g.layers)} layers",
    )


@pipeline.command("compile")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(), default=None)
@_params_opt
@click.pass_obj
def pipeline_compile(ctx, path, output, params):
    text = Path(path).read_text(encoding="utf-8")
    try:
        workflow = ctx.ws.compile_text(text, _parse_params(params))
    except ValidationFailure as e:
        _fail(ctx, violations_payload(e), "invalid pipeline:\n" + str(e))
    except TrustPipeError as e:
        _domain(ctx, e)
    if output:
        Path(output).write_text(workflow, encoding="utf-8")
        ctx.emit({"written": output}, f"wrote {output}")
    else:
        click.echo(workflow, nl=False)


@pipeline.command("run")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@_params_opt
@click.option("--parallelism", type=int, default=2, show_default=True)
@click.option("--force", is_flag=True, help="Ignore the step cache.")
@click.option("--timeout", "timeout_s", type=float, default=300.0, show_default=True,
              help="Per-step timeout in seconds.")
@click.pass_obj
def pipeline_run(ctx, path, params, parallelism, force, timeout_s):
    text = Path(path).read_text(encoding="utf-8")
    try:
        rec = ctx.ws.run_text(
            text, _parse_params(params), parallelism=parallelism, force=force, timeout_s=timeout_s
        )
    except ValidationFailure as e:
        _fail(ctx, violations_payload(e), "invalid pipeline:\n" + str(e))
    except TrustPipeError as e:
        _domain(ctx, e)
    if ctx.json:
        click.echo(canonical_json(rec.to_dict()))
    else:
        for nid in sorted(rec.node_states):
            click.echo(f"{nid:<12} {rec.node_states[nid]['state']}")
        click.echo(f"run {rec.run_id}: {rec.state}")
    if rec.state != "succeeded":
        sys.exit(1)


@pipeline.command("status")
@click.argument("run_id")
@click.pass_obj
def pipeline_status(ctx, run_id):
    try:
        rec = ctx.ws.run_record(run_id)
    except TrustPipeError as e:
        _domain(ctx, e)
    if ctx.json:
        click.echo(canonical_json(rec))
    else:
        for nid in sorted(rec["node_states"]):
            click.echo(f"{nid:<12} {rec['node_states'][nid]['state']}")
        click.echo(f"run {run_id}: {rec['state']}")


@pipeline.command("lineage")
@click.argument("artifact")
@click.pass_obj
def pipeline_lineage(ctx, artifact):
    try:
        lin = ctx.ws.store.lineage(artifact)
    except TrustPipeError as e:
        _domain(ctx, e)
    if ctx.json:
        click.echo(canonical_json(lin))
        return
    click.echo(f"artifact {artifact}")
    for key in sorted(lin["steps"]):
        click.echo(f"  step {key}")
    for e in lin["edges"]:
        if "port" in e:
            click.echo(f"  {e['from_step']} --{e['port']}--> {e['to_artifact'][:12]}")


# ---------------------------------------------------------------------------
# evaluation reports and blessing


@main.command("eval")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def eval_report(ctx, path):
    """Summarize an evaluation report (fairness, confusion, robustness...)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        _domain(ctx, TrustPipeError(f"not valid JSON: {e}"))
    if ctx.json:
        click.echo(canonical_json(doc))
        return
    kind = doc.get("kind", "unknown")
    click.echo(f"kind: {kind}")
    if kind == "fairness":
        for attr, d in sorted(doc.get("attributes", {}).items()):
            click.echo(
                f"  {attr}: spd={d.get('statistical_parity_difference')} "
                f"di={d.get('disparate_impact')} eod={d.get('equal_opportunity_difference')}"
            )
    elif kind == "confusion":
        click.echo(f"  accuracy: {doc['metrics']['accuracy']:.4f}")
    elif kind == "robustness":
        click.echo(f"  clean accuracy: {doc['clean_accuracy']:.4f}")
        for eps, acc in sorted(doc["robust_accuracy"].items(), key=lambda kv: float(kv[0])):
            click.echo(f"  eps={eps}: {acc:.4f}")
    elif kind == "blessing-record":
        click.echo(f"  decision: {doc['decision']}")
        for r in doc["rules"]:
            click.echo(f"  [{'pass' if r['passed'] else 'FAIL'}] {r['rule']} (value={r['value']})")


@main.command("bless")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--policy", required=True, help="';'-separated threshold rules.")
@click.option("-o", "--output", type=click.Path(), default=None, help="Write the record here.")
@click.pass_obj
def bless(ctx, model_path, report_path, policy, output):
    """Evaluate a blessing policy; exits 1 when the asset is rejected."""
    try:
        pol = parse_policy(policy)
        model_bytes = Path(model_path).read_bytes()
        subjects = {
            "model": json.loads(model_bytes),
            "report": json.loads(Path(report_path).read_text(encoding="utf-8")),
        }
    except json.JSONDecodeError as e:
        _domain(ctx, TrustPipeError(f"not valid JSON: {e}"))
    except TrustPipeError as e:
        _domain(ctx, e)
    record = evaluate_policy(pol, subjects, hashlib.sha256(model_bytes).hexdigest())
    text = canonical_json(record)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
    if ctx.json:
        click.echo(text)
    else:
        click.echo(f"decision: {record['decision']}")
        for r in record["rules"]:
            click.echo(f"[{'pass' if r['passed'] else 'FAIL'}] {r['rule']} (value={r['value']})")
    if record["decision"] != "blessed":
        sys.exit(1)


# ---------------------------------------------------------------------------
# fixture and serving


@main.command("fixture")
@click.argument("out_dir", type=click.Path())
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--n", "n_images", type=int, default=200, show_default=True)
@click.option("--bias", default="F:0.3,M:0.6", show_default=True,
              help="Per-group favorable-label rates, e.g. F:0.3,M:0.6.")
@click.pass_obj
def fixture(ctx, out_dir, seed, n_images, bias):
    """Generate the synthetic demo dataset."""
    knobs = {}
    for part in bias.split(","):
        if part.strip():
            g, rate = part.split(":", 1)
            knobs[g.strip()] = float(rate)
    try:
        gen_fixture(out_dir, seed=seed, n_images=n_images, bias_knobs=knobs)
    except TrustPipeError as e:
        _domain(ctx, e)
    ctx.emit(
        {"out_dir": out_dir, "seed": seed, "n_images": n_images},
        f"wrote fixture ({n_images} rows, seed {seed}) to {out_dir}",
    )


@main.group()
def serve():
    """Long-running servers."""


@serve.command("api")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.pass_obj
def serve_api(ctx, host, port):
    """Start the HTTP API server."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(ctx.ws), host=host, port=port, log_level="warning")


@serve.command("model")
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8081, show_default=True)
def serve_model(bundle_path, host, port):
    """Serve one model bundle for ad-hoc predictions."""
    import uvicorn

    from .api import create_model_app

    uvicorn.run(create_model_app(Path(bundle_path)), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
