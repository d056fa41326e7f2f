"""Graph executor: runs components as isolated child processes under the
step protocol, caches steps by content, and records run metadata.

Step protocol (bit-exact contract): the child sees
    CLAIMED_PARAM_<NAME>   string-rendered parameter value
    CLAIMED_INPUT_<PORT>   absolute path to a read-only copy of the artifact
    CLAIMED_OUTPUT_<PORT>  absolute path the step must create
    CLAIMED_SCRATCH        writable scratch directory
and must exit 0 on success with every declared output present and non-empty.
"""

from __future__ import annotations

import hashlib
import os
import re
import shutil
import signal
import stat
import subprocess
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from .docfmt import canonical_json
from .errors import TrustPipeError
from .manifest import ComponentManifest
from .pipeline import ValidatedGraph, compile_workflow
from .store import ArtifactStore, path_digest

DEFAULT_TIMEOUT_S = 300.0

_ULID_ALPHABET = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
_ulid_lock = threading.Lock()
_ulid_last = [0, 0]


def ulid() -> str:
    """Sortable 26-char id: 48-bit ms timestamp + 80 random bits."""
    with _ulid_lock:
        ts = int(time.time() * 1000)
        if ts <= _ulid_last[0]:
            ts = _ulid_last[0]
            _ulid_last[1] += 1
        else:
            _ulid_last[1] = int.from_bytes(os.urandom(10), "big")
        _ulid_last[0] = ts
        rand = _ulid_last[1] % (1 << 80)
    value = (ts << 80) | rand
    chars = []
    for _ in range(26):
        chars.append(_ULID_ALPHABET[value & 31])
        value >>= 5
    return "".join(reversed(chars))


def render_param(value) -> str:
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        return "%.12g" % value
    return str(value)


def cache_key(component_id: str, version: str, params: dict, input_ids) -> str:
    """Independent of node id, pipeline name and wall clock."""
    payload = canonical_json(
        {
            "component": f"{component_id}@{version}",
            "params": {k: render_param(v) for k, v in params.items()},
            "inputs": sorted(input_ids),
        }
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _env_name(name: str) -> str:
    return name.upper().replace("-", "_")


_PLACEHOLDER_RE = re.compile(r"\$\{param:([a-z0-9_-]+)\}")


@dataclass
class StepInvocation:
    manifest: ComponentManifest
    params: dict
    inputs: dict  # port -> artifact id
    workdir: str
    timeout_s: float = DEFAULT_TIMEOUT_S
    run_id: str = ""
    node_id: str = ""


@dataclass
class StepResult:
    state: str  # succeeded | failed
    outputs: dict = field(default_factory=dict)  # port -> artifact id
    exit_code: int | None = None
    stderr_tail: str = ""
    error: str = ""


def _make_readonly(path):
    for p in [path] + [q for q in path.rglob("*")] if path.is_dir() else [path]:
        mode = stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH
        if p.is_dir():
            mode |= stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH
        os.chmod(p, mode)


def _make_writable(path):
    if not path.exists():
        return
    targets = [path] + ([q for q in path.rglob("*")] if path.is_dir() else [])
    for p in targets:
        os.chmod(p, 0o755 if p.is_dir() else 0o644)


def run_step(inv: StepInvocation, store: ArtifactStore) -> StepResult:
    """Execute one component process under the step protocol."""
    from pathlib import Path

    work = Path(inv.workdir)
    scratch = work / "scratch"
    in_dir = work / "inputs"
    out_dir = work / "outputs"
    for d in (scratch, in_dir, out_dir):
        d.mkdir(parents=True, exist_ok=True)
    if any(scratch.iterdir()):
        raise TrustPipeError("scratch directory must start empty")

    m = inv.manifest
    env = {
        # minimal host plumbing the interpreter itself needs
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": str(scratch),
        "CLAIMED_SCRATCH": str(scratch),
    }
    if "PYTHONPATH" in os.environ:
        env["PYTHONPATH"] = os.environ["PYTHONPATH"]
    for name, value in inv.params.items():
        env[f"CLAIMED_PARAM_{_env_name(name)}"] = render_param(value)

    input_paths: dict[str, Path] = {}
    for port, art_id in inv.inputs.items():
        src = store.get_path(art_id)
        dst = in_dir / port
        if src.is_dir():
            shutil.copytree(src, dst)
        else:
            shutil.copy2(src, dst)
        _make_readonly(dst)
        input_paths[port] = dst
        env[f"CLAIMED_INPUT_{_env_name(port)}"] = str(dst)
    for port in m.outputs:
        env[f"CLAIMED_OUTPUT_{_env_name(port.name)}"] = str(out_dir / port.name)

    args = [inv.manifest.runtime.entrypoint] + [
        _PLACEHOLDER_RE.sub(lambda mm: render_param(inv.params.get(mm.group(1))), a)
        for a in m.runtime.args
    ]

    try:
        proc = subprocess.Popen(
            args,
            cwd=scratch,
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except OSError as e:
        return StepResult(state="failed", error=f"spawn failure: {e}")

    try:
        _, stderr = proc.communicate(timeout=inv.timeout_s)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except OSError:
            pass
        proc.wait()
        return StepResult(state="failed", error=f"timeout after {inv.timeout_s}s")
    stderr_tail = stderr.decode("utf-8", "replace")[-2000:]

    # read-only contract: inputs must be byte-identical after the step
    for port, p in input_paths.items():
        if path_digest(p) != inv.inputs[port]:
            return StepResult(
                state="failed",
                exit_code=proc.returncode,
                stderr_tail=stderr_tail,
                error=f"input port {port!r} was modified by the step (read-only contract)",
            )

    if proc.returncode != 0:
        return StepResult(state="failed", exit_code=proc.returncode, stderr_tail=stderr_tail)

    outputs = {}
    for port in m.outputs:
        path = out_dir / port.name
        if not path.exists() or (path.is_file() and path.stat().st_size == 0) or (
            path.is_dir() and not any(path.rglob("*"))
        ):
            return StepResult(
                state="failed",
                exit_code=0,
                stderr_tail=stderr_tail,
                error=f"declared output {port.name!r} missing or empty",
            )
        ref = store.put_path(
            path,
            port.media_type,
            created_by=(inv.run_id, inv.node_id, port.name),
            inputs=list(inv.inputs.values()),
        )
        outputs[port.name] = ref.id
    return StepResult(state="succeeded", outputs=outputs, exit_code=0)


@dataclass
class RunRecord:
    run_id: str
    pipeline_digest: str
    node_states: dict
    produced: dict  # (node_id, port) -> artifact id
    started_ms: int
    finished_ms: int | None = None
    processes_spawned: int = 0

    @property
    def state(self) -> str:
        if any(s.get("state") == "failed" for s in self.node_states.values()):
            return "failed"
        if all(s.get("state") in ("succeeded", "cached") for s in self.node_states.values()):
            return "succeeded"
        return "running"

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "pipeline_digest": self.pipeline_digest,
            "state": self.state,
            "node_states": self.node_states,
            "produced": {f"{n}.{p}": a for (n, p), a in self.produced.items()},
            "started_ms": self.started_ms,
            "finished_ms": self.finished_ms,
            "processes_spawned": self.processes_spawned,
        }


class Engine:
    def __init__(self, store: ArtifactStore):
        self.store = store

    def execute(
        self,
        g: ValidatedGraph,
        parallelism: int = 1,
        force: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        on_event=None,
    ) -> RunRecord:
        if parallelism < 1:
            raise TrustPipeError("parallelism must be >= 1")
        run_id = ulid()
        pipeline_digest = hashlib.sha256(compile_workflow(g).encode("utf-8")).hexdigest()
        record = RunRecord(
            run_id=run_id,
            pipeline_digest=pipeline_digest,
            node_states={n: {"state": "pending"} for n in g.node_ids},
            produced={},
            started_ms=int(time.time() * 1000),
        )

        log_path = self.store.run_log_path(run_id)
        log_lock = threading.Lock()
        seq = [0]

        def emit(event: dict):
            with log_lock:
                seq[0] += 1
                event = {"seq": seq[0], "ts_ms": int(time.time() * 1000), **event}
                with open(log_path, "a", encoding="utf-8") as f:
                    f.write(canonical_json(event) + "\n")
            if on_event:
                on_event(event)

        def set_state(node_id: str, state: str, **info):
            record.node_states[node_id] = {"state": state, **info}
            emit({"event": "node_state", "node_id": node_id, "state": state, **info})

        emit({"event": "run_started", "run_id": run_id, "pipeline": g.doc.name,
              "pipeline_digest": pipeline_digest, "nodes": sorted(g.node_ids)})

        wires = {n.node_id: n.wires for n in g.doc.nodes}
        dependents: dict[str, set] = {nid: set() for nid in g.node_ids}
        for e in g.edges:
            dependents[e.src].add(e.dst)
        # a node is ready once every distinct upstream producer finished
        upstreams = {nid: {src for (src, _) in wires[nid].values()} for nid in g.node_ids}
        remaining = {nid: len(upstreams[nid]) for nid in g.node_ids}

        tmp_root = self.store.root / "tmp" / run_id
        state_lock = threading.Lock()
        done_ok: set = set()
        failed_or_skipped: set = set()

        def mark_never_scheduled(start: str):
            for nid in sorted(g.downstream_closure(start)):
                if nid not in done_ok and record.node_states[nid]["state"] == "pending":
                    failed_or_skipped.add(nid)
                    set_state(nid, "never_scheduled", cause=start)

        def run_node(nid: str) -> None:
            m = g.manifests[nid]
            params = g.resolved_params[nid]
            inputs = {}
            for port, (src, src_port) in sorted(wires[nid].items()):
                inputs[port] = record.produced[(src, src_port)]
            key = cache_key(m.id, m.version, params, inputs.values())
            if m.deterministic and not force:
                hit = self.store.cache_lookup(key)
                if hit is not None:
                    with state_lock:
                        for port, art in hit.items():
                            record.produced[(nid, port)] = art
                        done_ok.add(nid)
                    set_state(nid, "cached", artifacts=hit, cache_key=key)
                    return
            set_state(nid, "running")
            inv = StepInvocation(
                manifest=m,
                params=params,
                inputs=inputs,
                workdir=str(tmp_root / nid),
                timeout_s=timeout_s,
                run_id=run_id,
                node_id=nid,
            )
            with state_lock:
                record.processes_spawned += 1
            result = run_step(inv, self.store)
            if result.state == "succeeded":
                if m.deterministic:
                    self.store.cache_store(key, result.outputs)
                with state_lock:
                    for port, art in result.outputs.items():
                        record.produced[(nid, port)] = art
                    done_ok.add(nid)
                set_state(nid, "succeeded", artifacts=result.outputs, exit_code=0)
            else:
                with state_lock:
                    failed_or_skipped.add(nid)
                set_state(
                    nid,
                    "failed",
                    exit_code=result.exit_code,
                    stderr_tail=result.stderr_tail,
                    error=result.error,
                )
                with state_lock:
                    mark_never_scheduled(nid)

        ready = [nid for nid in sorted(g.node_ids) if remaining[nid] == 0]
        pool = ThreadPoolExecutor(max_workers=parallelism)
        futures = {}
        try:
            while ready or futures:
                while ready and len(futures) < parallelism:
                    nid = ready.pop(0)
                    futures[pool.submit(run_node, nid)] = nid
                if not futures:
                    break
                done, _ = wait(futures, return_when=FIRST_COMPLETED)
                for fut in done:
                    nid = futures.pop(fut)
                    fut.result()  # propagate engine bugs, not step failures
                    if nid in done_ok:
                        for dep in sorted(dependents[nid]):
                            remaining[dep] -= 1
                            if remaining[dep] == 0 and dep not in failed_or_skipped:
                                if all(u in done_ok for u in upstreams[dep]):
                                    ready.append(dep)
        finally:
            pool.shutdown(wait=True)
            if tmp_root.exists():
                _make_writable(tmp_root)
                shutil.rmtree(tmp_root, ignore_errors=True)

        record.finished_ms = int(time.time() * 1000)
        emit({"event": "run_finished", "run_id": run_id, "state": record.state,
              "processes_spawned": record.processes_spawned})
        summary = self.store.root / "runs" / f"{run_id}.json"
        summary.write_text(canonical_json(record.to_dict()) + "\n", encoding="utf-8")
        return record


def load_run_record(store: ArtifactStore, run_id: str) -> dict:
    import json

    p = store.root / "runs" / f"{run_id}.json"
    if p.exists():
        return json.loads(p.read_text(encoding="utf-8"))
    # fall back to replaying the event log (run may still be in flight)
    events = store.read_events(run_id)
    states: dict = {}
    produced = {}
    digest = ""
    spawned = 0
    for ev in events:
        if ev["event"] == "run_started":
            digest = ev.get("pipeline_digest", "")
            states = {n: {"state": "pending"} for n in ev.get("nodes", [])}
        elif ev["event"] == "node_state":
            info = {k: v for k, v in ev.items() if k not in ("seq", "ts_ms", "event", "node_id")}
            states[ev["node_id"]] = info
            for port, art in (ev.get("artifacts") or {}).items():
                produced[f"{ev['node_id']}.{port}"] = art
        elif ev["event"] == "run_finished":
            spawned = ev.get("processes_spawned", 0)
    terminal = any(e["event"] == "run_finished" for e in events)
    if any(s.get("state") == "failed" for s in states.values()):
        state = "failed"
    elif terminal and all(s.get("state") in ("succeeded", "cached") for s in states.values()):
        state = "succeeded"
    else:
        state = "running"
    return {
        "run_id": run_id,
        "pipeline_digest": digest,
        "state": state,
        "node_states": states,
        "produced": produced,
        "processes_spawned": spawned,
    }
