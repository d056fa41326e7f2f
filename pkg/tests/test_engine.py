import sys
import time

import pytest

from trustpipe.engine import Engine, cache_key, load_run_record, render_param, ulid
from trustpipe.manifest import ComponentManifest, PortSpec, Registry, RuntimeSpec
from trustpipe.pipeline import NodeSpec, PipelineDoc, validate
from trustpipe.store import ArtifactStore

PY = sys.executable

ECHO = "import os; open(os.environ['CLAIMED_OUTPUT_OUT'], 'w').write(os.environ['CLAIMED_PARAM_MESSAGE'])"
UPPER = (
    "import os; d = open(os.environ['CLAIMED_INPUT_IN']).read(); "
    "open(os.environ['CLAIMED_OUTPUT_OUT'], 'w').write(d.upper())"
)
FAIL = "import sys; print('boom from step', file=sys.stderr); sys.exit(3)"
MUTATE = (
    "import os; p = os.environ['CLAIMED_INPUT_IN']; "
    "os.chmod(p, 0o644); open(p, 'a').write('sneaky'); "
    "open(os.environ['CLAIMED_OUTPUT_OUT'], 'w').write('x')"
)
NO_OUTPUT = "pass"
RANDOM = (
    "import os; open(os.environ['CLAIMED_OUTPUT_OUT'], 'w').write(os.urandom(8).hex())"
)
SLEEPY = (
    "import os, time; time.sleep(30); "
    "open(os.environ['CLAIMED_OUTPUT_OUT'], 'w').write('late')"
)
SCRATCH_USER = (
    "import os; s = os.environ['CLAIMED_SCRATCH']; "
    "assert os.getcwd() == os.path.realpath(s) or os.getcwd() == s; "
    "open(os.path.join(s, 'work.tmp'), 'w').write('tmp'); "
    "open(os.environ['CLAIMED_OUTPUT_OUT'], 'w').write('ok')"
)


def comp(cid, script, inputs=(), outputs=("out",), params=(), deterministic=True):
    return ComponentManifest(
        id=cid,
        version="1.0.0",
        name=cid,
        category="custom",
        runtime=RuntimeSpec("process", PY, ("-c", script)),
        params=params,
        inputs=tuple(PortSpec(p, "text/plain") for p in inputs),
        outputs=tuple(PortSpec(p, "text/plain") for p in outputs),
        deterministic=deterministic,
    )


def _param(name):
    from trustpipe.manifest import ParamSpec

    return ParamSpec(name, "string", required=True)


def registry():
    reg = Registry()
    reg.register(comp("echo", ECHO, params=(_param("message"),)))
    reg.register(comp("upper", UPPER, inputs=("in",)))
    reg.register(comp("fail", FAIL, inputs=("in",)))
    reg.register(comp("mutate", MUTATE, inputs=("in",)))
    reg.register(comp("no-output", NO_OUTPUT, inputs=("in",)))
    reg.register(comp("random", RANDOM, deterministic=False))
    reg.register(comp("sleepy", SLEEPY))
    reg.register(comp("scratch-user", SCRATCH_USER))
    return reg


def graph(nodes, params=None):
    doc = PipelineDoc("t", 1, params or {}, tuple(nodes))
    return validate(doc, registry())


def node(nid, cid, bindings=None, wires=None):
    return NodeSpec(nid, cid, "1.0.0", bindings or {}, wires or {})


def chain_graph(message="hello"):
    return graph(
        [
            node("a", "echo", {"message": message}),
            node("b", "upper", wires={"in": ("a", "out")}),
        ]
    )


@pytest.fixture
def engine(tmp_path):
    return Engine(ArtifactStore(tmp_path / "store"))


# ---------------------------------------------------------------------------
# primitives


def test_ulid_sortable_and_unique():
    ids = [ulid() for _ in range(200)]
    assert len(set(ids)) == 200
    assert ids == sorted(ids)
    assert all(len(i) == 26 for i in ids)


def test_render_param():
    assert render_param(True) == "true"
    assert render_param(False) == "false"
    assert render_param(3) == "3"
    assert render_param(0.25) == "0.25"
    assert render_param("x y") == "x y"
    assert render_param(None) == ""


def test_cache_key_depends_on_the_right_things():
    base = cache_key("c", "1.0.0", {"p": 1}, ["a" * 64])
    assert cache_key("c", "1.0.0", {"p": 1}, ["a" * 64]) == base
    assert cache_key("c", "1.0.1", {"p": 1}, ["a" * 64]) != base
    assert cache_key("c", "1.0.0", {"p": 2}, ["a" * 64]) != base
    assert cache_key("c", "1.0.0", {"p": 1}, ["b" * 64]) != base
    # input order does not matter; ids are content digests
    two = cache_key("c", "1.0.0", {}, ["b" * 64, "a" * 64])
    assert two == cache_key("c", "1.0.0", {}, ["a" * 64, "b" * 64])


# ---------------------------------------------------------------------------
# execution


def test_chain_runs_and_produces(engine):
    rec = engine.execute(chain_graph("hello"))
    assert rec.state == "succeeded"
    assert rec.node_states["a"]["state"] == "succeeded"
    assert rec.node_states["b"]["state"] == "succeeded"
    out = engine.store.get_bytes(rec.produced[("b", "out")])
    assert out == b"HELLO"
    assert rec.processes_spawned == 2


def test_second_run_fully_cached_zero_spawns(engine):
    engine.execute(chain_graph())
    rec = engine.execute(chain_graph())
    assert rec.state == "succeeded"
    assert all(s["state"] == "cached" for s in rec.node_states.values())
    assert rec.processes_spawned == 0
    assert engine.store.get_bytes(rec.produced[("b", "out")]) == b"HELLO"


def test_param_change_reruns_node_and_descendants(engine):
    engine.execute(chain_graph("one"))
    rec = engine.execute(chain_graph("two"))
    assert rec.node_states["a"]["state"] == "succeeded"
    assert rec.node_states["b"]["state"] == "succeeded"
    assert rec.processes_spawned == 2
    assert engine.store.get_bytes(rec.produced[("b", "out")]) == b"TWO"


def test_force_reruns_everything_same_artifacts(engine):
    rec1 = engine.execute(chain_graph())
    rec2 = engine.execute(chain_graph(), force=True)
    assert rec2.processes_spawned == 2
    # deterministic steps reproduce bit-identical artifacts
    assert rec1.produced == rec2.produced


def test_nondeterministic_component_bypasses_cache(engine):
    g = graph([node("r", "random")])
    rec1 = engine.execute(g)
    rec2 = engine.execute(g)
    assert rec1.node_states["r"]["state"] == "succeeded"
    assert rec2.node_states["r"]["state"] == "succeeded"
    assert rec2.processes_spawned == 1


def test_failure_skips_downstream(engine):
    g = graph(
        [
            node("a", "echo", {"message": "x"}),
            node("f", "fail", wires={"in": ("a", "out")}),
            node("c", "upper", wires={"in": ("f", "out")}),
            node("d", "upper", wires={"in": ("a", "out")}),
        ]
    )
    rec = engine.execute(g)
    assert rec.state == "failed"
    assert rec.node_states["a"]["state"] == "succeeded"
    assert rec.node_states["f"]["state"] == "failed"
    assert rec.node_states["f"]["exit_code"] == 3
    assert "boom from step" in rec.node_states["f"]["stderr_tail"]
    assert rec.node_states["c"]["state"] == "never_scheduled"
    assert rec.node_states["c"]["cause"] == "f"
    # the independent sibling still runs
    assert rec.node_states["d"]["state"] == "succeeded"


def test_input_mutation_fails_step_and_store_intact(engine):
    g = graph(
        [
            node("a", "echo", {"message": "precious"}),
            node("m", "mutate", wires={"in": ("a", "out")}),
        ]
    )
    rec = engine.execute(g)
    assert rec.node_states["m"]["state"] == "failed"
    assert "read-only contract" in rec.node_states["m"]["error"]
    # the stored artifact is untouched: steps get copies, not store paths
    assert engine.store.get_bytes(rec.produced[("a", "out")]) == b"precious"


def test_missing_output_fails_step(engine):
    g = graph(
        [
            node("a", "echo", {"message": "x"}),
            node("n", "no-output", wires={"in": ("a", "out")}),
        ]
    )
    rec = engine.execute(g)
    assert rec.node_states["n"]["state"] == "failed"
    assert "missing or empty" in rec.node_states["n"]["error"]


def test_timeout_kills_step(engine):
    g = graph([node("s", "sleepy")])
    start = time.monotonic()
    rec = engine.execute(g, timeout_s=1.0)
    assert time.monotonic() - start < 15
    assert rec.node_states["s"]["state"] == "failed"
    assert "timeout" in rec.node_states["s"]["error"]


def test_scratch_contract(engine):
    rec = engine.execute(graph([node("s", "scratch-user")]))
    assert rec.state == "succeeded"


def test_parallel_execution(engine):
    g = graph(
        [
            node("a", "echo", {"message": "one"}),
            node("b", "echo", {"message": "two"}),
            node("c", "echo", {"message": "three"}),
            node("z", "upper", wires={"in": ("a", "out")}),
        ]
    )
    rec = engine.execute(g, parallelism=3)
    assert rec.state == "succeeded"
    assert rec.processes_spawned == 4
    assert engine.store.get_bytes(rec.produced[("z", "out")]) == b"ONE"


# ---------------------------------------------------------------------------
# events and run records


def test_event_log_ordering(engine):
    rec = engine.execute(chain_graph())
    events = engine.store.read_events(rec.run_id)
    assert [e["seq"] for e in events] == list(range(1, len(events) + 1))
    assert events[0]["event"] == "run_started"
    assert events[-1]["event"] == "run_finished"
    assert events[-1]["state"] == "succeeded"
    # a runs strictly before b: b depends on a's output
    order = [e["node_id"] for e in events if e["event"] == "node_state" and e["state"] == "succeeded"]
    assert order.index("a") < order.index("b")


def test_on_event_callback_sees_all_events(engine):
    seen = []
    rec = engine.execute(chain_graph(), on_event=seen.append)
    assert seen == engine.store.read_events(rec.run_id)


def test_load_run_record_from_summary_and_log(engine):
    rec = engine.execute(chain_graph())
    loaded = load_run_record(engine.store, rec.run_id)
    assert loaded["state"] == "succeeded"
    assert loaded["run_id"] == rec.run_id
    assert loaded["produced"]["b.out"] == rec.produced[("b", "out")]
    # replaying the event log alone yields the same terminal picture
    (engine.store.root / "runs" / f"{rec.run_id}.json").unlink()
    replayed = load_run_record(engine.store, rec.run_id)
    assert replayed["state"] == "succeeded"
    assert replayed["produced"]["b.out"] == rec.produced[("b", "out")]


def test_workdirs_cleaned_up(engine):
    rec = engine.execute(chain_graph())
    assert not (engine.store.root / "tmp" / rec.run_id).exists()


# ---------------------------------------------------------------------------
# cache soundness: cached results equal a forced shadow execution


def test_shadow_execution_cache_soundness(engine):
    msgs = ["alpha", "beta", "gamma"]
    for m in msgs:
        engine.execute(chain_graph(m))
    for m in msgs:
        cached = engine.execute(chain_graph(m))
        assert cached.processes_spawned == 0
        shadow = engine.execute(chain_graph(m), force=True)
        assert cached.produced == shadow.produced
