import random

import pytest

from trustpipe.components import demo_pipeline_text, reference_registry
from trustpipe.errors import InvariantError
from trustpipe.manifest import Registry, parse_manifest
from trustpipe.pipeline import (
    ValidationFailure,
    compile_workflow,
    import_workflow,
    parse_pipeline,
    serialize_pipeline,
    topo_layers,
    validate,
)


def make_component(cid, inputs=(), outputs=("out",), category="transform"):
    lines = [
        f"id: {cid}",
        "version: 1.0.0",
        f"name: {cid}",
        f"category: {category}",
        "runtime:",
        "  kind: process",
        "  entrypoint: python3",
    ]
    if inputs:
        lines.append("inputs:")
        for p in inputs:
            lines += [f"  - name: {p}", "    media_type: table/csv"]
    if outputs:
        lines.append("outputs:")
        for p in outputs:
            lines += [f"  - name: {p}", "    media_type: table/csv"]
    return parse_manifest("\n".join(lines) + "\n")


def linear_registry(n_inputs=4):
    """Generic registry: 'src' with no inputs, 'node<i>' with i table inputs."""
    reg = Registry()
    reg.register(make_component("src", inputs=(), category="input"))
    for i in range(1, n_inputs + 1):
        reg.register(make_component(f"node{i}", inputs=[f"in{j}" for j in range(i)]))
    return reg


def doc_for(nodes):
    return parse_pipeline(
        "name: t\nversion: 1\nnodes:\n"
        + "".join(
            f"  - node_id: {nid}\n    component:\n      id: {cid}\n      version: 1.0.0\n"
            + ("    wires:\n" + "".join(f"      {p}: {t}\n" for p, t in wires.items()) if wires else "")
            for nid, cid, wires in nodes
        )
    )


# ---------------------------------------------------------------------------
# parse


def test_parse_demo_pipeline():
    doc = parse_pipeline(demo_pipeline_text())
    assert doc.name == "trusted-covid-demo"
    assert len(doc.nodes) == 8


def test_parse_empty_nodes():
    doc = parse_pipeline("name: t\nversion: 1\nnodes: []\n")
    assert doc.nodes == ()


def test_parse_duplicate_node_id():
    with pytest.raises(InvariantError, match="duplicate node id"):
        doc_for([("train", "src", {}), ("train", "src", {})])


def test_parse_self_wire():
    with pytest.raises(InvariantError, match="self-wire"):
        doc_for([("a", "node1", {"in0": "a.out"})])


def test_pipeline_serialize_roundtrip():
    doc = parse_pipeline(demo_pipeline_text())
    text = serialize_pipeline(doc)
    assert parse_pipeline(text) == doc
    assert serialize_pipeline(parse_pipeline(text)) == text


# ---------------------------------------------------------------------------
# validate


def test_validate_demo_five_layers():
    g = validate(parse_pipeline(demo_pipeline_text()), reference_registry())
    layers = [set(l) for l in topo_layers(g)]
    assert layers == [
        {"fetch"},
        {"filter"},
        {"transform", "arrange"},
        {"fairness", "train"},
        {"bless", "publish"},
    ]
    assert len(g.edges) == 9


def test_validate_media_type_mismatch():
    reg = reference_registry()
    text = """\
name: t
version: 1
nodes:
  - node_id: fetch
    component:
      id: fetch-input
      version: 1.0.0
    bindings:
      source: x
  - node_id: train
    component:
      id: train-toy
      version: 1.0.0
    wires:
      data: fetch.metadata
"""
    with pytest.raises(ValidationFailure) as exc:
        validate(parse_pipeline(text), reg)
    msgs = [v.message for v in exc.value.violations]
    assert any("media-type mismatch" in m and "fetch.metadata" in m and "train.data" in m for m in msgs)


def test_validate_cycle_witness():
    reg = linear_registry()
    doc = doc_for(
        [
            ("a", "node1", {"in0": "c.out"}),
            ("b", "node1", {"in0": "a.out"}),
            ("c", "node1", {"in0": "b.out"}),
        ]
    )
    with pytest.raises(ValidationFailure) as exc:
        validate(doc, reg)
    cyc = [v for v in exc.value.violations if "cycle" in v.message]
    assert len(cyc) == 1
    for n in ("a", "b", "c"):
        assert n in cyc[0].message


def test_validate_accumulates_k_defects():
    reg = reference_registry()
    text = """\
name: t
version: 1
nodes:
  - node_id: fetch
    component:
      id: fetch-input
      version: 1.0.0
  - node_id: filt
    component:
      id: filter-rows
      version: 1.0.0
    wires:
      data: fetch.metadata
  - node_id: ghost
    component:
      id: no-such
      version: 1.0.0
  - node_id: train
    component:
      id: train-toy
      version: 1.0.0
    wires:
      data: fetch.metadata
"""
    # defects: fetch missing required param `source`; filt missing required
    # param `predicate`; ghost unknown component; train media-type mismatch
    with pytest.raises(ValidationFailure) as exc:
        validate(parse_pipeline(text), reg)
    assert len(exc.value.violations) == 4


def test_validate_unbound_required_param():
    reg = reference_registry()
    text = """\
name: t
version: 1
nodes:
  - node_id: fetch
    component:
      id: fetch-input
      version: 1.0.0
"""
    with pytest.raises(ValidationFailure, match="required param 'source' unbound"):
        validate(parse_pipeline(text), reg)


# ---------------------------------------------------------------------------
# topo_layers


def test_layers_single_node():
    g = validate(doc_for([("a", "src", {})]), linear_registry())
    assert [set(l) for l in g.layers] == [{"a"}]


def test_layers_diamond():
    g = validate(
        doc_for(
            [
                ("a", "src", {}),
                ("b", "node1", {"in0": "a.out"}),
                ("c", "node1", {"in0": "a.out"}),
                ("d", "node2", {"in0": "b.out", "in1": "c.out"}),
            ]
        ),
        linear_registry(),
    )
    assert [set(l) for l in g.layers] == [{"a"}, {"b", "c"}, {"d"}]


def test_layers_chain():
    g = validate(
        doc_for(
            [
                ("a", "src", {}),
                ("b", "node1", {"in0": "a.out"}),
                ("c", "node1", {"in0": "b.out"}),
                ("d", "node1", {"in0": "c.out"}),
            ]
        ),
        linear_registry(),
    )
    assert [set(l) for l in g.layers] == [{"a"}, {"b"}, {"c"}, {"d"}]


def random_dag_doc(rng, n):
    """Random DAG over the linear_registry components."""
    nodes = []
    for i in range(n):
        nid = f"n{i}"
        k = rng.randint(0, min(i, 4))
        preds = rng.sample(range(i), k) if k else []
        if not preds:
            nodes.append((nid, "src", {}))
        else:
            nodes.append((nid, f"node{len(preds)}", {f"in{j}": f"n{p}.out" for j, p in enumerate(preds)}))
    return nodes


def test_random_dags_layering_respects_edges():
    rng = random.Random(11)
    reg = linear_registry()
    for _ in range(25):
        n = rng.randint(1, 50)
        nodes = random_dag_doc(rng, n)
        g = validate(doc_for(nodes), reg)
        layer_of = {nid: i for i, l in enumerate(g.layers) for nid in l}
        assert sorted(layer_of) == sorted(nid for nid, _, _ in nodes)
        for e in g.edges:
            assert layer_of[e.src] < layer_of[e.dst]
        # declaration order must not matter
        shuffled = nodes[:]
        rng.shuffle(shuffled)
        g2 = validate(doc_for(shuffled), reg)
        assert g2.layers == g.layers


# ---------------------------------------------------------------------------
# compile


def test_compile_demo_counts():
    g = validate(parse_pipeline(demo_pipeline_text()), reference_registry())
    from trustpipe.docfmt import parse_document

    wf = parse_document(compile_workflow(g))
    assert len(wf["steps"]) == 8
    assert len(wf["edges"]) == 9


def test_compile_empty():
    g = validate(parse_pipeline("name: t\nversion: 1\nnodes: []\n"), Registry())
    from trustpipe.docfmt import parse_document

    wf = parse_document(compile_workflow(g))
    assert wf["steps"] == []
    assert "edges" not in wf


def test_compile_import_fixed_point():
    reg = reference_registry()
    g = validate(parse_pipeline(demo_pipeline_text()), reg)
    wf1 = compile_workflow(g)
    doc2 = import_workflow(wf1)
    g2 = validate(doc2, reg)
    assert compile_workflow(g2) == wf1
    assert {(e.src, e.src_port, e.dst, e.dst_port) for e in g2.edges} == {
        (e.src, e.src_port, e.dst, e.dst_port) for e in g.edges
    }


def test_compile_roundtrip_random_dags():
    rng = random.Random(99)
    reg = linear_registry()
    for _ in range(100):
        n = rng.randint(1, 50)
        g = validate(doc_for(random_dag_doc(rng, n)), reg)
        wf = compile_workflow(g)
        g2 = validate(import_workflow(wf), reg)
        assert {n.node_id for n in g2.doc.nodes} == {n.node_id for n in g.doc.nodes}
        assert {(e.src, e.src_port, e.dst, e.dst_port) for e in g2.edges} == {
            (e.src, e.src_port, e.dst, e.dst_port) for e in g.edges
        }
        assert compile_workflow(g2) == wf
