import { ComponentInfo } from "../src/graph.js";

/** The backend's reference components for the demo pipeline, as served by
 * GET /v1/components. */
export const DEMO_COMPONENTS: ComponentInfo[] = [
  {
    id: "fetch-input", version: "1.0.0", name: "Fetch Input", category: "input",
    params: [{ name: "source", kind: "string", required: true }],
    outputs: [
      { name: "metadata", media_type: "table/csv" },
      { name: "images", media_type: "image/dir" },
    ],
  },
  {
    id: "filter-rows", version: "1.0.0", name: "Filter Rows", category: "filter",
    params: [{ name: "predicate", kind: "string", required: true }],
    inputs: [{ name: "data", media_type: "table/csv" }],
    outputs: [{ name: "data", media_type: "table/csv" }],
  },
  {
    id: "transform-column", version: "1.0.0", name: "Transform Column", category: "transform",
    params: [
      { name: "column", kind: "string", required: true },
      { name: "expr", kind: "string", required: true },
    ],
    inputs: [{ name: "data", media_type: "table/csv" }],
    outputs: [{ name: "data", media_type: "table/csv" }],
  },
  {
    id: "arrange-images", version: "1.0.0", name: "Arrange Images", category: "image_transform",
    params: [
      { name: "label_column", kind: "string", default: "finding" },
      { name: "filename_column", kind: "string", default: "filename" },
    ],
    inputs: [
      { name: "metadata", media_type: "table/csv" },
      { name: "images", media_type: "image/dir" },
    ],
    outputs: [{ name: "classes", media_type: "image/dir" }],
  },
  {
    id: "train-toy", version: "1.0.0", name: "Toy Trainer", category: "train",
    params: [
      { name: "epochs", kind: "int", default: 50 },
      { name: "lr", kind: "float", default: 0.1 },
      { name: "seed", kind: "int", default: 1 },
      { name: "dims", kind: "int", default: 16 },
      { name: "holdout", kind: "float", default: 0.2 },
    ],
    inputs: [{ name: "data", media_type: "image/dir" }],
    outputs: [{ name: "model", media_type: "model/bundle" }],
  },
  {
    id: "fairness-eval", version: "1.0.0", name: "Fairness Metrics", category: "evaluate",
    params: [
      { name: "attributes", kind: "string", required: true },
      { name: "favorable", kind: "string", required: true },
      { name: "label_column", kind: "string", default: "finding" },
      { name: "prediction_column", kind: "string", default: "" },
    ],
    inputs: [{ name: "data", media_type: "table/csv" }],
    outputs: [{ name: "report", media_type: "report/json" }],
  },
  {
    id: "bless-gate", version: "1.0.0", name: "Blessing Gate", category: "bless",
    params: [{ name: "policy", kind: "string", required: true }],
    inputs: [
      { name: "model", media_type: "model/bundle" },
      { name: "report", media_type: "report/json" },
    ],
    outputs: [{ name: "record", media_type: "report/json" }],
  },
  {
    id: "publish-report", version: "1.0.0", name: "Publish Report", category: "publish",
    params: [{ name: "title", kind: "string", default: "report" }],
    inputs: [{ name: "report", media_type: "report/json" }],
  },
];

/** The bundled demo pipeline exactly as the backend canonically serializes
 * it (a load → serialize fixed point on both sides of the wire). */
export const DEMO_PIPELINE = `name: trusted-covid-demo
version: 1
params:
  source: "file://FIXTURE"
  epochs: 50
nodes:
  - node_id: fetch
    component:
      id: fetch-input
      version: 1.0.0
    bindings:
      source: "\${pipeline:source}"
  - node_id: filter
    component:
      id: filter-rows
      version: 1.0.0
    bindings:
      predicate: "not contains(filename, \\".gz\\")"
    wires:
      data: fetch.metadata
  - node_id: transform
    component:
      id: transform-column
      version: 1.0.0
    bindings:
      column: age_group
      expr: age >= 65
    wires:
      data: filter.data
  - node_id: arrange
    component:
      id: arrange-images
      version: 1.0.0
    wires:
      metadata: filter.data
      images: fetch.images
  - node_id: train
    component:
      id: train-toy
      version: 1.0.0
    bindings:
      epochs: "\${pipeline:epochs}"
      seed: 1
    wires:
      data: arrange.classes
  - node_id: fairness
    component:
      id: fairness-eval
      version: 1.0.0
    bindings:
      attributes: "gender:M,age_group:false"
      favorable: classA
    wires:
      data: transform.data
  - node_id: bless
    component:
      id: bless-gate
      version: 1.0.0
    bindings:
      policy: model.metrics.holdout_accuracy >= 0.7; report.attributes.gender.disparate_impact within 0.8 1.25
    wires:
      model: train.model
      report: fairness.report
  - node_id: publish
    component:
      id: publish-report
      version: 1.0.0
    bindings:
      title: fairness-report
    wires:
      report: fairness.report
`;
