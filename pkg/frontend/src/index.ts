export {
  DocMapping,
  DocSyntaxError,
  DocValue,
  formatNumber,
  parseDocument,
  serializeDocument,
} from "./docfmt.js";
export {
  BindingValue,
  CanvasGraph,
  ComponentInfo,
  ConnectionCheck,
  GraphError,
  GraphNode,
  ParamSpec,
  PortSpec,
  Position,
  Wire,
} from "./graph.js";
export {
  LoadedPipeline,
  PipelineFormatError,
  PipelineMeta,
  componentIndex,
  loadPipeline,
  serializePipeline,
} from "./pipeline.js";
export {
  EventOrderError,
  NodeState,
  NodeView,
  RunEvent,
  RunEventReducer,
  RunView,
  parseSSE,
} from "./events.js";
export { CATEGORY_ORDER, PaletteGroup, filterPalette, groupByCategory } from "./palette.js";
export {
  ApiClient,
  ApiError,
  BlessOutcome,
  FetchLike,
  RunRecord,
  ValidationFailed,
  ValidationOk,
  ValidationResult,
  Violation,
} from "./client.js";
