export { buildChart, formatDelta } from "./chart";
export type { Bar, ChartKind, ChartModel, ChartOptions } from "./chart";
export { loadReport, parseReportCsv, SchemaError, REPORT_COLUMNS } from "./report";
export type { ReportRow } from "./report";
export { renderSvg } from "./svg";
