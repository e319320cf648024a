/**
 * Chart model: a grouped bar layout computed from report rows.
 *
 * The model is the structural contract tests assert against: bar heights
 * carry the CSV accuracy values untouched, annotations carry the relative
 * delta formatted as a signed percentage.  Rendering is a separate step.
 */

import { ReportRow } from "./report";

export type ChartKind = "llm-settings" | "retrievers";

export interface Bar {
  /** x-axis category (model name, or backend name for retrievers). */
  x: string;
  /** group within the category (retrieval setting); "" when ungrouped. */
  group: string;
  /** accuracy exactly as read from the CSV (0..1). */
  accuracy: number;
  /** bar height in axis units: accuracy as percent (0..100). */
  heightPercent: number;
  /** relative delta vs the best row, e.g. -0.25. */
  relDelta: number;
  /** annotation text, e.g. "-25.0%"; empty when annotations are off. */
  annotation: string;
}

export interface ChartModel {
  kind: ChartKind;
  title: string;
  categories: string[];
  groups: string[];
  bars: Bar[];
  yLabel: string;
}

export interface ChartOptions {
  kind: ChartKind;
  style?: string;          // keep only rows of one question style
  annotations?: boolean;   // default on
  title?: string;
}

export function formatDelta(relDelta: number): string {
  const percent = relDelta * 100;
  const text = percent.toFixed(1);
  return percent > 0 ? `+${text}%` : `${text}%`;
}

export function buildChart(rows: ReportRow[], options: ChartOptions): ChartModel {
  const annotate = options.annotations !== false;
  let selected = rows;
  if (options.style) {
    selected = rows.filter((r) => r.style === options.style);
  }
  if (selected.length === 0) {
    throw new Error("no rows to plot after filtering");
  }

  const grouped = options.kind === "llm-settings";
  const bars: Bar[] = selected.map((row) => ({
    x: row.model,
    group: grouped ? row.setting + (row.permuted ? " (permuted)" : "") : "",
    accuracy: row.accuracy,
    heightPercent: row.accuracy * 100,
    relDelta: row.rel_delta,
    annotation: annotate ? formatDelta(row.rel_delta) : "",
  }));

  // Categories ordered by their best accuracy, descending; groups likewise.
  const bestByCategory = new Map<string, number>();
  const bestByGroup = new Map<string, number>();
  for (const bar of bars) {
    bestByCategory.set(bar.x, Math.max(bestByCategory.get(bar.x) ?? 0, bar.accuracy));
    bestByGroup.set(bar.group, Math.max(bestByGroup.get(bar.group) ?? 0, bar.accuracy));
  }
  const categories = [...bestByCategory.keys()].sort(
    (a, b) => bestByCategory.get(b)! - bestByCategory.get(a)! || a.localeCompare(b));
  const groups = [...bestByGroup.keys()].sort(
    (a, b) => bestByGroup.get(b)! - bestByGroup.get(a)! || a.localeCompare(b));

  const order = (bar: Bar) =>
    categories.indexOf(bar.x) * groups.length + groups.indexOf(bar.group);
  bars.sort((a, b) => order(a) - order(b));

  return {
    kind: options.kind,
    title: options.title ??
      (options.kind === "retrievers" ? "Retriever comparison" : "Accuracy by setting"),
    categories,
    groups,
    bars,
    yLabel: "accuracy [%]",
  };
}
