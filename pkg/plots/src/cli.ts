#!/usr/bin/env node
/**
 * plot-report --input report.csv --kind llm-settings|retrievers --out figure.svg
 *
 * The output extension selects the format: .svg writes markup directly,
 * .png rasterizes it.  Exits nonzero on schema problems.
 */

import { writeFileSync } from "fs";
import { buildChart, ChartKind } from "./chart";
import { loadReport, SchemaError } from "./report";
import { renderSvg } from "./svg";

interface Args {
  input: string;
  kind: ChartKind;
  out: string;
  style?: string;
  annotations: boolean;
  title?: string;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { annotations: true };
  for (let i = 0; i < argv.length; i += 1) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[i];
    };
    switch (flag) {
      case "--input": args.input = next(); break;
      case "--kind": {
        const kind = next();
        if (kind !== "llm-settings" && kind !== "retrievers") {
          throw new Error(`--kind must be llm-settings or retrievers, got ${kind}`);
        }
        args.kind = kind;
        break;
      }
      case "--out": args.out = next(); break;
      case "--style": args.style = next(); break;
      case "--title": args.title = next(); break;
      case "--no-annotations": args.annotations = false; break;
      case "--help":
        console.log(
          "usage: plot-report --input report.csv --kind {llm-settings|retrievers} " +
          "--out figure.(png|svg) [--style MC|OE|OEMC] [--title T] [--no-annotations]");
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.input || !args.kind || !args.out) {
    throw new Error("--input, --kind, and --out are required");
  }
  return args as Args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
  try {
    const rows = loadReport(args.input);
    const chart = buildChart(rows, {
      kind: args.kind,
      style: args.style,
      annotations: args.annotations,
      title: args.title,
    });
    const svg = renderSvg(chart);
    if (args.out.endsWith(".png")) {
      // resvg is loaded lazily so svg-only usage works without the native module
      const { Resvg } = require("@resvg/resvg-js");
      writeFileSync(args.out, new Resvg(svg).render().asPng());
    } else if (args.out.endsWith(".svg")) {
      writeFileSync(args.out, svg, "utf-8");
    } else {
      console.error("error: --out must end in .svg or .png");
      return 1;
    }
    console.log(`wrote ${args.out} (${chart.bars.length} bars)`);
    return 0;
  } catch (e) {
    if (e instanceof SchemaError) {
      console.error(`error: ${e.message}`);
    } else {
      console.error(`error: ${(e as Error).message}`);
    }
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
