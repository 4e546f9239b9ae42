/**
 * Array-shaped bindings for the pilot linear model tree.
 *
 * Everything goes through the command-line interface and its file formats
 * (CSV in, JSON model file, CSV predictions out), so a model fitted here is
 * byte-identical to one trained directly with the CLI on the same data.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const __version__ = "0.1.0";

/** Column-keyed table; string columns become categorical predictors. */
export type FeatureTable = Record<string, ReadonlyArray<number | string>>;
/** Plain numeric design matrix, one row per case. */
export type FeatureMatrix = ReadonlyArray<ReadonlyArray<number>>;

export interface FitParams {
  max_depth?: number;
  min_fit?: number;
  min_leaf?: number;
  allowed_kinds?: ReadonlyArray<string>;
  min_unique_for_lin_blin?: number;
  min_unique_per_child_for_plin?: number;
  rss_floor_scale?: number;
  max_lin_chain?: number;
  min_rel_gain_lin?: number;
}

const PARAM_FLAGS: Record<string, string> = {
  max_depth: "--max-depth",
  min_fit: "--min-fit",
  min_leaf: "--min-leaf",
  min_unique_for_lin_blin: "--min-unique-for-lin-blin",
  min_unique_per_child_for_plin: "--min-unique-per-child-for-plin",
  rss_floor_scale: "--rss-floor-scale",
  max_lin_chain: "--max-lin-chain",
  min_rel_gain_lin: "--min-rel-gain-lin",
};

export class PilotBindingError extends Error {}

function cliCommand(): string[] {
  const env = process.env.PILOT_CLI;
  if (env && env.trim() !== "") return env.trim().split(/\s+/);
  return ["python3", "-m", "pilot"];
}

function runCli(args: string[]): string {
  const [prog, ...pre] = cliCommand();
  try {
    return execFileSync(prog, [...pre, ...args], { encoding: "utf-8" });
  } catch (err) {
    const e = err as { stderr?: string; message?: string };
    throw new PilotBindingError(
      `pilot CLI failed: ${(e.stderr ?? e.message ?? "").toString().trim()}`,
    );
  }
}

/** Shortest round-trip decimal form; Python parses it to the same float. */
function formatNumber(v: number): string {
  if (!Number.isFinite(v)) throw new PilotBindingError("non-finite value");
  return Object.is(v, -0) ? "-0.0" : String(v);
}

function csvField(v: string): string {
  return /[",\n\r]/.test(v) ? `"${v.replace(/"/g, '""')}"` : v;
}

interface NormalizedTable {
  names: string[];
  columns: Array<ReadonlyArray<number | string>>;
  nRows: number;
}

function normalizeFeatures(features: FeatureTable | FeatureMatrix): NormalizedTable {
  if (Array.isArray(features)) {
    const rows = features as FeatureMatrix;
    if (rows.length === 0) throw new PilotBindingError("features are empty");
    const p = rows[0].length;
    if (p === 0) throw new PilotBindingError("features have zero columns");
    for (const [i, row] of rows.entries()) {
      if (row.length !== p) {
        throw new PilotBindingError(
          `row ${i} has ${row.length} values, expected ${p}`,
        );
      }
    }
    const names = Array.from({ length: p }, (_, j) => `x${j + 1}`);
    const columns = names.map((_, j) => rows.map((row) => row[j]));
    return { names, columns, nRows: rows.length };
  }
  const table = features as FeatureTable;
  const names = Object.keys(table);
  if (names.length === 0) throw new PilotBindingError("features are empty");
  const columns = names.map((n) => table[n]!);
  const nRows = columns[0].length;
  for (const [j, col] of columns.entries()) {
    if (col.length !== nRows) {
      throw new PilotBindingError(
        `column ${names[j]!} has ${col.length} rows, expected ${nRows}`,
      );
    }
  }
  return { names, columns, nRows };
}

function cellText(v: number | string): string {
  return typeof v === "number" ? formatNumber(v) : csvField(v);
}

function writeTableCsv(
  path: string,
  table: NormalizedTable,
  target?: ReadonlyArray<number>,
): void {
  const header = target ? [...table.names, "y"] : table.names;
  const lines = [header.map(csvField).join(",")];
  for (let i = 0; i < table.nRows; i++) {
    const cells = table.columns.map((col) => cellText(col[i]!));
    if (target) cells.push(formatNumber(target[i]!));
    lines.push(cells.join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

interface ModelColumn {
  name: string;
  kind: "numeric" | "categorical";
  levels: string[] | null;
}

/**
 * Opaque handle to a fitted tree: the serialized model plus the column
 * metadata needed to validate prediction inputs.
 */
export class BoundModel {
  private bytes: string | null;
  readonly columns: ReadonlyArray<ModelColumn>;

  constructor(modelBytes: string) {
    this.bytes = modelBytes;
    let doc: { schema_version?: number; columns?: ModelColumn[] };
    try {
      doc = JSON.parse(modelBytes);
    } catch (err) {
      throw new PilotBindingError(`model file is not valid JSON: ${err}`);
    }
    if (doc.schema_version !== 1 || !Array.isArray(doc.columns)) {
      throw new PilotBindingError("unsupported or malformed model file");
    }
    this.columns = doc.columns;
  }

  /** Serialized model contents; rejects use after release(). */
  serialized(): string {
    if (this.bytes === null) {
      throw new PilotBindingError("model handle has been released");
    }
    return this.bytes;
  }

  /** Drop the handle; subsequent operations throw. */
  release(): void {
    this.bytes = null;
  }
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "pilot-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * Train a tree. `features` is either a column-keyed table (string columns
 * become categorical) or a numeric matrix whose columns are named x1..xp.
 */
export function fit(
  features: FeatureTable | FeatureMatrix,
  target: ReadonlyArray<number>,
  params: FitParams = {},
): BoundModel {
  const table = normalizeFeatures(features);
  if (target.length === 0) throw new PilotBindingError("target is empty");
  if (target.length !== table.nRows) {
    throw new PilotBindingError(
      `target has ${target.length} rows, features have ${table.nRows}`,
    );
  }
  for (const v of target) {
    if (!Number.isFinite(v)) throw new PilotBindingError("non-finite value in target");
  }
  if (table.names.includes("y")) {
    throw new PilotBindingError('feature column name "y" is reserved for the target');
  }
  const flags: string[] = [];
  for (const [key, value] of Object.entries(params)) {
    if (key === "allowed_kinds") {
      const kinds = [...(value as string[])].sort().join(",");
      if (kinds === "con,pcon") flags.push("--mode", "cart");
      else if (kinds === "blin,con,lin,pcon,plin") flags.push("--mode", "full");
      else {
        throw new PilotBindingError(
          `allowed_kinds must be the full set or {con,pcon}, got [${kinds}]`,
        );
      }
      continue;
    }
    const flag = PARAM_FLAGS[key];
    if (flag === undefined) {
      throw new PilotBindingError(`unknown param ${JSON.stringify(key)}`);
    }
    flags.push(flag, String(value));
  }
  const categorical = table.names.filter(
    (_, j) => typeof table.columns[j]![0] === "string",
  );
  if (categorical.length > 0) flags.push("--categorical", categorical.join(","));
  return withTempDir((dir) => {
    const dataPath = join(dir, "train.csv");
    const modelPath = join(dir, "model.json");
    writeTableCsv(dataPath, table, target);
    runCli(["train", "--data", dataPath, "--target", "y",
            "--out", modelPath, ...flags]);
    return new BoundModel(readFileSync(modelPath, "utf-8"));
  });
}

/** Predict each row; mirrors the CLI's truncation-safeguarded walk. */
export function predict(
  model: BoundModel,
  features: FeatureTable | FeatureMatrix,
): number[] {
  const bytes = model.serialized();
  const table = normalizeFeatures(features);
  const expected = model.columns.map((c) => c.name);
  const missing = expected.filter((n) => !table.names.includes(n));
  const extra = table.names.filter((n) => !expected.includes(n));
  if (missing.length > 0 || extra.length > 0) {
    throw new PilotBindingError(
      `feature columns do not match the model: missing=[${missing}] extra=[${extra}]`,
    );
  }
  return withTempDir((dir) => {
    const modelPath = join(dir, "model.json");
    const dataPath = join(dir, "data.csv");
    const outPath = join(dir, "preds.csv");
    writeFileSync(modelPath, bytes, "utf-8");
    writeTableCsv(dataPath, table);
    runCli(["predict", "--model", modelPath, "--data", dataPath,
            "--out", outPath]);
    const lines = readFileSync(outPath, "utf-8").trim().split("\n");
    return lines.slice(1).map(Number);
  });
}

/** Normalized impurity-gain feature importance, keyed by column name. */
export function importance(model: BoundModel): Record<string, number> {
  const bytes = model.serialized();
  return withTempDir((dir) => {
    const modelPath = join(dir, "model.json");
    writeFileSync(modelPath, bytes, "utf-8");
    const out = runCli(["importance", "--model", modelPath]);
    const result: Record<string, number> = {};
    for (const line of out.trim().split("\n")) {
      const idx = line.lastIndexOf(",");
      result[line.slice(0, idx)] = Number(line.slice(idx + 1));
    }
    return result;
  });
}

/** Write the model file verbatim (byte-identical to the CLI's output). */
export function save(model: BoundModel, path: string): void {
  writeFileSync(path, model.serialized(), "utf-8");
}

/** Load a model file produced by save() or by the CLI. */
export function load(path: string): BoundModel {
  return new BoundModel(readFileSync(path, "utf-8"));
}
