/**
 * Figure builders: pure consumers of the simulator's CSV tables. Every
 * plotted number traces to a CSV cell; nothing is recomputed here beyond
 * layout arithmetic.
 */

import { column, requireNonEmpty, SchemaError, Table } from "./csv";
import { divergingColor, document, extent, Panel, sequentialColor } from "./svg";

const MARGIN = { left: 64, right: 20, top: 36, bottom: 48 };
const PANEL_W = 420;
const PANEL_H = 220;

function uniqueSorted(values: number[]): number[] {
  return Array.from(new Set(values)).sort((a, b) => a - b);
}

function heatmap(
  panel: Panel,
  xs: number[],
  ys: number[],
  values: number[],
  opts: { xLabel: string; yLabel: string; diverging: boolean; skip?: boolean[] }
): void {
  const gridX = uniqueSorted(xs);
  const gridY = uniqueSorted(ys);
  const xScale = panel.xScale(extent(gridX));
  const yScale = panel.yScale(extent(gridY));
  const cellW = panel.width / Math.max(gridX.length - 1, 1);
  const cellH = panel.height / Math.max(gridY.length - 1, 1);
  const absMax = Math.max(...values.map((v) => Math.abs(v)), 1e-12);
  const vMin = Math.min(...values);
  const vMax = Math.max(...values);
  for (let i = 0; i < values.length; i++) {
    if (opts.skip && opts.skip[i]) {
      continue;
    }
    const px = xScale.at(xs[i]) - cellW / 2;
    const py = yScale.at(ys[i]) - cellH / 2;
    const fill = opts.diverging
      ? divergingColor(values[i], absMax)
      : sequentialColor((values[i] - vMin) / Math.max(vMax - vMin, 1e-12));
    panel.rect(px, py, cellW, cellH, fill);
  }
  if (opts.skip) {
    for (let i = 0; i < values.length; i++) {
      if (!opts.skip[i]) continue;
      const px = xScale.at(xs[i]) - cellW / 2;
      const py = yScale.at(ys[i]) - cellH / 2;
      panel.rect(px, py, cellW, cellH, "rgb(180,180,180)");
    }
  }
  panel.frameAndAxes(xScale, yScale, opts.xLabel, opts.yLabel);
}

function panelGrid(count: number): { width: number; height: number; make: (i: number, title: string) => Panel } {
  const cols = count <= 2 ? count : 2;
  const rows = Math.ceil(count / cols);
  const width = MARGIN.left + cols * (PANEL_W + MARGIN.left) ;
  const height = MARGIN.top + rows * (PANEL_H + MARGIN.bottom + MARGIN.top);
  return {
    width,
    height,
    make: (i: number, title: string) => {
      const col = i % cols;
      const row = Math.floor(i / cols);
      return new Panel(
        MARGIN.left + col * (PANEL_W + MARGIN.left),
        MARGIN.top + row * (PANEL_H + MARGIN.bottom + MARGIN.top),
        PANEL_W,
        PANEL_H,
        title
      );
    },
  };
}

/** Space-time raster of one trajectory: occupations above, outcome strokes below. */
export function renderTrajectoryRaster(trajectory: Table): string {
  requireNonEmpty(trajectory);
  const t = column(trajectory, "t");
  const site = column(trajectory, "site");
  const outcome = column(trajectory, "outcome");
  const hasOccupation = trajectory.columns.includes("occupation");
  const layout = panelGrid(hasOccupation ? 2 : 1);
  const panels: Panel[] = [];

  if (hasOccupation) {
    const occ = column(trajectory, "occupation");
    const p = layout.make(0, "site occupation");
    heatmap(p, t, site, occ, { xLabel: "t", yLabel: "site", diverging: false });
    panels.push(p);
  }
  const p = layout.make(hasOccupation ? 1 : 0, "measurement record ('1' outcomes)");
  const xScale = p.xScale(extent(t));
  const yScale = p.yScale(extent(site));
  const sites = uniqueSorted(site);
  const cellW = p.width / Math.max(uniqueSorted(t).length, 1);
  const cellH = p.height / Math.max(sites.length, 1);
  for (let i = 0; i < t.length; i++) {
    if (outcome[i] === 1) {
      p.rect(xScale.at(t[i]) - cellW / 2, yScale.at(site[i]) - cellH * 0.4, cellW, cellH * 0.8, "rgb(200,30,30)");
    }
  }
  p.frameAndAxes(xScale, yScale, "t", "site");
  panels.push(p);
  return document(layout.width, layout.height, panels);
}

interface SeriesGroup {
  key: string;
  t: number[];
  v: number[];
}

function groupBy(keys: string[], t: number[], v: number[]): SeriesGroup[] {
  const map = new Map<string, SeriesGroup>();
  for (let i = 0; i < keys.length; i++) {
    let group = map.get(keys[i]);
    if (!group) {
      group = { key: keys[i], t: [], v: [] };
      map.set(keys[i], group);
    }
    group.t.push(t[i]);
    group.v.push(v[i]);
  }
  return Array.from(map.values());
}

/** Transient order parameters with stationary levels and trajectory estimators. */
export function renderOrderParameters(
  activity: Table,
  correlations: Table,
  stationary: Table,
  estimators?: Table
): string {
  requireNonEmpty(activity);
  requireNonEmpty(correlations);
  const levels = new Map<string, number>();
  const labelIdx = stationary.columns.indexOf("label");
  if (labelIdx < 0) throw new SchemaError("stationary table lacks a label column");
  const values = column(stationary, "value");
  stationary.rows.forEach((row, i) => levels.set(row[labelIdx], values[i]));

  const corrGroups = groupBy(
    column(correlations, "di").map((di, i) => `c_${di}_${column(correlations, "dt")[i]}`),
    column(correlations, "t"),
    column(correlations, "c")
  );
  const layout = panelGrid(1 + corrGroups.length);
  const panels: Panel[] = [];

  const estGroups = new Map<string, SeriesGroup[]>();
  if (estimators) {
    const key = column(estimators, "di").map(
      (di, i) => `${di}_${column(estimators, "dt")[i]}`
    );
    const traj = column(estimators, "trajectory");
    const composite = key.map((k, i) => `${k}#${traj[i]}`);
    const grouped = groupBy(composite, column(estimators, "t"), column(estimators, "estimate"));
    for (const g of grouped) {
      const base = g.key.split("#")[0];
      if (!estGroups.has(base)) estGroups.set(base, []);
      estGroups.get(base)!.push(g);
    }
  }

  const drawSeries = (
    index: number,
    title: string,
    t: number[],
    v: number[],
    levelKeys: [string, string],
    estKey: string
  ) => {
    const p = layout.make(index, title);
    const levelVals = levelKeys.map((k) => levels.get(k)).filter((x): x is number => x !== undefined);
    const tDomain = extent(t);
    // estimator records can be longer than the ensemble horizon: clip to it
    const estSeries = (estGroups.get(estKey) ?? []).map((g) => {
      const keep = g.t.map((x) => x >= tDomain.min && x <= tDomain.max);
      return {
        key: g.key,
        t: g.t.filter((_, i) => keep[i]),
        v: g.v.filter((_, i) => keep[i]),
      };
    });
    const allV = v
      .concat(levelVals)
      .concat(estSeries.flatMap((g) => g.v.filter((x) => Number.isFinite(x))));
    const xScale = p.xScale(tDomain);
    const yScale = p.yScale(extent(allV, 0.08));
    for (const g of estSeries) {
      if (g.t.length === 0) continue;
      p.polyline(
        g.t.map((x, i) => [xScale.at(x), yScale.at(g.v[i])] as [number, number]),
        "rgb(150,150,150)",
        0.8,
        0.7
      );
    }
    const mixed = levels.get(levelKeys[0]);
    if (mixed !== undefined) {
      p.line(xScale.at(t[0]), yScale.at(mixed), xScale.at(t[t.length - 1]), yScale.at(mixed), "black", 1.2, "8,3,2,3");
    }
    const pxp = levels.get(levelKeys[1]);
    if (pxp !== undefined) {
      p.line(xScale.at(t[0]), yScale.at(pxp), xScale.at(t[t.length - 1]), yScale.at(pxp), "black", 1.2, "2,3");
    }
    p.polyline(t.map((x, i) => [xScale.at(x), yScale.at(v[i])] as [number, number]), "rgb(200,30,30)", 1.8);
    p.frameAndAxes(xScale, yScale, "t", title);
    panels.push(p);
  };

  drawSeries(0, "activity", column(activity, "t"), column(activity, "activity"),
             ["activity", "activity_pxp"], "0_0");
  corrGroups.forEach((g, i) => {
    const diDt = g.key.slice(2); // strip "c_"
    drawSeries(i + 1, g.key, g.t, g.v, [g.key, `${g.key}_pxp`], diDt);
  });
  return document(layout.width, layout.height, panels);
}

/** (V, s) heatmap with cuts at s = 0 and at the V value closest to cutV. */
export function renderPhaseDiagram(phase: Table, cutV = 5.875): string {
  requireNonEmpty(phase);
  const V = column(phase, "V");
  const s = column(phase, "s");
  const c = column(phase, "c_0_1");
  const converged = column(phase, "converged");
  const layout = panelGrid(3);
  const panels: Panel[] = [];

  const pm = layout.make(0, "temporal correlation c(0,1)");
  heatmap(pm, V, s, c, {
    xLabel: "V",
    yLabel: "s",
    diverging: true,
    skip: converged.map((x) => x === 0),
  });
  panels.push(pm);

  const sZero = s
    .map((x, i) => [x, i] as [number, number])
    .filter(([x]) => Math.abs(x) < 1e-12)
    .map(([, i]) => i);
  if (sZero.length > 0) {
    const p = layout.make(1, "cut at s = 0");
    const xs = p.xScale(extent(sZero.map((i) => V[i])));
    const ys = p.yScale(extent(sZero.map((i) => c[i]), 0.08));
    p.polyline(sZero.map((i) => [xs.at(V[i]), ys.at(c[i])] as [number, number]), "rgb(200,30,30)", 1.8);
    p.frameAndAxes(xs, ys, "V", "c(0,1)");
    panels.push(p);
  }

  const vGrid = uniqueSorted(V);
  const vStar = vGrid.reduce((best, x) => (Math.abs(x - cutV) < Math.abs(best - cutV) ? x : best), vGrid[0]);
  const atV = V.map((x, i) => [x, i] as [number, number]).filter(([x]) => x === vStar).map(([, i]) => i);
  if (atV.length > 0) {
    const p = layout.make(2, `cut at V = ${vStar}`);
    const xs = p.xScale(extent(atV.map((i) => s[i])));
    const ys = p.yScale(extent(atV.map((i) => c[i]), 0.08));
    p.polyline(atV.map((i) => [xs.at(s[i]), ys.at(c[i])] as [number, number]), "rgb(200,30,30)", 1.8);
    p.frameAndAxes(xs, ys, "s", "c(0,1)");
    panels.push(p);
  }
  return document(layout.width, layout.height, panels);
}

/** Continuous-time panels: emission raster, occupation raster, activity vs s. */
export function renderJumpDynamics(
  events: Table,
  occupations?: Table,
  scan?: Table
): string {
  const count = 1 + (occupations ? 1 : 0) + (scan ? 1 : 0);
  const layout = panelGrid(count);
  const panels: Panel[] = [];
  let index = 0;

  if (occupations) {
    requireNonEmpty(occupations);
    const traj = column(occupations, "trajectory");
    const keep = traj.map((x) => x === traj[0]);
    const t = column(occupations, "time").filter((_, i) => keep[i]);
    const site = column(occupations, "site").filter((_, i) => keep[i]);
    const occ = column(occupations, "occupation").filter((_, i) => keep[i]);
    const p = layout.make(index++, "site occupation");
    heatmap(p, t, site, occ, { xLabel: "time", yLabel: "site", diverging: false });
    panels.push(p);
  }

  requireNonEmpty(events);
  const et = column(events, "time");
  const esite = column(events, "site");
  const p = layout.make(index++, "emission events");
  const xScale = p.xScale(extent(et));
  const yScale = p.yScale(extent(esite.length > 0 ? esite : [0, 1]));
  for (let i = 0; i < et.length; i++) {
    const px = xScale.at(et[i]);
    const py = yScale.at(esite[i]);
    p.line(px, py - 6, px, py + 6, "rgb(200,30,30)", 1.2);
  }
  p.frameAndAxes(xScale, yScale, "time", "site");
  panels.push(p);

  if (scan) {
    requireNonEmpty(scan);
    const s = column(scan, "s");
    const act = column(scan, "activity");
    const sp = layout.make(index++, "stationary activity vs s");
    const xs = sp.xScale(extent(s));
    const ys = sp.yScale(extent(act, 0.08));
    sp.polyline(s.map((x, i) => [xs.at(x), ys.at(act[i])] as [number, number]), "rgb(200,30,30)", 1.8);
    sp.frameAndAxes(xs, ys, "s", "activity");
    panels.push(sp);
  }
  return document(layout.width, layout.height, panels);
}

/** Single-qubit closed-form map plus the (detuning, s) scan. */
export function renderSingleBody(map: Table, detuning: Table): string {
  requireNonEmpty(map);
  requireNonEmpty(detuning);
  const layout = panelGrid(4);
  const panels: Panel[] = [];
  const dt = column(map, "dt");
  const gamma = column(map, "gamma");
  const pA = layout.make(0, "stationary activity");
  heatmap(pA, dt, gamma, column(map, "activity"), { xLabel: "dt", yLabel: "gamma", diverging: false });
  panels.push(pA);
  const pC = layout.make(1, "temporal correlation c(0,1)");
  heatmap(pC, dt, gamma, column(map, "c_0_1"), { xLabel: "dt", yLabel: "gamma", diverging: true });
  panels.push(pC);

  const delta = column(detuning, "delta");
  const s = column(detuning, "s");
  const converged = column(detuning, "converged");
  const skip = converged.map((x) => x === 0);
  const pDA = layout.make(2, "activity (detuning vs s)");
  heatmap(pDA, delta, s, column(detuning, "activity"), { xLabel: "delta", yLabel: "s", diverging: false, skip });
  panels.push(pDA);
  const pDC = layout.make(3, "c(0,1) (detuning vs s)");
  heatmap(pDC, delta, s, column(detuning, "c_0_1"), { xLabel: "delta", yLabel: "s", diverging: true, skip });
  panels.push(pDC);
  return document(layout.width, layout.height, panels);
}
