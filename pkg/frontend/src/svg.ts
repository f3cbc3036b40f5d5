/**
 * Minimal deterministic SVG builder: axes, heatmap cells, polylines, strokes.
 * No timestamps, no randomness — identical inputs give identical bytes.
 */

export interface Extent {
  min: number;
  max: number;
}

export function extent(values: number[], pad = 0): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!(min <= max)) throw new Error("extent of empty data");
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const span = max - min;
  return { min: min - pad * span, max: max + pad * span };
}

export function fmt(value: number, digits = 4): string {
  if (!Number.isFinite(value)) return "0";
  const out = value.toFixed(digits);
  return out === "-0." + "0".repeat(digits) ? out.slice(1) : out;
}

export class Scale {
  constructor(
    readonly domain: Extent,
    readonly rangeMin: number,
    readonly rangeMax: number
  ) {}

  at(value: number): number {
    const t = (value - this.domain.min) / (this.domain.max - this.domain.min);
    return this.rangeMin + t * (this.rangeMax - this.rangeMin);
  }

  ticks(count = 5): number[] {
    const out: number[] = [];
    for (let i = 0; i < count; i++) {
      out.push(this.domain.min + ((this.domain.max - this.domain.min) * i) / (count - 1));
    }
    return out;
  }
}

/** Diverging blue-white-red map centered at zero. */
export function divergingColor(value: number, absMax: number): string {
  const t = absMax > 0 ? Math.max(-1, Math.min(1, value / absMax)) : 0;
  const channel = (x: number) => Math.round(255 * Math.max(0, Math.min(1, x)));
  if (t >= 0) {
    return `rgb(255,${channel(1 - 0.75 * t)},${channel(1 - t)})`;
  }
  return `rgb(${channel(1 + t)},${channel(1 + 0.75 * t)},255)`;
}

/** Sequential white-to-dark-blue map on [0, 1]. */
export function sequentialColor(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const r = Math.round(255 * (1 - 0.85 * clamped));
  const g = Math.round(255 * (1 - 0.65 * clamped));
  const b = Math.round(255 * (1 - 0.25 * clamped));
  return `rgb(${r},${g},${b})`;
}

export class Panel {
  readonly parts: string[] = [];

  constructor(
    readonly x0: number,
    readonly y0: number,
    readonly width: number,
    readonly height: number,
    readonly title: string
  ) {}

  xScale(domain: Extent): Scale {
    return new Scale(domain, this.x0, this.x0 + this.width);
  }

  /** y grows upward in data space, downward in SVG space. */
  yScale(domain: Extent): Scale {
    return new Scale(domain, this.y0 + this.height, this.y0);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x, 2)}" y="${fmt(y, 2)}" width="${fmt(Math.max(w, 0.1), 2)}" ` +
        `height="${fmt(Math.max(h, 0.1), 2)}" fill="${fill}"/>`
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1, 2)}" y1="${fmt(y1, 2)}" x2="${fmt(x2, 2)}" y2="${fmt(y2, 2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5, opacity = 1): void {
    const path = points.map(([x, y]) => `${fmt(x, 2)},${fmt(y, 2)}`).join(" ");
    this.parts.push(
      `<polyline points="${path}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}" stroke-opacity="${opacity}"/>`
    );
  }

  text(x: number, y: number, content: string, size = 11, anchor = "middle"): void {
    this.parts.push(
      `<text x="${fmt(x, 2)}" y="${fmt(y, 2)}" font-size="${size}" ` +
        `font-family="sans-serif" text-anchor="${anchor}">${content}</text>`
    );
  }

  frameAndAxes(xs: Scale, ys: Scale, xLabel: string, yLabel: string): void {
    this.parts.push(
      `<rect x="${fmt(this.x0, 2)}" y="${fmt(this.y0, 2)}" width="${fmt(this.width, 2)}" ` +
        `height="${fmt(this.height, 2)}" fill="none" stroke="black"/>`
    );
    for (const tick of xs.ticks()) {
      const px = xs.at(tick);
      this.line(px, this.y0 + this.height, px, this.y0 + this.height + 4, "black");
      this.text(px, this.y0 + this.height + 16, fmt(tick, 2));
    }
    for (const tick of ys.ticks()) {
      const py = ys.at(tick);
      this.line(this.x0 - 4, py, this.x0, py, "black");
      this.text(this.x0 - 6, py + 3, fmt(tick, 2), 11, "end");
    }
    this.text(this.x0 + this.width / 2, this.y0 + this.height + 32, xLabel);
    this.parts.push(
      `<text x="${fmt(this.x0 - 40, 2)}" y="${fmt(this.y0 + this.height / 2, 2)}" font-size="11" ` +
        `font-family="sans-serif" text-anchor="middle" ` +
        `transform="rotate(-90 ${fmt(this.x0 - 40, 2)} ${fmt(this.y0 + this.height / 2, 2)})">${yLabel}</text>`
    );
    this.text(this.x0 + this.width / 2, this.y0 - 8, this.title, 12);
  }
}

export function document(width: number, height: number, panels: Panel[]): string {
  const body = panels.map((p) => p.parts.join("\n")).join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}
