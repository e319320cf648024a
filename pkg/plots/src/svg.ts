/**
 * Deterministic SVG rendering of a chart model.
 *
 * Pure string assembly: the same model always yields byte-identical
 * markup, so figures can be diffed and regression-tested.
 */

import { Bar, ChartModel } from "./chart";

const WIDTH = 880;
const HEIGHT = 520;
const MARGIN = { top: 56, right: 24, bottom: 72, left: 64 };
const PALETTE = ["#4878a8", "#e49444", "#5ba053", "#c65b5b", "#8a6fae", "#807f7e"];

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function round(value: number): string {
  return (Math.round(value * 100) / 100).toString();
}

export function renderSvg(model: ChartModel): string {
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const groups = model.groups.length > 0 ? model.groups : [""];
  const slotW = plotW / model.categories.length;
  const barW = Math.min(64, (slotW * 0.8) / groups.length);

  const x = (bar: Bar) => {
    const slot = model.categories.indexOf(bar.x);
    const lane = groups.indexOf(bar.group);
    const innerW = barW * groups.length;
    return MARGIN.left + slot * slotW + (slotW - innerW) / 2 + lane * barW;
  };
  const y = (percent: number) => MARGIN.top + plotH * (1 - percent / 100);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="28" text-anchor="middle" font-size="18">` +
    `${esc(model.title)}</text>`);

  // y axis: 0..100 percent with gridlines every 20
  for (let tick = 0; tick <= 100; tick += 20) {
    const ty = y(tick);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${round(ty)}" x2="${WIDTH - MARGIN.right}" ` +
      `y2="${round(ty)}" stroke="#dddddd"/>`);
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${round(ty + 4)}" text-anchor="end" ` +
      `font-size="12">${tick}</text>`);
  }
  parts.push(
    `<text x="18" y="${MARGIN.top + plotH / 2}" font-size="13" text-anchor="middle" ` +
    `transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${esc(model.yLabel)}</text>`);

  for (const bar of model.bars) {
    const bx = x(bar);
    const by = y(bar.heightPercent);
    const color = PALETTE[groups.indexOf(bar.group) % PALETTE.length];
    const barH = MARGIN.top + plotH - by;
    parts.push(
      `<rect x="${round(bx)}" y="${round(by)}" width="${round(barW)}" ` +
      `height="${round(barH)}" fill="${color}" data-accuracy="${bar.accuracy}" ` +
      `data-annotation="${esc(bar.annotation)}"/>`);
    if (bar.annotation) {
      parts.push(
        `<text x="${round(bx + barW / 2)}" y="${round(by - 6)}" text-anchor="middle" ` +
        `font-size="11">${esc(bar.annotation)}</text>`);
    }
  }

  for (const [slot, category] of model.categories.entries()) {
    parts.push(
      `<text x="${round(MARGIN.left + slot * slotW + slotW / 2)}" ` +
      `y="${HEIGHT - MARGIN.bottom + 22}" text-anchor="middle" font-size="13">` +
      `${esc(category)}</text>`);
  }

  if (groups.length > 1 || groups[0] !== "") {
    let lx = MARGIN.left;
    const ly = HEIGHT - 20;
    for (const [i, group] of groups.entries()) {
      parts.push(
        `<rect x="${lx}" y="${ly - 10}" width="12" height="12" ` +
        `fill="${PALETTE[i % PALETTE.length]}"/>`);
      parts.push(
        `<text x="${lx + 18}" y="${ly}" font-size="12">${esc(group)}</text>`);
      lx += 24 + group.length * 7;
    }
  }

  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" ` +
    `x2="${WIDTH - MARGIN.right}" y2="${MARGIN.top + plotH}" stroke="#333333"/>`);
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
