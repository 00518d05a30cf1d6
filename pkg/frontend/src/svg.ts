/** Scene -> SVG text. Output is a pure function of the scene, so repeated
 * renders are byte-identical. */

import { Primitive, Rgb, Scene } from "./scene.js";

function color(c: Rgb): string {
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

function round(v: number): string {
  return String(Math.round(v * 100) / 100);
}

function emit(prim: Primitive): string {
  switch (prim.kind) {
    case "rect":
      return `<rect x="${round(prim.x)}" y="${round(prim.y)}" width="${round(prim.w)}" height="${round(prim.h)}" fill="${color(prim.color)}"/>`;
    case "polyline": {
      const points = prim.points.map(([x, y]) => `${round(x)},${round(y)}`).join(" ");
      return `<polyline points="${points}" fill="none" stroke="${color(prim.color)}" stroke-width="1"/>`;
    }
    case "text":
      return `<text x="${round(prim.x)}" y="${round(prim.y)}" font-family="monospace" font-size="11" fill="${color(prim.color)}">${escapeXml(prim.text)}</text>`;
  }
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function sceneToSvg(scene: Scene): string {
  const body = scene.primitives.map(emit).join("\n  ");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" height="${scene.height}" ` +
    `viewBox="0 0 ${scene.width} ${scene.height}">\n  ${body}\n</svg>\n`
  );
}
