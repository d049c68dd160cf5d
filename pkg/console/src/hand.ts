// 2.5D skeletal hand built from the 14 streamed joint angles.
//
// The hand is posed in a flat palm-up frame (wrist at the origin, +y toward
// the fingertips), then projected: pronation foreshortens x, finger flexion
// folds each chain edge-on with a small sideways drift as the depth cue,
// wrist flexion tilts the hand about the wrist, and base roll turns the
// whole arm about the forearm base. Pure geometry, so the same output feeds
// the canvas in the browser and the SVG snapshot in tests.

import { N_JOINTS } from "./protocol.js";

export interface Pt {
  x: number;
  y: number;
}

export interface HandGeometry {
  forearm: [Pt, Pt];
  palm: Pt[];
  /** Joint chains in drawing order: thumb, index, middle, ring, little. */
  digits: Pt[][];
}

const WRIST: Pt = { x: 120, y: 186 };
const FOREARM_BASE: Pt = { x: 120, y: 228 };
const PALM_LENGTH = 58;
const PALM_HALF_WIDTH = 34;
const DEPTH_DRIFT = 0.3; // sideways slide per unit of flexion, the "0.5D"

const FINGERS = [
  { offset: -25, proximal: 27, distal: 21 }, // index
  { offset: -8, proximal: 30, distal: 24 }, // middle
  { offset: 8, proximal: 28, distal: 22 }, // ring
  { offset: 25, proximal: 22, distal: 17 }, // little
];

const THUMB = { offset: -PALM_HALF_WIDTH, rise: 16, baseAngle: -0.9, proximal: 26, distal: 20 };

function rotate(p: Pt, about: Pt, angle: number): Pt {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const dx = p.x - about.x;
  const dy = p.y - about.y;
  return { x: about.x + dx * c - dy * s, y: about.y + dx * s + dy * c };
}

export function handGeometry(joints: readonly number[]): HandGeometry {
  if (joints.length !== N_JOINTS) {
    throw new Error(`expected ${N_JOINTS} joints, got ${joints.length}`);
  }
  const [
    thumbAbduction,
    thumbMcp,
    thumbIp,
    indexMcp,
    indexPip,
    middleMcp,
    middlePip,
    ringMcp,
    ringPip,
    littleMcp,
    littlePip,
    wristPronation,
    wristFlexion,
    baseRoll,
  ] = joints;

  // Pose everything in the local palm frame first (wrist at origin, y up).
  const palm: Pt[] = [
    { x: -PALM_HALF_WIDTH * 0.8, y: 4 },
    { x: -PALM_HALF_WIDTH, y: PALM_LENGTH },
    { x: PALM_HALF_WIDTH, y: PALM_LENGTH },
    { x: PALM_HALF_WIDTH * 0.8, y: 4 },
  ];

  const flexions = [
    [indexMcp, indexPip],
    [middleMcp, middlePip],
    [ringMcp, ringPip],
    [littleMcp, littlePip],
  ];
  const digits: Pt[][] = [];

  // Thumb: swings out with abduction, curls back across the palm in plane.
  const thumbAnchor: Pt = { x: THUMB.offset, y: THUMB.rise };
  const t1 = THUMB.baseAngle - thumbAbduction + thumbMcp;
  const t2 = t1 + thumbIp;
  const thumbMid: Pt = {
    x: thumbAnchor.x + THUMB.proximal * Math.sin(t1),
    y: thumbAnchor.y + THUMB.proximal * Math.cos(t1),
  };
  const thumbTip: Pt = {
    x: thumbMid.x + THUMB.distal * Math.sin(t2),
    y: thumbMid.y + THUMB.distal * Math.cos(t2),
  };
  digits.push([thumbAnchor, thumbMid, thumbTip]);

  // Fingers: flexion folds the chain edge-on (cos shortens the reach, a
  // small sin drift keeps the fold visible instead of collapsing to a dot).
  FINGERS.forEach((finger, i) => {
    const [mcp, pip] = flexions[i];
    const anchor: Pt = { x: finger.offset, y: PALM_LENGTH };
    const mid: Pt = {
      x: anchor.x + finger.proximal * Math.sin(mcp) * DEPTH_DRIFT,
      y: anchor.y + finger.proximal * Math.cos(mcp),
    };
    const cumulative = mcp + pip;
    const tip: Pt = {
      x: mid.x + finger.distal * Math.sin(cumulative) * DEPTH_DRIFT,
      y: mid.y + finger.distal * Math.cos(cumulative),
    };
    digits.push([anchor, mid, tip]);
  });

  // Project: pronation foreshortens x, wrist flexion tilts about the wrist,
  // then flip into canvas coordinates and roll about the forearm base.
  const squeeze = Math.cos(wristPronation);
  const cw = Math.cos(wristFlexion);
  const sw = Math.sin(wristFlexion);
  const toCanvas = (p: Pt): Pt => {
    const x = p.x * squeeze;
    const tilted: Pt = { x: x * cw - p.y * sw, y: x * sw + p.y * cw };
    const onCanvas: Pt = { x: WRIST.x + tilted.x, y: WRIST.y - tilted.y };
    return rotate(onCanvas, FOREARM_BASE, baseRoll);
  };

  return {
    forearm: [rotate(FOREARM_BASE, FOREARM_BASE, baseRoll), toCanvas({ x: 0, y: 0 })],
    palm: palm.map(toCanvas),
    digits: digits.map((chain) => chain.map(toCanvas)),
  };
}

const fmt = (n: number): string => n.toFixed(2);

const points = (pts: Pt[]): string => pts.map((p) => `${fmt(p.x)},${fmt(p.y)}`).join(" ");

/** Deterministic SVG rendering of one hand pose; byte-stable for snapshots. */
export function handToSvg(geometry: HandGeometry): string {
  const lines: string[] = [];
  lines.push('<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 240 240" width="240" height="240">');
  lines.push('  <rect x="0" y="0" width="240" height="240" fill="#0f141a"/>');
  const [base, wrist] = geometry.forearm;
  lines.push(
    `  <line x1="${fmt(base.x)}" y1="${fmt(base.y)}" x2="${fmt(wrist.x)}" y2="${fmt(wrist.y)}"` +
      ' stroke="#3b4c5e" stroke-width="10" stroke-linecap="round"/>',
  );
  lines.push(
    `  <polygon points="${points(geometry.palm)}" fill="#23303d" stroke="#3b4c5e" stroke-width="2"/>`,
  );
  for (const chain of geometry.digits) {
    lines.push(
      `  <polyline points="${points(chain)}" fill="none" stroke="#58d0a8"` +
        ' stroke-width="4" stroke-linecap="round" stroke-linejoin="round"/>',
    );
    for (const p of chain) {
      lines.push(`  <circle cx="${fmt(p.x)}" cy="${fmt(p.y)}" r="2.5" fill="#8fe6c8"/>`);
    }
  }
  lines.push("</svg>");
  return lines.join("\n") + "\n";
}

export function renderHandSvg(joints: readonly number[]): string {
  return handToSvg(handGeometry(joints));
}
