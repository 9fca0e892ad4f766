// Detection overlays. Boxes arrive normalized to [0, 1] in the import
// format, so placement is pure percentage geometry and works at any
// rendered page size.

export interface NormalizedBox {
  class_name: string;
  score: number;
  box: readonly [number, number, number, number];
}

export interface BoxPlacement {
  left: string;
  top: string;
  width: string;
  height: string;
  title: string;
}

const PERCENT_DECIMALS = 2;

function pct(value: number): string {
  return `${(100 * value).toFixed(PERCENT_DECIMALS)}%`;
}

/** CSS placement for one normalized box inside a positioned container. */
export function placeBox(det: NormalizedBox): BoxPlacement {
  const [x0, y0, x1, y1] = det.box;
  return {
    left: pct(x0),
    top: pct(y0),
    width: pct(x1 - x0),
    height: pct(y1 - y0),
    title: `${det.class_name} ${det.score.toFixed(3)}`,
  };
}

/** Append absolutely positioned box outlines over a page thumbnail. */
export function renderOverlays(container: HTMLElement, detections: readonly NormalizedBox[]): void {
  for (const det of detections) {
    const placement = placeBox(det);
    const el = container.ownerDocument.createElement("div");
    el.className = "detection-box";
    el.style.left = placement.left;
    el.style.top = placement.top;
    el.style.width = placement.width;
    el.style.height = placement.height;
    el.title = placement.title;
    container.appendChild(el);
  }
}
