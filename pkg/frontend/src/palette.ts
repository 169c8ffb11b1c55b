// Object color palette, kept in lockstep with the service so sidebar
// swatches match mask overlays: object k takes hue (k * 47) mod 360 at full
// saturation and value. The arithmetic mirrors the server's HSV conversion
// operation for operation (including its rounding), because one ULP of
// drift would flip rounded channel values.

const HUE_STEP = 47;

function roundHalfEven(v: number): number {
  const floor = Math.floor(v);
  const diff = v - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

export function objectColor(objectId: number): [number, number, number] {
  const hue = (objectId * HUE_STEP) % 360;
  const h = hue / 360;
  const i = Math.trunc(h * 6.0);
  const f = h * 6.0 - i;
  const p = 0.0; // value * (1 - saturation), with s = v = 1
  const q = 1.0 - f;
  const t = 1.0 - (1.0 - f);
  let rgb: [number, number, number];
  switch (i % 6) {
    case 0:
      rgb = [1.0, t, p];
      break;
    case 1:
      rgb = [q, 1.0, p];
      break;
    case 2:
      rgb = [p, 1.0, t];
      break;
    case 3:
      rgb = [p, q, 1.0];
      break;
    case 4:
      rgb = [t, p, 1.0];
      break;
    default:
      rgb = [1.0, p, q];
      break;
  }
  return [
    roundHalfEven(rgb[0] * 255),
    roundHalfEven(rgb[1] * 255),
    roundHalfEven(rgb[2] * 255),
  ];
}

export function objectColorCss(objectId: number): string {
  const [r, g, b] = objectColor(objectId);
  return `rgb(${r}, ${g}, ${b})`;
}
