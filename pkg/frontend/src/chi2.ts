/** Chi-squared density for the z-histogram overlay. */

// Lanczos approximation, g = 7, n = 9; |error| < 1e-13 on the positive axis.
const LANCZOS = [
  0.99999999999980993, 676.5203681218851, -1259.1392167224028,
  771.32342877765313, -176.61502916214059, 12.507343278686905,
  -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
];

export function logGamma(x: number): number {
  if (x < 0.5) {
    // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return Math.log(Math.PI / Math.sin(Math.PI * x)) - logGamma(1 - x);
  }
  const z = x - 1;
  let acc = LANCZOS[0];
  for (let i = 1; i < LANCZOS.length; i += 1) {
    acc += LANCZOS[i] / (z + i);
  }
  const t = z + 7.5;
  return 0.5 * Math.log(2 * Math.PI) + (z + 0.5) * Math.log(t) - t + Math.log(acc);
}

export function chi2Pdf(x: number, dof: number): number {
  if (x < 0 || dof <= 0) {
    return 0;
  }
  if (x === 0) {
    return dof === 2 ? 0.5 : dof < 2 ? Infinity : 0;
  }
  const k = dof / 2;
  const logPdf = (k - 1) * Math.log(x) - x / 2 - k * Math.LN2 - logGamma(k);
  return Math.exp(logPdf);
}

export function chi2Curve(dof: number, xMax: number, points = 200): { x: number[]; y: number[] } {
  const x: number[] = [];
  const y: number[] = [];
  for (let i = 1; i <= points; i += 1) {
    const xi = (xMax * i) / points;
    x.push(xi);
    y.push(chi2Pdf(xi, dof));
  }
  return { x, y };
}
