/** Least-squares slope of log(y) against log(x), mirroring the solver's fit. */

export const ERROR_FLOOR = 1e-13;

export function fitLogLogSlope(xs: number[], ys: number[]): number | null {
  const pts: Array<[number, number]> = [];
  for (let i = 0; i < xs.length; i++) {
    if (ys[i] > ERROR_FLOOR && xs[i] > 0) {
      pts.push([Math.log(xs[i]), Math.log(ys[i])]);
    }
  }
  if (pts.length < 2) return null;
  const mx = pts.reduce((s, p) => s + p[0], 0) / pts.length;
  const my = pts.reduce((s, p) => s + p[1], 0) / pts.length;
  let num = 0;
  let den = 0;
  for (const [x, y] of pts) {
    num += (x - mx) * (y - my);
    den += (x - mx) * (x - mx);
  }
  return den === 0 ? null : num / den;
}
