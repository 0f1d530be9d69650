import { mkdtempSync, readFileSync, existsSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

import { describe, expect, it } from 'vitest';

import { chi2Pdf } from '../src/chi2';
import { readTable, SchemaMismatch } from '../src/csv';
import { buildConvergence, buildCoverage, buildFigure, buildMuDistance, buildPinv, buildZHist, FIGURE_KINDS, FigureKind } from '../src/figures';
import { render, toSvg } from '../src/render';
import { runPlot } from '../src/cli';

const GOLDEN = join(__dirname, 'golden');
const INPUT_FOR_KIND: Record<FigureKind, string> = {
  'z-hist': join(GOLDEN, 'calibrate.csv'),
  coverage: join(GOLDEN, 'calibrate.csv'),
  convergence: join(GOLDEN, 'solve.csv'),
  'mu-distance': join(GOLDEN, 'oracle.csv'),
  pinv: join(GOLDEN, 'pinv.csv'),
};

function outDir(): string {
  return mkdtempSync(join(tmpdir(), 'bayescg-plots-'));
}

describe('chi-squared density', () => {
  it('matches the exponential special case dof = 2', () => {
    for (const x of [0.5, 1.0, 3.0]) {
      expect(chi2Pdf(x, 2)).toBeCloseTo(0.5 * Math.exp(-x / 2), 12);
    }
  });

  it('integrates to one', () => {
    const dof = 15;
    const n = 20000;
    const xMax = 80;
    let acc = 0;
    for (let i = 1; i < n; i += 1) {
      acc += chi2Pdf((i * xMax) / n, dof) * (xMax / n);
    }
    expect(acc).toBeGreaterThan(0.999);
    expect(acc).toBeLessThan(1.001);
  });
});

describe('every figure kind renders from its golden CSV', () => {
  for (const kind of FIGURE_KINDS) {
    it(`renders ${kind}`, () => {
      const out = join(outDir(), `${kind}.svg`);
      const figure = render({
        inputCsv: INPUT_FOR_KIND[kind],
        figureKind: kind,
        outputImage: out,
      });
      expect(existsSync(out)).toBe(true);
      const svg = readFileSync(out, 'utf8');
      expect(svg).toContain('<svg');
      expect(Object.keys(figure.data).length).toBeGreaterThan(0);
    });
  }
});

describe('convergence figure', () => {
  it('trace curve terminates at zero at m = d', () => {
    const table = readTable(INPUT_FOR_KIND.convergence);
    const figure = buildConvergence(table);
    const trace = figure.data.cov_trace;
    const d = trace.length - 1;
    expect(trace[0][1]).toBeCloseTo(d, 9);
    expect(trace[d][0]).toBe(d);
    expect(Math.abs(trace[d][1])).toBeLessThanOrEqual(1e-9 * trace[0][1]);
    // the d - m reference line is overlaid and ends at zero too
    const reference = figure.data.reference_d_minus_m;
    expect(reference[d][1]).toBe(0);
  });
});

describe('z histogram', () => {
  it('bins integrate to one and the overlay is the chi2 density', () => {
    const table = readTable(INPUT_FOR_KIND['z-hist']);
    const figure = buildZHist(table);
    const hist = figure.data.histogram;
    const width = 2 * hist[0][0];
    const mass = hist.reduce((s, [, density]) => s + density * width, 0);
    expect(mass).toBeGreaterThan(0.999);
    expect(mass).toBeLessThan(1.001);
    const ref = figure.data.reference;
    const mid = ref[Math.floor(ref.length / 2)];
    expect(mid[1]).toBeCloseTo(chi2Pdf(mid[0], 7), 12);
  });
});

describe('coverage figure', () => {
  it('uses the cover_* columns against the diagonal', () => {
    const table = readTable(INPUT_FOR_KIND.coverage);
    const figure = buildCoverage(table);
    const points = figure.data.empirical;
    expect(points.map((p) => p[0])).toEqual([0.5, 0.8, 0.9, 0.95]);
    for (const [, rate] of points) {
      expect(rate).toBeGreaterThanOrEqual(0);
      expect(rate).toBeLessThanOrEqual(1);
    }
    expect(figure.data.diagonal).toEqual([[0, 0], [1, 1]]);
  });

  it('level filter keeps a subset', () => {
    const table = readTable(INPUT_FOR_KIND.coverage);
    const figure = buildCoverage(table, [0.8, 0.95]);
    expect(figure.data.empirical.map((p) => p[0])).toEqual([0.8, 0.95]);
  });
});

describe('mu-distance figure', () => {
  it('draws one series per weight', () => {
    const table = readTable(INPUT_FOR_KIND['mu-distance']);
    const figure = buildMuDistance(table);
    expect(Object.keys(figure.data).sort()).toEqual([
      'a', 'a_sigma0_at', 'euclidean', 'sigma0',
    ]);
    for (const points of Object.values(figure.data)) {
      expect(points.length).toBeGreaterThan(2);
    }
  });
});

describe('pinv figure', () => {
  it('reduces to one point per replication', () => {
    const table = readTable(INPUT_FOR_KIND.pinv);
    const figure = buildPinv(table);
    expect(figure.data.dist_to_pinv.length).toBe(6);
    expect(figure.data.residual_final.length).toBe(6);
  });
});

describe('schema validation', () => {
  it('rejects a CSV missing the declared columns, naming them', () => {
    const table = readTable(INPUT_FOR_KIND.convergence); // solve.csv has no z column
    let caught: SchemaMismatch | undefined;
    try {
      buildZHist(table);
    } catch (error) {
      caught = error as SchemaMismatch;
    }
    expect(caught).toBeInstanceOf(SchemaMismatch);
    expect(caught!.missing).toEqual(['z', 'dof']);
  });
});

describe('determinism', () => {
  it('same CSV produces identical plotted arrays and SVG content', () => {
    const table1 = readTable(INPUT_FOR_KIND['z-hist']);
    const table2 = readTable(INPUT_FOR_KIND['z-hist']);
    const a = buildFigure('z-hist', table1);
    const b = buildFigure('z-hist', table2);
    expect(a.data).toEqual(b.data);
    // the renderer embeds a per-process instance counter in class names;
    // determinism is asserted on the drawing itself, not those ids
    const normalize = (svg: string) =>
      svg.replace(/zr\d+/g, 'zr').replace(/cls-\d+/g, 'cls');
    expect(normalize(toSvg(a))).toBe(normalize(toSvg(b)));
  });

  it('building does not mutate the parsed table', () => {
    const table = readTable(INPUT_FOR_KIND.coverage);
    const snapshot = JSON.stringify(table.rows);
    buildCoverage(table);
    expect(JSON.stringify(table.rows)).toBe(snapshot);
  });
});

describe('command line', () => {
  it('renders through the plot command', () => {
    const out = join(outDir(), 'cli.svg');
    const code = runPlot(['plot', 'z-hist', '--in', INPUT_FOR_KIND['z-hist'], '--out', out]);
    expect(code).toBe(0);
    expect(readFileSync(out, 'utf8')).toContain('<svg');
  });

  it('reports schema mismatches with a distinct exit code', () => {
    const out = join(outDir(), 'bad.svg');
    const code = runPlot(['plot', 'z-hist', '--in', INPUT_FOR_KIND.convergence, '--out', out]);
    expect(code).toBe(3);
  });

  it('rejects unknown figure kinds', () => {
    const out = join(outDir(), 'x.svg');
    expect(runPlot(['plot', 'nonsense', '--in', INPUT_FOR_KIND.pinv, '--out', out])).toBe(2);
  });
});
