/**
 * Figure builders for the lab's CSV reports.
 *
 * Each builder is a pure function of the parsed table: fixed bin and axis
 * rules, no randomness, no mutation of the input. Builders return both the
 * echarts option and the plotted arrays so tests can assert on the data
 * rather than on pixels.
 */

import type { EChartsOption } from 'echarts';

import { chi2Curve } from './chi2';
import { num, requireColumns, Table } from './csv';

export type FigureKind = 'z-hist' | 'coverage' | 'convergence' | 'mu-distance' | 'pinv';

export const FIGURE_KINDS: FigureKind[] = [
  'z-hist', 'coverage', 'convergence', 'mu-distance', 'pinv',
];

export interface FigureSpec {
  inputCsv: string;
  figureKind: FigureKind;
  outputImage: string;
  dof?: number;
  levels?: number[];
}

export interface BuiltFigure {
  kind: FigureKind;
  option: EChartsOption;
  /** The arrays actually plotted, keyed by series name. */
  data: Record<string, number[][]>;
}

const HIST_BINS = 40;

function byReplication(table: Table): Map<string, Record<string, string>> {
  // last row per replication: per-replication summary columns repeat per iteration
  const last = new Map<string, Record<string, string>>();
  for (const row of table.rows) {
    last.set(row.replication, row);
  }
  return last;
}

export function buildZHist(table: Table, dofOverride?: number): BuiltFigure {
  requireColumns('z-hist', table, ['z', 'dof']);
  const z = table.rows.map((r) => num(r, 'z')).filter((v) => Number.isFinite(v));
  const dof = dofOverride ?? num(table.rows[0], 'dof');
  const xMax = Math.max(...z, dof) * 1.05;
  const width = xMax / HIST_BINS;
  const counts = new Array<number>(HIST_BINS).fill(0);
  for (const v of z) {
    const bin = Math.min(Math.floor(v / width), HIST_BINS - 1);
    counts[bin] += 1;
  }
  const hist: number[][] = counts.map((c, i) => [
    (i + 0.5) * width,
    c / (z.length * width),
  ]);
  const ref = chi2Curve(dof, xMax);
  const refSeries: number[][] = ref.x.map((x, i) => [x, ref.y[i]]);
  return {
    kind: 'z-hist',
    data: { histogram: hist, reference: refSeries },
    option: {
      title: { text: `Z statistic vs chi-squared(${dof})` },
      xAxis: { type: 'value', name: 'z', max: xMax },
      yAxis: { type: 'value', name: 'density' },
      series: [
        { name: 'empirical', type: 'bar', barWidth: '90%', data: hist },
        { name: `chi2(${dof})`, type: 'line', showSymbol: false, data: refSeries },
      ],
      legend: { top: 30 },
      animation: false,
    },
  };
}

export function buildCoverage(table: Table, levels?: number[]): BuiltFigure {
  const coverColumns = table.columns.filter((c) => c.startsWith('cover_'));
  if (coverColumns.length === 0) {
    requireColumns('coverage', table, ['cover_<level>']);
  }
  let pairs = coverColumns
    .map((c) => ({ column: c, level: Number(c.slice('cover_'.length)) / 100 }))
    .sort((a, b) => a.level - b.level);
  if (levels && levels.length > 0) {
    pairs = pairs.filter((p) => levels.some((lv) => Math.abs(lv - p.level) < 1e-9));
  }
  const points: number[][] = pairs.map((p) => {
    const hits = table.rows.map((r) => num(r, p.column));
    const rate = hits.reduce((s, v) => s + v, 0) / hits.length;
    return [p.level, rate];
  });
  const diagonal: number[][] = [[0, 0], [1, 1]];
  return {
    kind: 'coverage',
    data: { empirical: points, diagonal },
    option: {
      title: { text: 'Credible-set coverage' },
      xAxis: { type: 'value', name: 'nominal level', min: 0, max: 1 },
      yAxis: { type: 'value', name: 'empirical coverage', min: 0, max: 1 },
      series: [
        { name: 'empirical', type: 'line', data: points, symbolSize: 8 },
        { name: 'nominal', type: 'line', showSymbol: false, lineStyle: { type: 'dashed' }, data: diagonal },
      ],
      legend: { top: 30 },
      animation: false,
    },
  };
}

export function buildConvergence(table: Table): BuiltFigure {
  requireColumns('convergence', table, ['iteration', 'residual_norm', 'cov_trace']);
  const iters = table.rows.map((r) => num(r, 'iteration'));
  const residual: number[][] = table.rows.map((r) => [num(r, 'iteration'), num(r, 'residual_norm')]);
  const trace: number[][] = table.rows.map((r) => [num(r, 'iteration'), num(r, 'cov_trace')]);
  const data: Record<string, number[][]> = { residual, cov_trace: trace };
  const series: EChartsOption['series'] = [
    { name: 'residual norm', type: 'line', yAxisIndex: 1, showSymbol: false, data: residual },
    { name: 'trace of covariance', type: 'line', showSymbol: false, data: trace },
  ];
  if (table.columns.includes('trace_identity')) {
    const identity: number[][] = table.rows.map((r) => [num(r, 'iteration'), num(r, 'trace_identity')]);
    const d = identity[0][1];
    const reference: number[][] = iters.map((m) => [m, d - m]);
    data.trace_identity = identity;
    data.reference_d_minus_m = reference;
    (series as object[]).push(
      { name: 'trace identity', type: 'line', showSymbol: false, data: identity },
      {
        name: 'd - m', type: 'line', showSymbol: false,
        lineStyle: { type: 'dashed' }, data: reference,
      },
    );
  }
  return {
    kind: 'convergence',
    data,
    option: {
      title: { text: 'Solve convergence' },
      xAxis: { type: 'value', name: 'iteration m' },
      yAxis: [
        { type: 'value', name: 'trace' },
        { type: 'log', name: 'residual', min: 'dataMin' },
      ],
      series,
      legend: { top: 30 },
      animation: false,
    },
  };
}

export function buildMuDistance(table: Table): BuiltFigure {
  requireColumns('mu-distance', table, ['iteration', 'comparison', 'weight', 'w2']);
  const series: EChartsOption['series'] = [];
  const data: Record<string, number[][]> = {};
  const weights = [...new Set(
    table.rows.filter((r) => r.comparison === 'mu_m').map((r) => r.weight),
  )].sort();
  for (const weight of weights) {
    const points: number[][] = table.rows
      .filter((r) => r.comparison === 'mu_m' && r.weight === weight)
      .map((r) => [num(r, 'iteration'), num(r, 'w2')]);
    data[weight] = points;
    (series as object[]).push({ name: weight, type: 'line', data: points });
  }
  return {
    kind: 'mu-distance',
    data,
    option: {
      title: { text: 'W2 distance from solver belief to projected measure, per weight' },
      xAxis: { type: 'value', name: 'iteration m' },
      yAxis: { type: 'value', name: 'W2 distance' },
      series,
      legend: { top: 30 },
      animation: false,
    },
  };
}

export function buildPinv(table: Table): BuiltFigure {
  requireColumns('pinv', table, [
    'replication', 'iterations', 'dist_to_pinv', 'residual_final', 'optimal_residual',
  ]);
  const reps = [...byReplication(table).values()];
  const dist: number[][] = reps.map((r) => [num(r, 'replication'), num(r, 'dist_to_pinv')]);
  const residual: number[][] = reps.map((r) => [num(r, 'replication'), num(r, 'residual_final')]);
  const optimal: number[][] = reps.map((r) => [num(r, 'replication'), num(r, 'optimal_residual')]);
  return {
    kind: 'pinv',
    data: { dist_to_pinv: dist, residual_final: residual, optimal_residual: optimal },
    option: {
      title: { text: 'Distance to the minimum-norm least-squares solution' },
      xAxis: { type: 'category', name: 'replication' },
      yAxis: { type: 'value', name: 'value' },
      series: [
        { name: 'dist to pinv solution', type: 'bar', data: dist.map((p) => p[1]) },
        { name: 'final residual', type: 'scatter', data: residual.map((p) => p[1]) },
        { name: 'optimal residual', type: 'scatter', data: optimal.map((p) => p[1]) },
      ],
      legend: { top: 30 },
      animation: false,
    },
  };
}

export function buildFigure(kind: FigureKind, table: Table, spec?: Partial<FigureSpec>): BuiltFigure {
  switch (kind) {
    case 'z-hist':
      return buildZHist(table, spec?.dof);
    case 'coverage':
      return buildCoverage(table, spec?.levels);
    case 'convergence':
      return buildConvergence(table);
    case 'mu-distance':
      return buildMuDistance(table);
    case 'pinv':
      return buildPinv(table);
    default:
      throw new Error(`unknown figure kind ${kind as string}`);
  }
}
