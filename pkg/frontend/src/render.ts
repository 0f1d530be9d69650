import { writeFileSync } from 'fs';
import * as echarts from 'echarts';

import { readTable } from './csv';
import { buildFigure, BuiltFigure, FigureSpec } from './figures';

const WIDTH = 840;
const HEIGHT = 520;

export function toSvg(figure: BuiltFigure): string {
  const chart = echarts.init(null, null, {
    renderer: 'svg',
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  try {
    chart.setOption(figure.option);
    return chart.renderToSVGString();
  } finally {
    chart.dispose();
  }
}

/** Read the spec's CSV, build the figure, write the SVG; returns the built data. */
export function render(spec: FigureSpec): BuiltFigure {
  const table = readTable(spec.inputCsv);
  const figure = buildFigure(spec.figureKind, table, spec);
  writeFileSync(spec.outputImage, toSvg(figure));
  return figure;
}
