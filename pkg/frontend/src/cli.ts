#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { SchemaMismatch } from './csv';
import { FIGURE_KINDS, FigureKind } from './figures';
import { render } from './render';

export function runPlot(argv: string[]): number {
  const args = yargs(argv)
    .command('plot <figure_kind>', 'render one figure from a lab CSV', (cmd) =>
      cmd.positional('figure_kind', {
        describe: `one of ${FIGURE_KINDS.join(', ')}`,
        type: 'string',
        demandOption: true,
      }))
    .option('in', { type: 'string', demandOption: true, describe: 'input CSV path' })
    .option('out', { type: 'string', demandOption: true, describe: 'output SVG path' })
    .option('dof', { type: 'number', describe: 'chi-squared reference dof (z-hist)' })
    .option('levels', {
      type: 'string',
      describe: 'comma-separated nominal levels to keep (coverage)',
    })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parseSync();

  const kind = args.figure_kind as string;
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    console.error(`unknown figure kind ${kind}; expected one of ${FIGURE_KINDS.join(', ')}`);
    return 2;
  }
  const levels = args.levels
    ? String(args.levels).split(',').map((s) => Number(s.trim()))
    : undefined;
  try {
    render({
      inputCsv: args.in,
      figureKind: kind as FigureKind,
      outputImage: args.out,
      dof: args.dof,
      levels,
    });
  } catch (error) {
    if (error instanceof SchemaMismatch) {
      console.error(error.message);
      return 3;
    }
    throw error;
  }
  console.log(`[bayescg-lab-plot] ${kind}: ${args.in} -> ${args.out}`);
  return 0;
}

/* istanbul ignore next */
if (require.main === module) {
  try {
    process.exitCode = runPlot(hideBin(process.argv));
  } catch (error) {
    console.error(error instanceof Error ? error.message : String(error));
    process.exitCode = 1;
  }
}
