# -*- coding: utf-8 -*-
"""Plotting of residual traces.

Plots are not drawn during experiments. Instead :func:`emit_plot_script`
writes a standalone ``plot_results.py`` next to the CSVs, which draws one
semilog figure per experiment when run with matplotlib installed.
Given a list of traces ``traces``, an interactive plot is

    >>> plot_traces(traces)

"""
import glob
import logging
import os

from tvab import config


__all__ = ['emit_plot_script', 'collect_figures', 'plot_traces']

logger = logging.getLogger(__name__)

SCRIPT_NAME = 'plot_results.py'

_SCRIPT = '''\
"""Semilog plots of the residual traces under this directory."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))

FIGURES = {figures}


def read_trace(path):
    with open(os.path.join(HERE, path)) as f:
        rows = list(csv.reader(f))[1:]

    return [int(r[0]) for r in rows], [float(r[1]) for r in rows]


def main():
    for name, paths in FIGURES.items():
        fig, ax = plt.subplots()
        for path in paths:
            k, residual = read_trace(path)
            label = os.path.splitext(os.path.basename(path))[0]
            ax.semilogy(k, residual, label=label)

        ax.set_title(name)
        ax.set_xlabel('iteration k')
        ax.set_ylabel('residual')
        ax.legend(fontsize='small')
        fig.savefig(os.path.join(HERE, name + '.png'), dpi=150)
        plt.close(fig)


if __name__ == '__main__':
    main()
'''


def collect_figures(output_dir):
    """Per-run CSVs of each experiment subdirectory, relative to output_dir.

    Returns:
        dict: experiment name -> sorted list of relative CSV paths.

    """
    figures = {}
    if not os.path.isdir(output_dir):
        return figures

    for name in sorted(os.listdir(output_dir)):
        sub = os.path.join(output_dir, name)
        if not os.path.isdir(sub):
            continue

        paths = sorted(p for p in glob.glob(os.path.join(sub, '*.csv'))
                       if os.path.basename(p) != 'summary.csv')
        if paths:
            figures[name] = [os.path.relpath(p, output_dir).replace(
                os.sep, '/') for p in paths]

    return figures


def emit_plot_script(output_dir):
    """Write ``plot_results.py`` into output_dir.

    Returns:
        str: path of the script.

    """
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, SCRIPT_NAME)
    with open(path, 'w') as f:
        f.write(_SCRIPT.format(figures=repr(collect_figures(output_dir))))

    logger.debug('wrote %s', path)
    return path


def plot_traces(traces, title=None, path=None):
    """Semilog plot of residual traces.

    Args:
        traces (list of RunTrace): traces to draw.
        title (str or None): figure title.
        path (str or None): save to path instead of showing.

    """
    if not config.matplotlib_enabled:
        raise ImportError('plot_traces requires matplotlib')

    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    for trace in traces:
        ax.semilogy(trace.residuals, label='{} eta={:g}'.format(
            trace.method, trace.eta))

    if title is not None:
        ax.set_title(title)

    ax.set_xlabel('iteration k')
    ax.set_ylabel('residual')
    ax.legend(fontsize='small')
    if path is None:
        plt.show()
    else:
        fig.savefig(path)

    plt.close(fig)
    return fig
