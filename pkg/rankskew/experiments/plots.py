"""Self-contained matplotlib scripts for |skew| against T on log axes."""
from json import dumps

TEMPLATE = '''"""|ATM skew| against maturity for {title}.

Generated by rankskew {version}; run with `python plot_skew.py`.
"""
import matplotlib.pyplot as plt
import numpy as np

CURVES = {curves}
FITS = {fits}
PREDICTED = {predicted}

fig, ax = plt.subplots(figsize=(6, 4.5))
for label, (T, skew, stderr) in CURVES.items():
    T, skew, stderr = np.asarray(T), np.abs(skew), np.asarray(stderr)
    points = ax.errorbar(T, skew, yerr=stderr, fmt='o', ms=4, label=f's0 = {{label}}')
    fit = FITS.get(label)
    if fit is not None:
        grid = np.geomspace(T.min(), T.max(), 200)
        ax.plot(grid, fit['c'] * grid ** (-fit['alpha']), '-', color=points[0].get_color(),
                label=f'{{fit["c"]:.3g}} T^-{{fit["alpha"]:.3f}}')
if PREDICTED is not None:
    T_all = np.concatenate([np.asarray(v[0]) for v in CURVES.values()])
    grid = np.geomspace(T_all.min(), T_all.max(), 200)
    ax.plot(grid, PREDICTED * grid ** -0.5, 'k--', lw=1, label='leading tie term')
ax.set_xscale('log')
ax.set_yscale('log')
ax.set_xlabel('T (years)')
ax.set_ylabel('|ATM skew|')
ax.set_title({title!r})
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig('plot_skew.png', dpi=150)
plt.show()
'''


def _label(s0):
    return ', '.join(f'{x:g}' for x in s0)


def plot_script(title, curves, fits, predicted_amplitude=None, version=''):
    """Python source of a plot script with the data embedded.
    Args:
        title (str): Experiment name.
        curves (dict): s0 tuple -> SkewCurve.
        fits (dict): s0 tuple -> PowerLawFit or None.
        predicted_amplitude (float): Amplitude of the leading tie term, if any.
        version (str): Package version stamped into the docstring.
    Returns:
        source (str): Script text.
    """
    data = {_label(s0): [list(c.maturities), list(c.skews), list(c.stderrs)]
            for s0, c in curves.items()}
    fit_data = {_label(s0): None if f is None else {'c': f.c, 'alpha': f.alpha}
                for s0, f in fits.items()}
    return TEMPLATE.format(title=title, version=version,
                           curves=dumps(data, indent=4),
                           fits=dumps(fit_data, indent=4).replace('null', 'None'),
                           predicted='None' if predicted_amplitude is None
                           else repr(float(predicted_amplitude)))
