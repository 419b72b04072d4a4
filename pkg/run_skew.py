"""Run ranked-index ATM skew experiments.

    python run_skew.py list-presets
    python run_skew.py run --experiment gbm-tie --paths 100
    python run_skew.py skew --experiment fss-rough-distinct --T 0.01
    python run_skew.py fit save/runs/run-gbm-tie-01/skew_curve.csv

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import os
import sys
from dataclasses import replace
from json import dumps

import ujson
from tensorboardX import SummaryWriter

import rankskew.util as util
from rankskew import __version__
from rankskew.args_skew import get_skew_args
from rankskew.asymptotics.expansion import expansion_coefficients, predicted_tie_skew
from rankskew.asymptotics.rates import infer_m_flags, predicted_rate
from rankskew.exceptions import ConfigError, InsufficientPointsError, NumericalError
from rankskew.experiments.config import apply_overrides, config_to_dict, load_config
from rankskew.experiments.plots import plot_script
from rankskew.experiments.presets import get_preset, list_presets
from rankskew.model.dynamics import dump_paths_csv, euler_simulate, martingale_check, \
    simulate_driver
from rankskew.model.index import futures_price
from rankskew.modules.volterra import dump_driver_csv
from rankskew.pricing.black_scholes import implied_vol
from rankskew.pricing.monte_carlo import atm_skew, mc_call_price
from rankskew.termstructure.curves import SweepConfig, classify_quasi_blow_up, \
    empirical_kind, fit_power_law, load_curve_csv, rate_agreement, save_curve_csv, skew_curve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def resolve_config(args):
    """Config file or preset, then the one-for-one flag overrides."""
    if args.config and args.experiment:
        raise ConfigError('give either --config or --experiment, not both', field='experiment')
    if args.config:
        cfg = load_config(args.config)
    elif args.experiment:
        try:
            cfg = get_preset(args.experiment)
        except KeyError as e:
            raise ConfigError(e.args[0], field='experiment') from None
    else:
        raise ConfigError('no experiment given; use --config or --experiment', field='experiment')
    return apply_overrides(cfg, paths=args.paths, seed=args.seed, dt=args.dt, out=args.out)


def _label(s0):
    return '-'.join(f'{x:g}' for x in s0)


def _prediction(cfg, spec):
    v0 = cfg.model.v0()
    flags = infer_m_flags(cfg.model, spec)
    prediction = predicted_rate(cfg.model.hurst(), spec.s0, flags)
    amplitude = None
    if spec.tie_position() is not None:
        amplitude = predicted_tie_skew(spec, v0).amplitude
    return prediction, amplitude, expansion_coefficients(spec, v0).sqrt_t_slope


def _summarize(spec, curve, fit, prediction, amplitude, slope):
    agreement = rate_agreement(prediction, curve, fit)
    return {
        's0': list(spec.s0),
        'c': None if fit is None else fit.c,
        'alpha': None if fit is None else fit.alpha,
        'alpha_stderr': None if fit is None else fit.alpha_stderr,
        'r2': None if fit is None else fit.r2,
        'T_range': None if fit is None else list(fit.T_range),
        'n_points': 0 if fit is None else fit.n_points,
        'low_confidence': True if fit is None else fit.low_confidence,
        'classification': empirical_kind(curve, fit),
        'predicted_rate': {'kind': prediction.kind, 'H': prediction.H,
                           'exponent': prediction.exponent, 'rationale': prediction.rationale},
        'predicted_amplitude': amplitude,
        'futures_sqrt_t_slope': slope,
        'rate_agreement': agreement.agrees,
        'missing': list(curve.missing),
    }


def _try_fit(curve, log, label):
    try:
        return fit_power_law(curve)
    except InsufficientPointsError as e:
        log.warning(f'{label}: {e}; fit marked low-confidence')
        return None


def _log_curve(curve, tbx, label):
    for i, p in enumerate(curve.points):
        tbx.add_scalar(f'{label}/abs_skew', abs(p.skew), i)
        tbx.add_scalar(f'{label}/stderr', p.stderr, i)


def run_experiment(cfg, sweep, save_dir, log, tbx, progress=False):
    """Skew curves, fits, classification and plot script for one experiment.
    Returns:
        summary (dict): Contents written to fit.json.
    """
    curves, fits, results = {}, {}, []
    quasi = None
    amplitude_for_plot = None

    if cfg.is_family:
        log.info(f'Family of {len(cfg.s0_family)} initial price vectors...')
        report = classify_quasi_blow_up(cfg.model, cfg.index, cfg.s0_family, cfg.maturities,
                                        sweep, cfg.method, cfg.dk, progress)
        members = [(m.s0, m.curve, m.fit) for m in report.members]
        quasi = {'T_star': report.T_star, 'tied_s0': list(report.tied.s0),
                 'clause_i': report.clause_i, 'clause_ii': report.clause_ii,
                 'clause_iii': report.clause_iii, 'holds': report.holds}
    else:
        log.info(f'Skew curve over {len(cfg.maturities)} maturities...')
        curve = skew_curve(cfg.model, cfg.index, cfg.maturities, sweep, cfg.method, cfg.dk,
                           progress)
        members = [(cfg.index.s0, curve, _try_fit(curve, log, _label(cfg.index.s0)))]

    for s0, curve, fit in members:
        label = _label(s0)
        spec = replace(cfg.index, s0=tuple(s0))
        name = 'skew_curve.csv' if not cfg.is_family else f'skew_curve_{label}.csv'
        save_curve_csv(curve, os.path.join(save_dir, name))
        _log_curve(curve, tbx, label)

        prediction, amplitude, slope = _prediction(cfg, spec)
        if amplitude is not None:
            amplitude_for_plot = amplitude
        summary = _summarize(spec, curve, fit, prediction, amplitude, slope)
        results.append(summary)
        curves[s0], fits[s0] = curve, fit
        if fit is not None:
            log.info(f's0=({label}): |skew| ~ {fit.c:.4f} T^-{fit.alpha:.4f} '
                     f'(r2={fit.r2:.3f}, {fit.n_points} points)')
        log.info(f's0=({label}): {summary["classification"]}, predicted {prediction.kind}, '
                 f'agreement {summary["rate_agreement"]}')

    with open(os.path.join(save_dir, 'plot_skew.py'), 'w') as fh:
        fh.write(plot_script(cfg.name, curves, fits, amplitude_for_plot, __version__))

    out = {
        'version': __version__,
        'experiment': cfg.name,
        'config': config_to_dict(cfg),
        'results': results,
        'quasi_blow_up': quasi,
    }
    with open(os.path.join(save_dir, 'fit.json'), 'w') as fh:
        fh.write(ujson.dumps(out, indent=4, sort_keys=True))
    tbx.add_text('fit', dumps(results, indent=2))
    return out


def refit(path, t_min=None, t_max=None):
    """Offline power-law fit of a saved curve."""
    curve = load_curve_csv(path)
    T_range = None
    if t_min is not None or t_max is not None:
        T_range = (t_min if t_min is not None else 0., t_max if t_max is not None else float('inf'))
    fit = fit_power_law(curve, T_range)
    return {'c': fit.c, 'alpha': fit.alpha, 'alpha_stderr': fit.alpha_stderr, 'r2': fit.r2,
            'T_range': list(fit.T_range), 'n_points': fit.n_points,
            'classification': empirical_kind(curve, fit)}


def main(args):
    if args.command == 'list-presets':
        print(list_presets())
        return EXIT_OK

    if args.command == 'fit':
        try:
            print(dumps(refit(args.csv, args.t_min, args.t_max), indent=4, sort_keys=True))
        except (OSError, ValueError) as e:
            print(f'Cannot read {args.csv}: {e}', file=sys.stderr)
            return EXIT_CONFIG
        except NumericalError as e:
            print(f'Fit failed: {e}', file=sys.stderr)
            return EXIT_NUMERICAL
        return EXIT_OK

    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f'Config error: {e}', file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f'Cannot read config: {e}', file=sys.stderr)
        return EXIT_CONFIG

    # Set up logging and devices
    args.save_dir = util.get_save_dir(cfg.output_dir or util.default_out_dir(),
                                      f'{args.command}-{cfg.name}')
    log = util.get_logger(args.save_dir, cfg.name)
    device = util.get_available_device(args.use_gpu)
    log.info(f'Args: {dumps(vars(args), indent=4, sort_keys=True)}')
    log.info(f'Config: {dumps(config_to_dict(cfg), indent=4, sort_keys=True)}')
    log.info(f'Device {device}, master seed {cfg.seed}, {cfg.n_paths} paths')
    sweep = SweepConfig(cfg.n_paths, cfg.dt, cfg.seed, device, args.threads)

    try:
        if args.command == 'run':
            tbx = SummaryWriter(args.save_dir)
            try:
                run_experiment(cfg, sweep, args.save_dir, log, tbx, args.progress)
            finally:
                tbx.close()
        elif args.command == 'skew':
            method = args.method or cfg.method
            est = atm_skew(cfg.model, cfg.index, args.T, sweep.for_maturity(args.T, 0), method,
                           args.dk if args.dk is not None else cfg.dk)
            log.info(f'ATM skew at T={args.T}: {est.skew:.6f} +- {est.stderr:.6f} '
                     f'({method}, sigma_atm={est.sigma_atm:.6f}, F={est.futures:.4f})')
        elif args.command == 'futures':
            est = futures_price(cfg.model, cfg.index, args.T, sweep.for_maturity(args.T, 0))
            log.info(f'F_0,T at T={args.T}: {est.value:.6f} +- {est.stderr:.6f} '
                     f'(I_0 = {cfg.index.initial_value():.6f})')
        elif args.command == 'price':
            sim = sweep.for_maturity(args.T, 0)
            F = futures_price(cfg.model, cfg.index, args.T, sim).value
            est = mc_call_price(cfg.model, cfg.index, args.T, args.k, F, sim)
            sigma = implied_vol(est.value, args.T, F, args.k)
            log.info(f'Call at T={args.T}, k={args.k}: {est.value:.6f} +- {est.stderr:.6f}, '
                     f'implied vol {sigma:.6f}')
        elif args.command == 'dump':
            dump(cfg, args, sweep, log)
    except ConfigError as e:
        log.error(f'Config error: {e}')
        return EXIT_CONFIG
    except ValueError as e:
        log.error(f'Invalid argument: {e}')
        return EXIT_CONFIG
    except NumericalError as e:
        log.error(f'Numerical failure: {e}')
        return EXIT_NUMERICAL

    log.info(f'Outputs in {args.save_dir}')
    return EXIT_OK


def dump(cfg, args, sweep, log):
    """Driver or price paths of a single maturity to CSV."""
    sim = sweep.for_maturity(args.T, 0)
    if args.what == 'paths':
        sim = replace(sim, store_full_paths=True)
        batch = euler_simulate(cfg.model, cfg.index.s0, sim, progress=args.progress)
        for row in martingale_check(batch, cfg.index.s0):
            log.info(f'Asset {row["asset"]}: mean S_T {row["mean"]:.4f} '
                     f'(z = {row["z"]:.2f}, {row["status"]})')
        path = dump_paths_csv(batch, os.path.join(args.save_dir, 'paths.csv'))
    else:
        if not 0 <= args.asset < cfg.model.n:
            raise ConfigError(f'asset must lie in [0, {cfg.model.n})', field='asset')
        driver = simulate_driver(cfg.model, args.asset, sim)
        path = dump_driver_csv(driver, sim.grid, os.path.join(args.save_dir, 'driver.csv'))
    log.info(f'Wrote {path}')


if __name__ == '__main__':
    sys.exit(main(get_skew_args()))
