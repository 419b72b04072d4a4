"""Command-line arguments for run_skew.py."""

import argparse

SUBCOMMANDS = ('run', 'list-presets', 'skew', 'price', 'futures', 'fit', 'dump')


def positive_float(text):
    value = float(text)
    if not 0. < value < float('inf'):
        raise argparse.ArgumentTypeError(f'must be positive and finite, got {text}')
    return value


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f'must be >= 1, got {text}')
    return value


def get_skew_args(argv=None):
    """Get arguments needed in run_skew.py."""
    parser = argparse.ArgumentParser('Ranked-index ATM skew experiments')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    run = sub.add_parser('run', help='Skew term structure, fit and plot script.')
    add_common_args(run)

    sub.add_parser('list-presets', help='Print the built-in experiments.')

    skew = sub.add_parser('skew', help='ATM skew at a single maturity.')
    add_common_args(skew)
    add_maturity_arg(skew)
    skew.add_argument('--method',
                      type=str,
                      default=None,
                      choices=('finite_difference', 'digital'),
                      help='Skew estimator; defaults to the config.')
    skew.add_argument('--dk',
                      type=positive_float,
                      default=None,
                      help='Log-strike bump for finite differences.')

    price = sub.add_parser('price', help='Price one call on the index.')
    add_common_args(price)
    add_maturity_arg(price)
    price.add_argument('--k',
                       type=float,
                       default=0.,
                       help='Log-strike relative to the futures price.')

    futures = sub.add_parser('futures', help='Index futures price F_{0,T}.')
    add_common_args(futures)
    add_maturity_arg(futures)

    fit = sub.add_parser('fit', help='Refit a power law to a saved skew_curve.csv.')
    fit.add_argument('csv',
                     type=str,
                     help='Path to a skew_curve.csv written by run.')
    fit.add_argument('--t_min',
                     type=float,
                     default=None,
                     help='Smallest maturity used in the fit.')
    fit.add_argument('--t_max',
                     type=float,
                     default=None,
                     help='Largest maturity used in the fit.')

    dump = sub.add_parser('dump', help='Write driver or price paths to CSV.')
    add_common_args(dump)
    add_maturity_arg(dump)
    dump.add_argument('--what',
                      type=str,
                      default='paths',
                      choices=('paths', 'driver'),
                      help='Price paths of every asset, or the driver of one asset.')
    dump.add_argument('--asset',
                      type=int,
                      default=0,
                      help='Asset whose driver is dumped.')

    return parser.parse_args(argv)


def add_maturity_arg(parser):
    parser.add_argument('--T',
                        type=positive_float,
                        required=True,
                        help='Maturity in years.')


def add_common_args(parser):
    """Add arguments shared by the subcommands that simulate."""
    parser.add_argument('--config',
                        type=str,
                        default=None,
                        help='JSON experiment config.')
    parser.add_argument('--experiment',
                        type=str,
                        default=None,
                        help='Preset name; see list-presets.')
    parser.add_argument('--paths',
                        type=positive_int,
                        default=None,
                        help='Monte Carlo paths per maturity.')
    parser.add_argument('--seed',
                        type=int,
                        default=None,
                        help='Master seed.')
    parser.add_argument('--dt',
                        type=positive_float,
                        default=None,
                        help='Euler step in years.')
    parser.add_argument('--out',
                        type=str,
                        default=None,
                        help='Base directory for outputs (default: $RANKSKEW_OUT or ./save/).')
    parser.add_argument('--threads',
                        type=positive_int,
                        default=1,
                        help='Worker threads; results do not depend on it.')
    parser.add_argument('--use_gpu',
                        action='store_true',
                        help='Simulate on CUDA when available.')
    parser.add_argument('--progress',
                        action='store_true',
                        help='Show progress bars.')
