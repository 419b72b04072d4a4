"""Utility classes and methods.

Logging, run directories, devices and the versioned CSV tables every
experiment writes.
"""
import logging
import os

import pandas as pd
import torch
import tqdm

from rankskew import __version__

OUT_ENV_VAR = 'RANKSKEW_OUT'


class AverageMeter:
    """Keep track of a running mean and variance over chunks of samples.

    Chunks are folded in the order they arrive, so a fixed chunk order gives
    bit-identical results.
    """
    def __init__(self):
        self.avg = 0.
        self.sum = 0.
        self.sum_sq = 0.
        self.count = 0

    def reset(self):
        """Reset meter."""
        self.__init__()

    def update(self, val, num_samples=1, sum_sq=None):
        """Update meter with new value `val`, the average of `num_samples` samples.
        Args:
            val (float): Average value to update the meter with.
            num_samples (int): Number of samples that were averaged to
                produce `val`.
            sum_sq (float): Sum of squares of the same samples, needed for `std`.
        """
        self.count += num_samples
        self.sum += val * num_samples
        self.sum_sq += sum_sq if sum_sq is not None else val * val * num_samples
        self.avg = self.sum / self.count

    @property
    def std(self):
        if self.count < 2:
            return 0.
        var = (self.sum_sq - self.count * self.avg ** 2) / (self.count - 1)
        return max(var, 0.) ** 0.5


def default_out_dir():
    """Base output directory: `$RANKSKEW_OUT` or `./save/`."""
    return os.environ.get(OUT_ENV_VAR, './save/')


def get_save_dir(base_dir, name, id_max=100):
    """Get a unique save directory by appending the smallest positive integer
    `id < id_max` that is not already taken (i.e., no dir exists with that id).
    Args:
        base_dir (str): Base directory in which to make save directories.
        name (str): Name to identify this experiment run. Need not be unique.
        id_max (int): Maximum ID number before raising an exception.
    Returns:
        save_dir (str): Path to a new directory with a unique name.
    """
    for uid in range(1, id_max):
        save_dir = os.path.join(base_dir, 'runs', f'{name}-{uid:02d}')
        if not os.path.exists(save_dir):
            os.makedirs(save_dir)
            return save_dir

    raise RuntimeError('Too many save directories created with the same name. '
                       'Delete old save directories or use another name.')


def get_logger(log_dir, name):
    """Get a `logging.Logger` instance that prints to the console
    and an auxiliary file.

    Handlers are attached to the package logger, so every `rankskew.*`
    module logs through them.
    Args:
        log_dir (str): Directory in which to create the log file.
        name (str): Name to identify the logs.
    Returns:
        logger (logging.Logger): Logger instance for logging events.
    """
    class StreamHandlerWithTQDM(logging.Handler):
        """Let `logging` print without breaking `tqdm` progress bars.
        See Also:
            > https://stackoverflow.com/questions/38543506
        """
        def emit(self, record):
            try:
                msg = self.format(record)
                tqdm.tqdm.write(msg)
                self.flush()
            except (KeyboardInterrupt, SystemExit):
                raise
            except Exception:
                self.handleError(record)

    logger = logging.getLogger('rankskew')
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    # DEBUG and above to the run's log file
    file_handler = logging.FileHandler(os.path.join(log_dir, 'log.txt'))
    file_handler.setLevel(logging.DEBUG)

    # INFO and above to the console
    console_handler = StreamHandlerWithTQDM()
    console_handler.setLevel(logging.INFO)

    formatter = logging.Formatter('[%(asctime)s] %(message)s',
                                  datefmt='%m.%d.%y %H:%M:%S')
    file_handler.setFormatter(formatter)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    logger.debug(f'Logger for run "{name}" writing to {log_dir}')

    return logger


def get_available_device(use_gpu=False):
    """Get the device the simulation tensors live on.
    Args:
        use_gpu (bool): Ask for CUDA; falls back to CPU when unavailable.
    Returns:
        device (str): 'cuda:0' or 'cpu'.
    """
    if use_gpu and torch.cuda.is_available():
        return 'cuda:0'
    return 'cpu'


def save_table(df, path, schema):
    """Save a data frame as CSV under a one-line versioned header.
    Args:
        df (pd.DataFrame): Table to save.
        path (str): Destination file.
        schema (str): Schema name, e.g. 'skew_curve'.
    Returns:
        path (str): Where the table was written.
    """
    with open(path, 'w', newline='') as fh:
        fh.write(f'# rankskew {schema} v1 ({__version__})\n')
        df.to_csv(fh, index=False, float_format='%.12g', lineterminator='\n')
    return path


def load_table(path, schema):
    """Load a table written by `save_table`, checking the schema name."""
    with open(path, 'r') as fh:
        header = fh.readline().strip()
    expected = f'# rankskew {schema} v1'
    if not header.startswith(expected):
        raise ValueError(f'{path}: expected header "{expected}", found "{header}"')
    return pd.read_csv(path, comment='#')
