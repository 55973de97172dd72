import numpy as np


def batch_means_mcse(traces, batch_size=None):
    """Monte Carlo standard error of trace means by non-overlapping batch means.

    ``traces`` is ``(n_chains, n_samples)`` (or 1-D). The batch size
    defaults to ``floor(sqrt(n))``; trailing samples that do not fill a
    batch are dropped.
    """
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    n = traces.shape[1]
    b = int(np.floor(np.sqrt(n))) if batch_size is None else int(batch_size)
    a = n // b
    if a < 2:
        raise ValueError("need at least two batches, got n={} b={}".format(
            n, b))
    batches = traces[:, :a * b].reshape(traces.shape[0], a, b).mean(axis=2)
    overall = traces.mean(axis=1)
    var = b * np.sum((batches - overall[:, None]) ** 2, axis=1) / (a - 1)
    return np.sqrt(var / n)
