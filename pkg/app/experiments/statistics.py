import numpy as np


class SeriesAccumulator:
    """
    Running sums of per-grid-point series over trajectories.

    Trajectories are added in index order and accumulators of consecutive
    index ranges are merged in that order, so a fixed chunking gives the same
    sums however the chunks were spread over workers.
    """

    def __init__(self):
        self.count = 0
        self.sums: dict[str, np.ndarray] = {}
        self.squares: dict[str, np.ndarray] = {}
        self.state_sum = None

    def add(self, series: dict, states: np.ndarray = None):
        for name, values in series.items():
            values = np.asarray(values, dtype=float)
            if name in self.sums:
                self.sums[name] = self.sums[name] + values
                self.squares[name] = self.squares[name] + values ** 2
            else:
                self.sums[name] = values.copy()
                self.squares[name] = values ** 2
        if states is not None:
            self.state_sum = states.copy() if self.state_sum is None else self.state_sum + states
        self.count += 1

    def merge(self, other: "SeriesAccumulator"):
        if other.count == 0:
            return
        for name in other.sums:
            if name in self.sums:
                self.sums[name] = self.sums[name] + other.sums[name]
                self.squares[name] = self.squares[name] + other.squares[name]
            else:
                self.sums[name] = other.sums[name].copy()
                self.squares[name] = other.squares[name].copy()
        if other.state_sum is not None:
            self.state_sum = other.state_sum.copy() if self.state_sum is None else self.state_sum + other.state_sum
        self.count += other.count


def compute_series_stats(acc: SeriesAccumulator) -> dict:
    """
    Sample mean and standard error per series.

    Args:
        acc: filled accumulator

    Returns:
        dict with keys: mean, stderr (each a dict of arrays), trajectories
    """
    m = acc.count
    means, stderr = {}, {}
    for name, total in acc.sums.items():
        mean = total / m
        means[name] = mean
        if m > 1:
            variance = np.clip(acc.squares[name] - m * mean ** 2, 0.0, None) / (m - 1)
            stderr[name] = np.sqrt(variance / m)
        else:
            stderr[name] = np.zeros_like(mean)
    return {"mean": means, "stderr": stderr, "trajectories": m}
