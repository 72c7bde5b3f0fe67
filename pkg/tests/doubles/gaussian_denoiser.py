"""Replies with I* Gaussian-smoothed per channel; sigma is argv[1]."""

import sys

import numpy as np
from scipy.ndimage import gaussian_filter

from flowdeblur.wire import serve


def smooth(level, istar, observed):
    sigma = float(sys.argv[1])
    return np.stack([gaussian_filter(p.astype(np.float64), sigma, mode="reflect") for p in istar])


if __name__ == "__main__":
    serve(smooth)
