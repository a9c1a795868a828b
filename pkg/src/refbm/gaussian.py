"""Standard normal CDF and tail, with a log-space tail for deep arguments.

The ruin and field-sup approximations multiply large polynomial factors by
tiny Gaussian tails; naive 1 - Phi(x) evaluation would underflow, so the
tail goes through erfc / log_ndtr.
"""

import numpy as np
from scipy import special


def normal_cdf(x):
    """Phi(x), erf-based."""
    return special.ndtr(x)


def normal_tail(x):
    """Psi(x) = 1 - Phi(x), accurate far into the tail."""
    return special.ndtr(-np.asarray(x, dtype=float))


def log_normal_tail(x):
    """log Psi(x); safe for x where Psi underflows."""
    return special.log_ndtr(-np.asarray(x, dtype=float))
