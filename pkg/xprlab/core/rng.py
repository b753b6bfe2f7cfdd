import numpy as np


def generator(seed: int, *counters: int) -> np.random.Generator:
    """Independent stream for ``(seed, *counters)``.

    Streams are keyed by position rather than drawn from a parent stream, so
    trial ``k`` gets the same numbers whether trials run in order, in
    parallel or alone.
    """
    sequence = np.random.SeedSequence([int(seed), *(int(c) for c in counters)])
    return np.random.Generator(np.random.Philox(sequence))
