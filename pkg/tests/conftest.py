import numpy as np


def assert_frequencies(counts, probs, n_total, sigma=5.0):
    """Check observed counts against expected probabilities within sigma bands."""
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    expected = n_total * probs
    tol = sigma * np.sqrt(np.maximum(n_total * probs * (1.0 - probs), 1.0))
    bad = np.abs(counts - expected) > tol
    assert not bad.any(), (
        f"frequencies outside {sigma} sigma at outcomes {np.nonzero(bad)[0]}: "
        f"observed {counts[bad]}, expected {expected[bad]} +- {tol[bad]}"
    )
