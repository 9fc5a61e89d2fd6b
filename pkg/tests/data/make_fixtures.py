"""Regenerate the fit fixtures: python3 tests/data/make_fixtures.py"""

from pathlib import Path

import numpy as np

from trimmedpd.fit import simulate_ranked
from trimmedpd.streams import stream

HERE = Path(__file__).parent
OUTLIER_SEED = 42
OUTLIER_N = 10_000


def outlier_weights() -> np.ndarray:
    """PD(0.5) weights with the two largest multiplied by 10."""
    return simulate_ranked(0.5, OUTLIER_N, stream(OUTLIER_SEED, "outlier-fixture"), outliers=2).weights


def power_law_weights(n: int = 1000) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float) ** -2.0


def write(path: Path, values) -> None:
    path.write_text("weight\n" + "".join(f"{v:.17g}\n" for v in values))


if __name__ == "__main__":
    write(HERE / "outliers_seed42.csv", outlier_weights())
    write(HERE / "power_law.csv", power_law_weights())
