import numpy as np
import pytest

from beamsim import (
    AngularSector,
    ArrayGeometry,
    NoMismatch,
    SourceSpec,
    generate_snapshots,
)


@pytest.fixture
def geom10():
    return ArrayGeometry(10, 1.0)


@pytest.fixture
def signal_sector():
    return AngularSector(((-1.0, 11.0),), 10)


@pytest.fixture
def complement_sector():
    return AngularSector(((-90.0, -1.0), (11.0, 90.0)), 360)


def reference_batch(geom, rng, snr_db=20.0, k=30, mismatch=NoMismatch()):
    """One batch of the reference scenario: desired 5 deg, 30 dB interferers at 20/50."""
    return generate_snapshots(
        geom, SourceSpec(5.0, snr_db),
        [SourceSpec(20.0, 30.0), SourceSpec(50.0, 30.0)],
        mismatch, k, rng)


@pytest.fixture
def reference_scene(geom10):
    rng = np.random.default_rng(7)
    return reference_batch(geom10, rng)
