import numpy as np
import pytest

from satx import Direction, PointCloud, SpeakerLayout


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_direction(rng, el_range=(-89.0, 89.0)) -> Direction:
    return Direction(
        float(rng.uniform(-180.0, 180.0)),
        float(rng.uniform(*el_range)),
    )


def mirrored_cloud(rng, n_duos: int = 2, n_median: int = 1) -> PointCloud:
    """Cloud where every direction has a left-right mirror partner."""
    dirs = []
    for _ in range(n_duos):
        az = float(rng.uniform(10.0, 170.0))
        el = float(rng.uniform(-80.0, 80.0))
        dirs += [Direction(az, el), Direction(-az, el)]
    for _ in range(n_median):
        dirs.append(Direction(0.0, float(rng.uniform(-80.0, 80.0))))
    weights = rng.uniform(0.5, 2.0, len(dirs))
    return PointCloud(tuple(dirs), weights)


def paired_layout(rng) -> SpeakerLayout:
    """Three speakers: one mirrored pair plus one on the median plane."""
    az = float(rng.uniform(15.0, 165.0))
    el = float(rng.uniform(-60.0, 60.0))
    return SpeakerLayout(
        (
            ("a", Direction(az, el)),
            ("b", Direction(-az, el)),
            ("c", Direction(0.0, float(rng.uniform(-60.0, 60.0)))),
        ),
        symmetry_pairs=((0, 1),),
    )
