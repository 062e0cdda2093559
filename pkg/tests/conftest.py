import pytest

from dash_teleop.hand_model import FingerId, load_hand_versions

# Independent transcription of the five published weight columns, used to
# cross-check the bundled data file. Order: w1..w6 then b1..b4.
REFERENCE_WEIGHT_TABLE = {
    "v1": (-1.05, 0.01, 0.10, 0.83, 0.67, 0.99, 0.47, -0.07, 0.03, -0.01),
    "v2": (-0.43, 0.20, 0.51, 0.54, 0.60, 0.76, 0.38, 0.01, -0.04, -0.16),
    "v3": (-0.43, 0.20, 0.51, 0.54, 0.60, 0.76, 0.38, 0.01, -0.04, -0.16),
    "v4": (-0.59, -0.12, 0.26, 0.38, 0.62, 1.69, 0.45, 0.44, -0.05, -0.30),
    "v5": (-0.59, -0.19, -0.32, 0.72, 0.63, 0.65, 0.58, -0.03, -0.09, -0.07),
}


@pytest.fixture(scope="session")
def versions():
    return load_hand_versions()


@pytest.fixture(scope="session")
def v1_weights(versions):
    return versions["v1"].weights[FingerId.THUMB]


@pytest.fixture(scope="session")
def weights_by_version(versions):
    return {name: versions[name].weights[FingerId.THUMB] for name in REFERENCE_WEIGHT_TABLE}
