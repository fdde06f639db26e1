import numpy as np
import pytest

from orthodict.data import PatchConfig, extract_patches, synthetic_test_image, write_pgm

DESK_M = 8192
DESK_PATCH_SEED = 11


@pytest.fixture(scope="session")
def scene_image(tmp_path_factory):
    """The standard 512x512 benchmark scene, written once as a PGM file."""
    path = tmp_path_factory.mktemp("scene") / "scene.pgm"
    write_pgm(path, synthetic_test_image(512, 512, seed=0))
    return path


@pytest.fixture(scope="session")
def desk_signals(scene_image):
    """Desk-scale patch matrix (p=64, m=8192) drawn from the scene."""
    from orthodict.data import load_image

    grid = load_image(scene_image)
    return extract_patches(
        grid, PatchConfig(patch_edge=8, count=DESK_M, seed=DESK_PATCH_SEED)
    )
