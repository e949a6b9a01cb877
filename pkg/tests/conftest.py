import numpy as np
import pytest

from cardiagent.backends.phantom import PhantomSpec, phantom_generate
from cardiagent.volume_io import LABEL_SCHEMAS, LabelMask, SequenceKind


@pytest.fixture(scope="session")
def phantom_plain():
    return phantom_generate(PhantomSpec(seed=3))


@pytest.fixture(scope="session")
def phantom_lge():
    return phantom_generate(PhantomSpec(seed=3, lge_segment=8))


def random_mask(rng, shape, spacing, kind=SequenceKind.SAX_CINE, p=0.35):
    labels = (rng.random(shape) < p).astype(np.int16)
    return LabelMask(labels=labels, spacing=spacing,
                     schema=LABEL_SCHEMAS[kind], kind=kind)


def annulus_mask(n_slices=3, size=129, spacing=(8.0, 1.0, 1.0),
                 inner=18.0, thickness_of_angle=None, base_thickness=8.0,
                 rv_arc=None):
    """Cylindrical annulus with per-angle wall thickness (analytic oracle).

    ``thickness_of_angle`` maps an angle in radians (0 = +col, CCW
    positive) to the local wall thickness in mm.  ``rv_arc`` optionally
    paints an RV band (label 3) hugging the epicardium over (lo, hi)
    degrees, for insertion detection.
    """
    c = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = rows - c, cols - c
    r = np.hypot(dy * spacing[1], dx * spacing[2])
    theta = np.mod(np.arctan2(-dy, dx), 2 * np.pi)
    if thickness_of_angle is None:
        outer = inner + base_thickness
        wall = (r >= inner) & (r < outer)
    else:
        outer = inner + thickness_of_angle(theta)
        wall = (r >= inner) & (r < outer)
    plane = np.zeros((size, size), dtype=np.int16)
    plane[r < inner] = 1
    plane[wall] = 2
    if rv_arc is not None:
        lo, hi = np.deg2rad(rv_arc[0]), np.deg2rad(rv_arc[1])
        outer_max = np.max(outer) if np.ndim(outer) else outer
        band = (r >= outer_max) & (r < outer_max + 6.0) & (theta >= lo) & (theta < hi)
        plane[band & (plane == 0)] = 3
    labels = np.repeat(plane[np.newaxis], n_slices, axis=0)
    return LabelMask(labels=labels, spacing=spacing,
                     schema=LABEL_SCHEMAS[SequenceKind.SAX_CINE],
                     kind=SequenceKind.SAX_CINE)
