"""Physics on S^1-fibered spacetimes: potential, fluids, trajectories, fiber spectra."""

from .dynamics import (
    Trajectory,
    base_fields,
    calibrate_lorentz_sign,
    compare_geodesic_lorentz,
    geodesic_integrate,
    larmor_closed_form,
    lorentz_integrate,
)
from .fiberspec import FramePullback, SpectralData, fiber_spectrum, frame_pullback
from .fluid import (
    FluidDecomposition,
    FluidFields,
    charged_dust_residuals,
    decompose,
    fluid_law_residuals,
    reconstruct,
    theorem1_residuals,
    theorem2_residuals,
)
from .potential import AveragedMetric, Potential, average_metric, build_potential, fiber_length
