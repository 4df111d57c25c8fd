"""Chart-based differential geometry for multi-fiber bundles and Kaluza-Klein spacetimes."""

import jax

# every tolerance in the toolkit assumes double precision
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"

from .charts import (  # noqa: E402
    Chart,
    ChartManifold,
    FieldValue,
    ManifoldPoint,
    MetricField,
    Signature,
    TensorFieldSpec,
    TransitionMap,
    evaluate,
    signature_at,
    transition,
)
from .tensor import (  # noqa: E402
    CurvatureBundle,
    covariant_accel,
    curvature,
    divergence2,
    exterior_d_1form,
    lie_metric,
    musical,
)

__all__ = [
    "Chart",
    "ChartManifold",
    "CurvatureBundle",
    "FieldValue",
    "ManifoldPoint",
    "MetricField",
    "Signature",
    "TensorFieldSpec",
    "TransitionMap",
    "covariant_accel",
    "curvature",
    "divergence2",
    "evaluate",
    "exterior_d_1form",
    "lie_metric",
    "musical",
    "signature_at",
    "transition",
]
