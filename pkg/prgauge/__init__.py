from .entities import PerturbationSpec
from .entities import RunConfig
from .network import Network
from .prcurve import PrCurve
from .prcurve import build_pr_curve
from .scores import gi_score
from .scores import pal_score

__all__ = [
    "Network",
    "PerturbationSpec",
    "PrCurve",
    "RunConfig",
    "build_pr_curve",
    "gi_score",
    "pal_score",
]
