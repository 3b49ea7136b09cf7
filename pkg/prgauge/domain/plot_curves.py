import os
from typing import List
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from prgauge.errors import ConfigError  # noqa: E402
from prgauge.logging_utils import get_logger  # noqa: E402
from prgauge.prcurve import PrCurve  # noqa: E402
from prgauge.prcurve import pcd  # noqa: E402
from prgauge.repository.curve_repository import load_curve  # noqa: E402
from prgauge.scores import gi_score  # noqa: E402

logger = get_logger()

# Fixed styling keeps the SVG output diffable.
_RC = {
    "svg.hashsalt": "prgauge",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.family": "DejaVu Sans",
    "font.size": 9,
}
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _label(curve: PrCurve, path: str) -> str:
    name = curve.model_id or os.path.splitext(os.path.basename(path))[0]
    return f"{name} (Gi={gi_score(curve):.3f})"


def render(curves: Sequence[PrCurve], labels: Sequence[str], output: str) -> None:
    """Two panels: PR curves on the left, PCD curves with the idealized 45 degree line on the right.

    The area between each PCD and the idealized line is a filled region with gid `gi-area-<i>`;
    the area under the idealized line is `ideal-area-<i>`.
    """
    with plt.rc_context(_RC):
        fig, (pr_ax, pcd_ax) = plt.subplots(1, 2, figsize=(9, 3.8))
        pcd_ax.plot([0.0, 1.0], [0.0, 1.0], linestyle="--", color="black", linewidth=1.0, label="idealized")
        for index, (curve, label) in enumerate(zip(curves, labels)):
            color = _COLORS[index % len(_COLORS)]
            density = pcd(curve)
            pr_ax.plot(curve.norm_alphas, curve.accuracies, marker="o", markersize=3, color=color, label=label)
            pcd_ax.plot(density.norm_alphas, density.cumulative, color=color, label=label)
            ideal = pcd_ax.fill_between(density.norm_alphas, 0.0, density.norm_alphas, color="#bbbbbb", alpha=0.1, linewidth=0)
            ideal.set_gid(f"ideal-area-{index}")
            area = pcd_ax.fill_between(density.norm_alphas, density.cumulative, density.norm_alphas, color=color, alpha=0.2, linewidth=0)
            area.set_gid(f"gi-area-{index}")
        pr_ax.set_xlabel("normalized α")
        pr_ax.set_ylabel("accuracy")
        pr_ax.set_title("PR curve")
        pr_ax.set_xlim(0.0, 1.0)
        pr_ax.set_ylim(0.0, 1.02)
        pcd_ax.set_xlabel("normalized α")
        pcd_ax.set_ylabel("cumulative accuracy")
        pcd_ax.set_title("PCD curve")
        pcd_ax.set_xlim(0.0, 1.0)
        pcd_ax.set_ylim(0.0, 1.0)
        pr_ax.legend(loc="lower left", fontsize=7)
        fig.tight_layout()
        os.makedirs(os.path.dirname(output) or ".", exist_ok=True)
        fig.savefig(output, format="svg", metadata={"Date": None})
        plt.close(fig)


def execute(curve_paths: Sequence[str], output: str) -> List[PrCurve]:
    if not curve_paths:
        raise ConfigError("plot needs at least one curve file")
    curves = [load_curve(path) for path in curve_paths]
    render(curves, [_label(curve, path) for curve, path in zip(curves, curve_paths)], output)
    logger.info(f"Wrote {output}")
    return curves
