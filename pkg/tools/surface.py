"""
Surface Tool

This tool evaluates a two-input checkpoint on a grid and writes the
decision surface (aggregate, deterministic network and per-representation
votes) as CSV for external plotting.
"""

from typing import Any, Dict, Optional

from pbgnet.errors import ConfigError
from pbgnet.experiment import decision_surface, load_checkpoint

from tools.base import CommandTool, parameter


class Surface(CommandTool):
    """
    Surface Tool
    """
    name = "surface"
    description = "Write a decision-surface grid as CSV"

    def invoke(self, checkpoint: str, output: str, extent: Optional[str] = None, resolution: int = 50,
               **kwargs: Any) -> Dict[str, Any]:
        """
        Evaluate a checkpoint on a grid.

        Args:
            checkpoint: Path of checkpoint.json
            output: CSV destination
            extent: "x1min,x1max,x2min,x2max"
            resolution: Points per axis

        Returns:
            Output path, row count and column names
        """
        loaded = load_checkpoint(checkpoint)
        if loaded.kind != "bam":
            raise ConfigError("Decision surfaces need an aggregate-predictor checkpoint")
        bounds = (-3.0, 3.0, -3.0, 3.0)
        if extent:
            try:
                bounds = tuple(float(value) for value in extent.split(","))
            except ValueError:
                raise ConfigError(f"Invalid extent: {extent}")
            if len(bounds) != 4:
                raise ConfigError(f"extent needs four values, got {extent}")
        frame = decision_surface(loaded.params, bounds, resolution)
        frame.to_csv(output, index=False)
        return {"path": output, "rows": int(frame.shape[0]), "columns": list(frame.columns)}

    def get_runtime_parameters(self) -> Dict[str, Any]:
        return {
            "checkpoint": parameter("string", "Checkpoint", "Path of a checkpoint.json file", required=True),
            "output": parameter("string", "Output", "CSV destination", required=True),
            "extent": parameter("string", "Extent", "Grid extent as x1min,x1max,x2min,x2max"),
            "resolution": parameter("integer", "Resolution", "Points per axis", default=50),
        }
