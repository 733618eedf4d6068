"""
Grid Search Tool

This tool sweeps a hyperparameter grid for one method, stores every cell in
the run registry and selects the final model with the method's rule.
"""

import json
import logging
import os
import uuid
from typing import Any, Dict, List, Optional

from pbgnet.data import load_task
from pbgnet.errors import ConfigError
from pbgnet.experiment import run_experiment, selection_report
from pbgnet.experiment_config import (
    GRID_LAYERS,
    GRID_LRS,
    GRID_SAMPLE_SIZES,
    GRID_WEIGHT_DECAYS,
    GRID_WIDTHS,
    GridSpec,
)
from pbgnet.run_storage import add_run_record, init_run_db, list_run_records
from pbgnet.settings import load_settings

from tools.base import EXPERIMENT_PARAMETERS, CommandTool, build_config, parameter

logger = logging.getLogger(__name__)


def parse_values(text: Optional[str], cast, default) -> tuple:
    """Parse a comma-separated list; "exact" stands for exact mode in sample sizes."""
    if text is None or text == "":
        return tuple(default)
    values = []
    for token in str(text).split(","):
        token = token.strip()
        if token.lower() == "exact":
            values.append(None)
        else:
            try:
                values.append(cast(token))
            except ValueError:
                raise ConfigError(f"Invalid grid value: {token}")
    return tuple(values)


class GridSearch(CommandTool):
    """
    Grid Search Tool
    """
    name = "grid"
    description = "Sweep a hyperparameter grid and select a model"

    def invoke(self, layers_grid: Optional[str] = None, widths: Optional[str] = None,
               sample_sizes: Optional[str] = None, lrs: Optional[str] = None, weight_decays: Optional[str] = None,
               grid_id: Optional[str] = None, out_dir: Optional[str] = None, data_dir: Optional[str] = None,
               db_url: Optional[str] = None, exact: bool = False, **params: Any) -> Dict[str, Any]:
        """
        Run every grid cell, then select.

        Args:
            layers_grid: Comma-separated hidden-layer counts
            widths: Comma-separated hidden widths
            sample_sizes: Comma-separated sample sizes ("exact" allowed)
            lrs: Comma-separated learning rates
            weight_decays: Comma-separated weight decays
            grid_id: Identifier shared by the cells (new UUID when omitted)
            out_dir: Directory for run artifacts
            data_dir: Dataset root
            db_url: Run registry URL
            exact: Use exact mode for every cell
            **params: Base experiment parameters

        Returns:
            Selection report
        """
        settings = load_settings()
        base = build_config(exact=exact, exact_cap=settings.exact_cap, **params)
        grid = GridSpec(
            method=base.method,
            layers=parse_values(layers_grid, int, GRID_LAYERS),
            widths=parse_values(widths, int, GRID_WIDTHS),
            sample_sizes=(None,) if exact else parse_values(sample_sizes, int, GRID_SAMPLE_SIZES),
            lrs=parse_values(lrs, float, GRID_LRS),
            weight_decays=parse_values(weight_decays, float, GRID_WEIGHT_DECAYS),
            base={key: value for key, value in base.to_dict().items()
                  if key not in ("method", "layers", "width", "sample_size", "lr", "weight_decay")},
        )
        grid_id = grid_id or str(uuid.uuid4())
        out_dir = out_dir or settings.out_dir
        data = load_task(base.task, data_dir or settings.data_dir, base.seed)
        init_run_db(db_url or settings.run_db_url)

        cells = grid.cells()
        failed: List[Dict[str, Any]] = []
        for index, config in enumerate(cells, start=1):
            logger.info("Grid %s: cell %d/%d", grid_id, index, len(cells))
            try:
                add_run_record(run_experiment(config, data, out_dir, grid_id))
            except Exception as e:
                logger.warning("Grid %s: cell %d failed: %s", grid_id, index, e)
                failed.append({"config": config.to_dict(), "error": str(e), "error_type": type(e).__name__})

        report = selection_report(list_run_records(grid_id=grid_id), base.method, failed)
        report["grid_id"] = grid_id
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"grid_{grid_id}.json"), "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2)
        return report

    def get_runtime_parameters(self) -> Dict[str, Any]:
        parameters = dict(EXPERIMENT_PARAMETERS)
        parameters.update({
            "layers_grid": parameter("string", "Hidden Layers Grid", "Comma-separated hidden-layer counts"),
            "widths": parameter("string", "Widths Grid", "Comma-separated hidden widths"),
            "sample_sizes": parameter("string", "Sample Sizes Grid", "Comma-separated sample sizes or 'exact'"),
            "lrs": parameter("string", "Learning Rates Grid", "Comma-separated learning rates"),
            "weight_decays": parameter("string", "Weight Decays Grid", "Comma-separated weight decays"),
            "grid_id": parameter("string", "Grid ID", "Identifier shared by the grid's runs"),
        })
        return parameters
