"""
Train Run Tool

This tool trains a single run end to end, writes its artifacts and stores
its record in the run registry.
"""

from typing import Any, Dict, Optional

from pbgnet.data import load_task
from pbgnet.experiment import run_experiment
from pbgnet.run_storage import add_run_record, init_run_db
from pbgnet.settings import load_settings

from tools.base import EXPERIMENT_PARAMETERS, CommandTool, build_config


class TrainRun(CommandTool):
    """
    Train Run Tool
    """
    name = "train"
    description = "Train one configuration and certify it"

    def invoke(self, out_dir: Optional[str] = None, data_dir: Optional[str] = None, db_url: Optional[str] = None,
               exact: bool = False, grid_id: Optional[str] = None, **params: Any) -> Dict[str, Any]:
        """
        Train one run.

        Args:
            out_dir: Directory for run artifacts
            data_dir: Dataset root
            db_url: Run registry URL
            exact: Force exact mode
            grid_id: Grid the run belongs to
            **params: Experiment parameters

        Returns:
            The run record
        """
        settings = load_settings()
        config = build_config(exact=exact, exact_cap=settings.exact_cap, **params)
        data = load_task(config.task, data_dir or settings.data_dir, config.seed)
        record = run_experiment(config, data, out_dir or settings.out_dir, grid_id)
        init_run_db(db_url or settings.run_db_url)
        add_run_record(record)
        return record.to_dict()

    def get_runtime_parameters(self) -> Dict[str, Any]:
        return dict(EXPERIMENT_PARAMETERS)
