"""
Verify Tool

This tool re-derives the numbers of a run record from its checkpoint and
the data, and reports every field that does not match.
"""

from typing import Any, Dict, Optional

from pbgnet.data import load_task
from pbgnet.errors import ConfigError, DataFormatError
from pbgnet.experiment import RunRecord, verify_record
from pbgnet.run_storage import get_run_record, init_run_db
from pbgnet.settings import load_settings

from tools.base import CommandTool, parameter


class Verify(CommandTool):
    """
    Verify Tool
    """
    name = "verify"
    description = "Recompute a run record from artifacts on disk"

    def invoke(self, record: Optional[str] = None, run_id: Optional[str] = None, data_dir: Optional[str] = None,
               db_url: Optional[str] = None, **kwargs: Any) -> Dict[str, Any]:
        """
        Verify one run.

        Args:
            record: Path of record.json
            run_id: Registry ID (used when no record path is given)
            data_dir: Dataset root
            db_url: Run registry URL

        Returns:
            Verification result with the differing fields
        """
        settings = load_settings()
        if record:
            run = RunRecord.load(record)
        elif run_id:
            init_run_db(db_url or settings.run_db_url)
            run = get_run_record(run_id)
            if run is None:
                raise DataFormatError(f"Run {run_id} not found in the registry")
        else:
            raise ConfigError("Pass either --record or --run-id")
        data = load_task(run.config["task"], data_dir or settings.data_dir, run.config["seed"])
        return verify_record(run, data)

    def get_runtime_parameters(self) -> Dict[str, Any]:
        return {
            "record": parameter("string", "Record", "Path of a record.json file"),
            "run_id": parameter("string", "Run ID", "Registry ID of the run"),
            "data_dir": parameter("string", "Data Directory", "Dataset root"),
            "db_url": parameter("string", "Run Registry URL", "SQLAlchemy URL of the run registry"),
        }
