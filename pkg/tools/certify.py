"""
Certify Tool

This tool recomputes the PAC-Bayes certificate of a saved checkpoint.
"""

import json
from typing import Any, Dict, Optional

from pbgnet.data import load_task
from pbgnet.experiment import certify_checkpoint, load_checkpoint
from pbgnet.settings import load_settings

from tools.base import CommandTool, parameter


class Certify(CommandTool):
    """
    Certify Tool
    """
    name = "certify"
    description = "Recompute the bound certificate of a checkpoint"

    def invoke(self, checkpoint: str, task: Optional[str] = None, data_dir: Optional[str] = None,
               delta: Optional[float] = None, seed: Optional[int] = None, output: Optional[str] = None,
               **kwargs: Any) -> Dict[str, Any]:
        """
        Certify a checkpoint.

        Args:
            checkpoint: Path of checkpoint.json
            task: Task override (the checkpoint's task by default)
            data_dir: Dataset root
            delta: Confidence override
            seed: Seed override for the inference repetitions
            output: File to write the report to

        Returns:
            BoundReport as a dictionary
        """
        settings = load_settings()
        loaded = load_checkpoint(checkpoint)
        data = load_task(task or loaded.config.task, data_dir or settings.data_dir, loaded.config.seed)
        report = certify_checkpoint(loaded, data, delta=delta, seed=seed).to_dict()
        if output:
            with open(output, "w", encoding="utf-8") as handle:
                json.dump(report, handle, indent=2)
        return report

    def get_runtime_parameters(self) -> Dict[str, Any]:
        return {
            "checkpoint": parameter("string", "Checkpoint", "Path of a checkpoint.json file", required=True),
            "task": parameter("string", "Task", "Task override"),
            "data_dir": parameter("string", "Data Directory", "Dataset root"),
            "delta": parameter("number", "Delta", "Confidence parameter override"),
            "seed": parameter("integer", "Seed", "Seed override for inference repetitions"),
            "output": parameter("string", "Output", "File to write the BoundReport JSON to"),
        }
