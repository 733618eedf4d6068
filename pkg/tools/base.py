"""
Command Tool Base

This module provides the shared base of every command tool: the
{"success", "error", "result"} envelope, the parameter schema used to build
the command line, and the experiment parameters shared by the training tools.
"""

import logging
from typing import Any, Dict, Optional

from pbgnet.errors import ConfigError, error_envelope
from pbgnet.experiment_config import ExperimentConfig

logger = logging.getLogger(__name__)


def parameter(type_: str, label: str, description: str, required: bool = False,
              default: Any = None) -> Dict[str, Any]:
    return {
        "type": type_,
        "required": required,
        "label": label,
        "human_description": description,
        "description": description,
        "default": default,
    }


EXPERIMENT_PARAMETERS = {
    "task": parameter("string", "Task", "Task name (mnist17, mnist49, mnist56, mnistLH, adult, ads, blobs[:n], "
                      "moons[:n]) or a saved task manifest", required=True),
    "method": parameter("string", "Method", "pbgnet, pbgnet_pre, pbgnet_l, pbgnet_l_bnd or mlp", default="pbgnet"),
    "layers": parameter("integer", "Hidden Layers", "Number of hidden layers (1 to 3)", default=1),
    "width": parameter("integer", "Hidden Width", "Neurons per hidden layer", default=10),
    "sample_size": parameter("integer", "Sample Size", "Monte Carlo sample size T (omit for exact sums)"),
    "inference_sample_size": parameter("integer", "Inference Sample Size",
                                       "Sample size used when certifying (defaults to T)"),
    "exact": parameter("boolean", "Exact", "Force exact combinatorial sums"),
    "lr": parameter("number", "Learning Rate", "Initial Adam learning rate", default=0.01),
    "weight_decay": parameter("number", "Weight Decay", "L2 regularization for pbgnet_l, pbgnet_l_bnd and mlp",
                              default=0.0),
    "delta": parameter("number", "Delta", "Confidence parameter of the bound", default=0.05),
    "multiplicity": parameter("integer", "Multiplicity", "Union-bound multiplicity (architecture cells)"),
    "seed": parameter("integer", "Seed", "Global seed", default=0),
    "epochs": parameter("integer", "Epochs", "Maximum number of epochs"),
    "batch_size": parameter("integer", "Batch Size", "Mini-batch size (32 below 20000 examples, else 64)"),
    "out_dir": parameter("string", "Output Directory", "Directory for run artifacts"),
    "data_dir": parameter("string", "Data Directory", "Dataset root"),
    "db_url": parameter("string", "Run Registry URL", "SQLAlchemy URL of the run registry"),
}

CONFIG_FIELDS = ("task", "method", "layers", "width", "sample_size", "inference_sample_size", "lr",
                 "weight_decay", "delta", "multiplicity", "seed", "epochs", "batch_size")


def build_config(exact: bool = False, exact_cap: Optional[int] = None, **params: Any) -> ExperimentConfig:
    """
    Build an ExperimentConfig from command parameters.

    Unset parameters keep the config defaults.
    """
    if exact and params.get("sample_size") is not None:
        raise ConfigError("--exact and --sample-size are mutually exclusive")
    settings = {name: params[name] for name in CONFIG_FIELDS if params.get(name) is not None}
    if exact_cap is not None:
        settings["exact_cap"] = exact_cap
    return ExperimentConfig(**settings)


class CommandTool:
    """
    Base command tool.

    Subclasses implement invoke(); run() wraps it in the result envelope.
    """
    name = ""
    description = ""

    def run(self, **kwargs: Any) -> Dict[str, Any]:
        """
        Run the command.

        Args:
            **kwargs: Command parameters

        Returns:
            {"success": True, "error": None, "result": ...} or the error envelope
        """
        try:
            return {"success": True, "error": None, "result": self.invoke(**kwargs)}
        except Exception as e:
            logger.debug("%s failed", self.name, exc_info=True)
            return error_envelope(e)

    def invoke(self, **kwargs: Any) -> Any:
        raise NotImplementedError

    def get_runtime_parameters(self) -> Dict[str, Any]:
        """
        Get runtime parameters for the tool.

        Returns:
            Runtime parameters
        """
        return {}
