"""
Base class for fp-reach commands

Each command validates its arguments with a pydantic model, runs the
numerical work off the event loop and turns failures into the toolkit's
exception hierarchy.
"""

import asyncio
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Type

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..config import ToolkitConfig, format_validation_error, load_toolkit_config
from ..errors import ConfigurationError, FpReachError, SolverError
from ..io.files import read_orbit
from ..periodic import ReferenceOrbit, differential_correct


class CommandArgs(BaseModel):
    """Flags shared by every command"""
    model_config = ConfigDict(extra="forbid")

    config: Optional[str] = None
    seed: Optional[int] = Field(None, ge=0)
    out: Optional[str] = None


def load_config(args: CommandArgs) -> ToolkitConfig:
    return load_toolkit_config(args.config, seed=args.seed, output_dir=args.out)


def resolve_orbit(cfg: ToolkitConfig) -> ReferenceOrbit:
    """Orbit from orbit_path, or corrected from the inline/reference guess"""
    if cfg.orbit_path is not None:
        orbit = read_orbit(cfg.orbit_path)
        logger.info(f"Loaded orbit from {cfg.orbit_path} (residual {orbit.closure_residual:.3e})")
        return orbit
    state, period = cfg.orbit_guess()
    return differential_correct(
        state,
        period,
        cfg.params,
        tol=cfg.solver.correction_tol,
        max_iter=cfg.solver.correction_max_iter,
    )


class BaseCommand(ABC):
    """
    Base class for all fp-reach commands

    Provides argument validation, error handling and response formatting
    around a synchronous _execute_impl.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Command name (used on the command line)"""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        pass

    @property
    def input_model(self) -> Type[CommandArgs]:
        return CommandArgs

    async def execute(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        """Validate, run in a worker thread, and format the result"""
        try:
            validated = self._validate_input(arguments)
            result = await asyncio.to_thread(self._execute_impl, validated)
            return self._format_response(result)
        except ValidationError as e:
            logger.error(f"Validation error in {self.name}: {e}")
            raise ConfigurationError(f"Invalid arguments: {format_validation_error(e)}") from e
        except FpReachError as e:
            logger.error(f"{type(e).__name__} in {self.name}: {e}")
            raise
        except Exception as e:
            logger.error(f"Unexpected error in {self.name}: {e}")
            raise SolverError(f"Command execution failed: {e}") from e

    def _validate_input(self, arguments: Dict[str, Any]) -> CommandArgs:
        return self.input_model.model_validate(arguments)

    @abstractmethod
    def _execute_impl(self, args: Any) -> Dict[str, Any]:
        pass

    def _format_response(self, result: Dict[str, Any]) -> Dict[str, Any]:
        return self._build_success_response(result, files=result.pop("files", []))

    def _build_success_response(
        self, data: Dict[str, Any], files: Optional[List[Path]] = None
    ) -> Dict[str, Any]:
        return {
            "success": True,
            "command": self.name,
            "files": [str(f) for f in files or []],
            "data": data,
        }
