import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Iterator, Optional

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel
from rich.pretty import Pretty

from corpuscle_lab.errors import ConfigError, CorpuscleError
from corpuscle_lab.models.study import StudyConfig
from corpuscle_lab.physics.dynamics import Trajectory, integrate_newton
from corpuscle_lab.physics.formfactor import (
    FormFactor,
    Nonlinearity,
    reconstruct_nonlinearity,
    scaled_nonlinearity,
)
from corpuscle_lab.physics.quadrature import SphereQuadrature
from corpuscle_lab.presets import uniform_b_study
from corpuscle_lab.settings import Settings, get_settings

logger = logging.getLogger(__name__)

err_console = Console(stderr=True)

ConfigOption = Annotated[
    Optional[Path],
    typer.Option("--config", help="Study config (JSON, or YAML by suffix); defaults to the uniform-B preset."),
]
OutOption = Annotated[Optional[Path], typer.Option("--out", help="Output directory.")]
ThreadsOption = Annotated[Optional[int], typer.Option("--threads", min=1, help="Worker threads.")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", min=0, help="Seed for sampled points.")]
QuadNodesOption = Annotated[Optional[int], typer.Option("--quad-nodes", min=2, help="Ray quadrature nodes.")]
StepOption = Annotated[Optional[float], typer.Option("--step", help="Trajectory step.")]


@contextmanager
def reporting_errors() -> Iterator[None]:
    """Turn package errors into a diagnostic on stderr and the matching exit code"""
    try:
        yield
    except CorpuscleError as exc:
        title = type(exc).__name__
        body = Pretty(exc.detail) if isinstance(exc.detail, dict) else str(exc.detail)
        err_console.print(Panel(body, title=title, border_style="red"))
        raise typer.Exit(code=exc.exit_code) from exc


@dataclass(frozen=True)
class Run:
    """A study config with the command-line overrides applied."""

    config: StudyConfig
    out: Path
    threads: int
    quad_nodes: int
    settings: Settings

    def path(self, name: str) -> Path:
        return self.out / name

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.config.seed)

    @property
    def sphere(self) -> SphereQuadrature:
        return SphereQuadrature(self.settings.sphere_polar, self.settings.sphere_azimuth)

    def integrate(self, multiple: int = 1) -> Trajectory:
        state = self.config.initial_state
        traj = integrate_newton(
            self.config.build_potentials(),
            state.r0,
            state.v0,
            state.t0,
            state.t1,
            state.step,
            self.config.constants,
            multiple=multiple,
        )
        traj.check_bounds(self.settings.max_speed, self.settings.max_acceleration)
        return traj


def load_study(config: Path | None) -> StudyConfig:
    """Get the study config from a file, or the bundled preset when none is given"""
    study = StudyConfig.load(config) if config is not None else uniform_b_study()
    logger.info("Config loaded from %s", config or "the uniform-B preset")
    return study


def get_run(
    config: Path | None = None,
    out: Path | None = None,
    threads: int | None = None,
    seed: int | None = None,
    quad_nodes: int | None = None,
    step: float | None = None,
) -> Run:
    """Resolve flag > config > setting for every run parameter"""
    settings = get_settings()
    study = load_study(config)
    update = {}
    if seed is not None:
        update["seed"] = seed
    if step is not None:
        if not step > 0:
            raise ConfigError(f"--step must be positive, got {step}")
        update["initial_state"] = study.initial_state.model_copy(update={"step": step})
    if update:
        study = StudyConfig.from_document(study.model_copy(update=update).model_dump(), "with overrides")
    return Run(
        config=study,
        out=Path(out) if out is not None else Path(study.output.directory),
        threads=settings.worker_count(threads),
        quad_nodes=quad_nodes or settings.quad_nodes,
        settings=settings,
    )


def get_nonlinearity(ff: FormFactor) -> Nonlinearity:
    """Nonlinearity solved by the form factor at its size, shifted by its eigenvalue"""
    nl = scaled_nonlinearity(reconstruct_nonlinearity(ff.profile), ff.a)
    return nl.shifted(ff.lam) if ff.lam else nl


def sample_offsets(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """Points uniformly distributed in the ball of the given radius about the origin"""
    directions = rng.standard_normal((count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * radius * rng.uniform(0.0, 1.0, count)[:, None] ** (1.0 / 3.0)


def sample_times(t0: float, t1: float, count: int) -> np.ndarray:
    return np.linspace(t0, t1, count) if count > 1 else np.array([0.5 * (t0 + t1)])
