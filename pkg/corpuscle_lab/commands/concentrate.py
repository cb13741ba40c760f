import logging

import typer

from corpuscle_lab.dependencies.io import write_csv, write_json
from corpuscle_lab.dependencies.profiles import get_profile_by_name
from corpuscle_lab.dependencies.run import (
    ConfigOption,
    OutOption,
    QuadNodesOption,
    SeedOption,
    StepOption,
    ThreadsOption,
    get_run,
    reporting_errors,
)
from corpuscle_lab.physics.concentration import REPORT_COLUMNS, concentration_study

logger = logging.getLogger(__name__)


def concentrate(
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    seed: SeedOption = None,
    quad_nodes: QuadNodesOption = None,
    step: StepOption = None,
):
    """Run the concentration study over the configured schedule"""
    with reporting_errors():
        run = get_run(config, out, threads, seed, quad_nodes, step)
        study = run.config
        state = study.initial_state
        if study.profile.lam:
            logger.warning("The concentration study uses the ground state; lam=%g is ignored", study.profile.lam)

        report = concentration_study(
            study.build_potentials(),
            get_profile_by_name(study.profile.name, study.profile.params),
            state.r0,
            state.v0,
            (state.t0, state.t1),
            study.schedule.build(),
            study.build_P3(),
            study.constants,
            step=state.step,
            time_samples=study.time_samples,
            sphere=run.sphere,
            radial_nodes=run.settings.radial_nodes,
            threads=run.threads,
            max_speed=run.settings.max_speed,
            max_acceleration=run.settings.max_acceleration,
            quad_nodes=run.quad_nodes,
        )
        rows = [tuple(getattr(record, name) for name in REPORT_COLUMNS) for record in report.records]
        outputs = [write_csv(run.path("concentrate.csv"), REPORT_COLUMNS, rows)]
        summary = report.summary(run.settings.noise_floor)
        summary["metadata"]["seed"] = study.seed
        outputs.append(write_json(run.path("summary.json"), summary))
        for path in outputs:
            typer.echo(str(path))
