import logging

import numpy as np
import typer

from corpuscle_lab.dependencies.io import write_csv, write_json
from corpuscle_lab.dependencies.profiles import get_form_factor
from corpuscle_lab.dependencies.run import (
    ConfigOption,
    OutOption,
    QuadNodesOption,
    SeedOption,
    StepOption,
    ThreadsOption,
    get_nonlinearity,
    get_run,
    reporting_errors,
    sample_offsets,
    sample_times,
)
from corpuscle_lab.errors import ConfigError
from corpuscle_lab.models.report import RunSummary
from corpuscle_lab.physics.conservation import STENCIL_OFFSETS, residual_sweep
from corpuscle_lab.physics.corpuscle import WaveCorpuscle

logger = logging.getLogger(__name__)

HEADER = (
    "t", "x", "y", "z", "u", "p1", "p2", "p3",
    "cont_res", "mom_res1", "mom_res2", "mom_res3",
)


def conserve(
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    seed: SeedOption = None,
    quad_nodes: QuadNodesOption = None,
    step: StepOption = None,
):
    """Continuity and momentum residuals of the wave-corpuscle at sampled points"""
    with reporting_errors():
        run = get_run(config, out, threads, seed, quad_nodes, step)
        study = run.config
        sampling = study.sampling
        traj = run.integrate()
        ff = get_form_factor(study.profile, sampling.a)
        wc = WaveCorpuscle(ff, traj, study.build_potentials(), study.build_P3(), study.constants, run.quad_nodes)
        nl = get_nonlinearity(ff)
        h = ff.a * run.settings.stencil_fraction

        # Time stencils must stay on the trajectory
        reach = float(np.max(np.abs(STENCIL_OFFSETS))) * h
        if traj.t1 - traj.t0 <= 2.0 * reach:
            raise ConfigError(f"Time span [{traj.t0}, {traj.t1}] is too short for the stencil h={h:g}")
        rng = run.rng()
        points = []
        for t in sample_times(traj.t0 + reach, traj.t1 - reach, sampling.times):
            for y in sample_offsets(rng, sampling.points, sampling.radius * sampling.a):
                points.append((float(t), traj.position(float(t)) + y))

        sweep = residual_sweep(wc, wc.aux, nl, points, h, study.constants, run.threads)
        rows = [
            (row.t, *row.x, row.u, *row.p, row.continuity, *row.momentum)
            for row in sweep
        ]
        outputs = [write_csv(run.path("conserve.csv"), HEADER, rows)]
        if study.output.summary:
            outputs.append(write_json(run.path("conserve.json"), RunSummary(
                command="conserve",
                outputs=[p.name for p in outputs],
                metadata={
                    "a": ff.a,
                    "h": h,
                    "max_continuity": max(abs(row.continuity) for row in sweep),
                    "max_momentum": max(float(np.linalg.norm(row.momentum)) for row in sweep),
                    "phase_branch": wc.phase_branch,
                },
            ).model_dump()))
        for path in outputs:
            typer.echo(str(path))
