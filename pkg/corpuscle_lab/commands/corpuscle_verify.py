import logging
from concurrent.futures import ThreadPoolExecutor

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
from corpuscle_lab.models.report import RunSummary
from corpuscle_lab.physics.corpuscle import WaveCorpuscle, nls_residual, residual_scale

logger = logging.getLogger(__name__)

HEADER = ("t", "x", "y", "z", "abs_psi", "residual_re", "residual_im", "residual_over_scale")


def corpuscle_verify(
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    seed: SeedOption = None,
    quad_nodes: QuadNodesOption = None,
    step: StepOption = None,
):
    """NLS residual of the wave-corpuscle against its auxiliary potentials at sampled points"""
    with reporting_errors():
        run = get_run(config, out, threads, seed, quad_nodes, step)
        study = run.config
        sampling = study.sampling
        constants = study.constants
        traj = run.integrate()
        ff = get_form_factor(study.profile, sampling.a)
        wc = WaveCorpuscle(ff, traj, study.build_potentials(), study.build_P3(), constants, run.quad_nodes)
        nl = get_nonlinearity(ff)
        scale = residual_scale(ff, constants)

        rng = run.rng()
        times = sample_times(traj.t0, traj.t1, sampling.times)
        offsets = [sample_offsets(rng, sampling.points, sampling.radius * sampling.a) for _ in times]

        def evaluate(k: int) -> list[tuple]:
            t = float(times[k])
            x = traj.position(t) + offsets[k]
            psi = wc.sample(t, x)
            res = nls_residual(psi, wc.aux, nl, t, x, constants)
            abs_psi = np.abs(psi.psi)
            ratio = np.divide(np.abs(res), scale * abs_psi, out=np.zeros_like(abs_psi), where=abs_psi > 0)
            return [
                (t, *x[j], abs_psi[j], res[j].real, res[j].imag, ratio[j])
                for j in range(len(x))
            ]

        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            rows = [row for block in pool.map(evaluate, range(len(times))) for row in block]

        worst = max(row[-1] for row in rows)
        logger.info("Residual over scale at %d points: max %.3g", len(rows), worst)
        outputs = [write_csv(run.path("corpuscle_verify.csv"), HEADER, rows)]
        if study.output.summary:
            outputs.append(write_json(run.path("corpuscle_verify.json"), RunSummary(
                command="corpuscle-verify",
                outputs=[p.name for p in outputs],
                metadata={
                    "a": ff.a,
                    "residual_scale": scale,
                    "max_residual_over_scale": worst,
                    "phase_branch": wc.phase_branch,
                    "nonlinearity": dict(nl.metadata),
                },
            ).model_dump()))
        for path in outputs:
            typer.echo(str(path))
