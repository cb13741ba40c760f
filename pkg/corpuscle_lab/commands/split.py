import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import typer

from corpuscle_lab.dependencies.io import write_csv, write_json
from corpuscle_lab.dependencies.run import (
    ConfigOption,
    OutOption,
    QuadNodesOption,
    SeedOption,
    ThreadsOption,
    get_run,
    reporting_errors,
    sample_offsets,
)
from corpuscle_lab.models.report import SplitSummary
from corpuscle_lab.physics.fields import split_field_at_point, split_polynomial_field

logger = logging.getLogger(__name__)

HEADER = (
    "y1", "y2", "y3", "pi_poly", "pi_ray", "abs_diff",
    "tangent1", "tangent2", "tangent3", "y_dot_tangent",
)


def split(
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    seed: SeedOption = None,
    quad_nodes: QuadNodesOption = None,
):
    """Split the configured vector potential into grad(Pi) and a sphere-tangent part"""
    with reporting_errors():
        run = get_run(config, out, threads, seed, quad_nodes)
        study = run.config
        t0 = study.initial_state.t0
        A = study.build_potentials().A
        potential, tangent = split_polynomial_field(A)

        # y is measured from the frame's current origin
        origin, velocity, t_ref = A.frame
        shift = np.asarray(origin) + np.asarray(velocity) * (t0 - t_ref)
        count = study.sampling.points * study.sampling.times
        ys = sample_offsets(run.rng(), count, 1.0)

        def evaluate(y: np.ndarray) -> tuple:
            pi_ray, _ = split_field_at_point(lambda z: A(t0, shift + z), y, run.quad_nodes)
            x = shift + y
            pi_poly = float(potential(t0, x))
            v_tan = tangent(t0, x)
            return (*y, pi_poly, pi_ray, abs(pi_poly - pi_ray), *v_tan, float(y @ v_tan))

        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            rows = list(pool.map(evaluate, ys))

        outputs = [write_csv(run.path("split.csv"), HEADER, rows)]
        if study.output.summary:
            summary = SplitSummary(
                potential=potential.to_dict(),
                tangent=tangent.to_list(),
                max_abs_diff=max(row[5] for row in rows),
                max_y_dot_tangent=max(abs(row[9]) for row in rows),
                points=len(rows),
            )
            outputs.append(write_json(run.path("split.json"), summary.model_dump()))
        logger.info("Split %d sample points", len(rows))
        for path in outputs:
            typer.echo(str(path))
