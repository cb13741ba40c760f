import logging
from typing import Annotated

import numpy as np
import typer

from corpuscle_lab.dependencies.io import write_csv, write_json
from corpuscle_lab.dependencies.profiles import get_profile_by_name
from corpuscle_lab.dependencies.run import ConfigOption, OutOption, get_run, reporting_errors
from corpuscle_lab.models.report import RunSummary
from corpuscle_lab.physics.formfactor import reconstruct_nonlinearity

logger = logging.getLogger(__name__)

HEADER = ("s", "gprime", "gprime_closed_form", "abs_err")

# Tabulated range in theta: s runs over [psi(THETA_RANGE[1])^2, psi(THETA_RANGE[0])^2]
THETA_RANGE = (0.0, 4.0)


def reconstruct(
    config: ConfigOption = None,
    out: OutOption = None,
    samples: Annotated[int, typer.Option("--samples", min=2, help="Log-spaced s samples.")] = 200,
):
    """Tabulate the nonlinearity G' reconstructed from the configured profile"""
    with reporting_errors():
        run = get_run(config, out)
        chosen = run.config.profile
        profile = get_profile_by_name(chosen.name, chosen.params)
        nl = reconstruct_nonlinearity(profile)

        s_low = float(profile.value(THETA_RANGE[1]) ** 2)
        s_high = float(profile.value(THETA_RANGE[0]) ** 2)
        s = np.geomspace(s_low, s_high, samples)
        got = nl.gprime(s)
        closed = profile.gprime_closed(s) if profile.gprime_closed is not None else None

        rows = []
        for k in range(samples):
            if closed is None:
                rows.append((s[k], got[k], None, None))
            else:
                rows.append((s[k], got[k], closed[k], abs(got[k] - closed[k])))
        outputs = [write_csv(run.path("reconstruct.csv"), HEADER, rows)]
        if run.config.output.summary:
            outputs.append(write_json(run.path("reconstruct.json"), RunSummary(
                command="reconstruct",
                outputs=[p.name for p in outputs],
                metadata={**nl.metadata, "s_max": nl.s_max, "extension_value": nl.extension_value},
            ).model_dump()))
        for path in outputs:
            typer.echo(str(path))
