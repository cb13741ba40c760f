import typer

from corpuscle_lab.dependencies.io import write_csv, write_json
from corpuscle_lab.dependencies.run import ConfigOption, OutOption, StepOption, get_run, reporting_errors
from corpuscle_lab.models.report import RunSummary

HEADER = ("t", "rx", "ry", "rz", "vx", "vy", "vz", "s_p")


def trajectory(
    config: ConfigOption = None,
    out: OutOption = None,
    step: StepOption = None,
):
    """Integrate the Newton-Lorentz trajectory and its phase integral"""
    with reporting_errors():
        run = get_run(config, out, step=step)
        traj = run.integrate()
        rows = [
            (traj.times[k], *traj.r[k], *traj.v[k], traj.s_p[k])
            for k in range(len(traj.times))
        ]
        outputs = [write_csv(run.path("trajectory.csv"), HEADER, rows)]
        if run.config.output.summary:
            outputs.append(write_json(run.path("trajectory.json"), RunSummary(
                command="trajectory",
                outputs=[p.name for p in outputs],
                metadata={
                    "steps": len(traj.times) - 1,
                    "step": traj.step,
                    "sup_speed": traj.sup_speed,
                    "sup_acceleration": traj.sup_acceleration,
                    "phase_rate_gap": traj.phase_rate_gap(),
                },
            ).model_dump()))
        for path in outputs:
            typer.echo(str(path))
