from dotenv import load_dotenv

load_dotenv()

import typer

from corpuscle_lab.commands import concentrate, conserve, corpuscle_verify, reconstruct, selftest, split, trajectory
from corpuscle_lab.log import configure_logging
from corpuscle_lab.settings import get_settings

app = typer.Typer(name="corpuscle", no_args_is_help=True, add_completion=False)
app.command("reconstruct")(reconstruct.reconstruct)
app.command("split")(split.split)
app.command("trajectory")(trajectory.trajectory)
app.command("corpuscle-verify")(corpuscle_verify.corpuscle_verify)
app.command("conserve")(conserve.conserve)
app.command("concentrate")(concentrate.concentrate)
app.command("selftest")(selftest.selftest)


@app.callback()
def main():
    """Numerical laboratory for wave-corpuscle solutions of the NLS equation"""
    configure_logging(get_settings().log)


if __name__ == "__main__":
    app()
