from pydantic import BaseModel, ConfigDict, PositiveFloat


class PhysicalConstants(BaseModel):
    """Mass, charge, the Planck-like constant chi and the speed of light."""

    m: PositiveFloat = 1.0
    q: PositiveFloat = 1.0
    chi: PositiveFloat = 1.0
    c: PositiveFloat = 1.0

    model_config = ConfigDict(frozen=True)
