from corpuscle_lab.errors import ConfigError
from corpuscle_lab.models.study import ProfileConfig
from corpuscle_lab.physics.formfactor import (
    FormFactor,
    RadialProfile,
    algebraic_profile,
    gaussian_profile,
    sech_profile,
)


def get_profile_by_name(name: str, params: dict[str, float] | None = None) -> RadialProfile:
    """Get a built-in radial profile by name"""
    params = params or {}
    if name == "gaussian":
        return gaussian_profile()
    if name == "sech":
        return sech_profile()
    if name == "algebraic":
        if "p" not in params:
            raise ConfigError("Profile not usable: algebraic needs the exponent p")
        return algebraic_profile(params["p"])
    raise ConfigError(f"Profile not found: {name}")


def get_form_factor(config: ProfileConfig, a: float) -> FormFactor:
    """Form factor of size a for the configured profile"""
    return FormFactor(get_profile_by_name(config.name, config.params), a, config.lam)
