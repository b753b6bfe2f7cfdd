from pydantic_settings import BaseSettings, SettingsConfigDict


class Config(BaseSettings):
    # working precision in bits for every BigReal computation
    bits: int = 256
    # argument reduction refuses to go above this guard precision
    guard_ceiling_bits: int = 65536
    fit_bits: int = 128
    omega_budget: float = 1e8
    # maximum number of omega steps a single grid scan may take
    scan_limit: int = 20_000_000
    sup_points: int = 10_000
    max_concurrent: int = 4
    seed: int = 0
    log_level: str = "WARNING"

    model_config = SettingsConfigDict(
        env_prefix="XPRLAB_", env_file=".env", extra="ignore"
    )


config = Config()
