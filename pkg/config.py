"""
Shared process settings for the CLI and library (environment driven)
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    log_dir: str = "user_data/logs"
    log_level: str = "INFO"
    runs_dir: str = "user_data/runs"
    debug: bool = False

    model_config = SettingsConfigDict(env_prefix="CHANNEL_", env_file=".env", extra="ignore")


settings = Settings()
