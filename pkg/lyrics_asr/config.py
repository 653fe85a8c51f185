import os
from dotenv import load_dotenv
from pydantic_settings import BaseSettings

# Load environment variables from .env file if it exists
load_dotenv()

class Settings(BaseSettings):
    """Toolkit settings."""
    # Runtime
    LOG_LEVEL: str = os.getenv("LYRICS_ASR_LOG_LEVEL", "INFO")
    DEVICE: str = os.getenv("LYRICS_ASR_DEVICE", "cpu")
    DETERMINISTIC: bool = os.getenv("LYRICS_ASR_DETERMINISTIC", "true").lower() == "true"
    NUM_WORKERS: int = int(os.getenv("LYRICS_ASR_NUM_WORKERS", "1"))

    # Paths
    DATA_DIR: str = os.getenv("LYRICS_ASR_DATA_DIR", "data")
    OUTPUT_DIR: str = os.getenv("LYRICS_ASR_OUTPUT_DIR", "exp")

    # Monitoring
    ENABLE_METRICS: bool = os.getenv("LYRICS_ASR_ENABLE_METRICS", "false").lower() == "true"
    METRICS_HOST: str = os.getenv("LYRICS_ASR_METRICS_HOST", "0.0.0.0")
    METRICS_PORT: int = int(os.getenv("LYRICS_ASR_METRICS_PORT", "9092"))

    class Config:
        env_file = ".env"
        case_sensitive = True


# Create global settings instance
settings = Settings()
