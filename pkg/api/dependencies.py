from functools import lru_cache

from dotenv import load_dotenv

from src.pcpe.config import Settings, load_settings
from src.pcpe.services import Services, build_services

load_dotenv()


@lru_cache
def get_settings() -> Settings:
    return load_settings()


@lru_cache
def get_services() -> Services:
    return build_services(get_settings())
