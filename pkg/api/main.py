import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api.dependencies import get_services, get_settings
from api.routers import rpc
from src.pcpe.logging_config import configure_logging
from src.pcpe.services import Services

logger = logging.getLogger(__name__)


def create_app(services: Services | None = None) -> FastAPI:
    """
    App factory; tests pass their own services, the server uses the
    ones configured from the environment.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        flushed = app.state.services.repository.flush_sessions()
        logger.info("Shutdown: %d sessions flushed", flushed)

    app = FastAPI(
        title="PCPE Repository API",
        description="Servicio JSON de un repositorio de objetos digitales "
        "que llevan y hacen cumplir sus propias políticas",
        version="0.1.0",
        lifespan=lifespan,
    )
    app.state.services = services if services is not None else get_services()

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=False,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/")
    def root():
        return {"Message": "PCPE API working"}

    @app.get("/health")
    def health():
        return {"Status": "Ok"}

    app.include_router(rpc.router)
    return app


def app_factory() -> FastAPI:
    """
    Entry point for `uvicorn api.main:app_factory --factory`.
    """

    configure_logging(get_settings().log_level)
    return create_app()
