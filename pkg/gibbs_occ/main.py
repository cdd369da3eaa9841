import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from gibbs_occ import __version__
from gibbs_occ.config import validate_configuration
from gibbs_occ.logging_config import setup_logging
from gibbs_occ.routers import distributions, estimators

logger = logging.getLogger(__name__)

setup_logging()


@asynccontextmanager
async def lifespan(app: FastAPI):
    app.state.settings = validate_configuration()
    logger.info(f"gibbs-occ API {__version__} up, exact mode K <= {app.state.settings.exact_max_order}")
    yield
    logger.info("gibbs-occ API stopped")


app = FastAPI(
    title="gibbs-occ",
    description="Gibbs-Poisson occupancy laws, star limits and estimators of n and gamma",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(distributions.router, prefix="/api", tags=["distributions"])
app.include_router(estimators.router, prefix="/api", tags=["estimators"])


@app.get("/health")
async def health_check():
    return {"status": "healthy", "version": __version__}


if __name__ == "__main__":
    import uvicorn

    settings = validate_configuration()
    uvicorn.run("gibbs_occ.main:app", host=settings.api_host, port=settings.api_port)
