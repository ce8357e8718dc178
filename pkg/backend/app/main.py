import logging
from datetime import datetime, timezone

from fastapi import FastAPI

from backend.app.config import worker_count
from backend.app.routes import router as coefficient_router

# Configure logging for the main API file
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

app = FastAPI(
    title="QBM Coefficients API",
    description="Correlations, generalized diffusion and Monte Carlo checks for a quantum Brownian oscillator.",
    version="0.1.0"
)

app.include_router(coefficient_router)


@app.get("/")
async def read_root():
    return {"message": "QBM Coefficients API is running."}


@app.get("/healthcheck")
def healthcheck():
    return {"status": "ok", "workers": worker_count(), "timestamp": datetime.now(timezone.utc).isoformat()}
