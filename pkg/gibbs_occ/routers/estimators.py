import logging

from fastapi import APIRouter, HTTPException

from gibbs_occ.cli import build_estimate
from gibbs_occ.errors import ContractError, DomainError, GibbsOccError, error_payload
from gibbs_occ.schemas import EstimateOut, EstimateRequest

logger = logging.getLogger(__name__)
router = APIRouter()


@router.post("/estimate/{target}", response_model=EstimateOut)
async def estimate(target: str, request: EstimateRequest):
    """Estimate the number of species (target n) or the diversity (target gamma) from (k, P)."""
    if target not in ("n", "gamma"):
        raise HTTPException(status_code=404, detail=f"Unknown estimation target {target!r}")
    try:
        return build_estimate(request.family, target, request.k, request.P, request.method,
                              request.theta, request.exact)
    except (DomainError, ContractError) as e:
        raise HTTPException(status_code=422, detail=error_payload(e))
    except ValueError as e:
        raise HTTPException(status_code=422, detail={"error": "usage_error", "message": str(e)})
    except GibbsOccError as e:
        logger.error(f"estimate {target} failed: {e.message}")
        raise HTTPException(status_code=500, detail=error_payload(e))
