import logging

from fastapi import APIRouter, HTTPException

from gibbs_occ.cli import PMF_KINDS, build_pmf_table
from gibbs_occ.errors import ContractError, DomainError, GibbsOccError, error_payload
from gibbs_occ.schemas import PmfRequest, PmfTable, RunConfig

logger = logging.getLogger(__name__)
router = APIRouter()


@router.post("/pmf/{kind}", response_model=PmfTable)
async def get_pmf(kind: str, request: PmfRequest):
    """Probability table of one of the occupancy or star-limit laws."""
    if kind not in PMF_KINDS:
        raise HTTPException(status_code=404, detail=f"Unknown pmf kind {kind!r}")
    try:
        cfg = RunConfig(
            family=request.family,
            star=kind.startswith("star-"),
            theta=request.theta,
            gamma=request.gamma,
            n=request.n,
            k=request.k,
            mode="exact" if request.exact else "log",
        )
        return build_pmf_table(cfg, kind, request.m, request.counts, request.aff)
    except (DomainError, ContractError) as e:
        raise HTTPException(status_code=422, detail=error_payload(e))
    except ValueError as e:
        raise HTTPException(status_code=422, detail={"error": "usage_error", "message": str(e)})
    except GibbsOccError as e:
        logger.error(f"pmf {kind} failed: {e.message}")
        raise HTTPException(status_code=500, detail=error_payload(e))
