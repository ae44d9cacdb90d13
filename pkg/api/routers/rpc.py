import json

from fastapi import APIRouter, Request
from starlette.concurrency import run_in_threadpool

from ..dispatcher import dispatch

router = APIRouter(tags=["RPC"])


@router.post("/rpc")
async def rpc(request: Request):
    """
    One WireRequest per POST. The body is read raw so malformed JSON
    becomes a BadRequest response instead of a validation error page.
    """

    body = await request.body()
    try:
        payload = json.loads(body)
    except (UnicodeDecodeError, json.JSONDecodeError):
        payload = None
    services = request.app.state.services
    return await run_in_threadpool(dispatch, services, payload)
