from typing import Any, Optional

from pydantic import BaseModel, Field


class ReceiptModel(BaseModel):
    name: str = Field(..., min_length=1)
    amountCents: int = Field(..., ge=0)


class PrincipalModel(BaseModel):
    name: str = "anonymous"
    credentials: list[str] = []
    receipts: list[ReceiptModel] = []


class WireRequest(BaseModel):
    op: str = Field(..., min_length=1)
    params: dict[str, Any] = {}
    principal: Optional[PrincipalModel] = None
    sessionId: str = "wire"


class WireError(BaseModel):
    kind: str
    message: str
    detail: dict[str, Any] = {}


class WireResponse(BaseModel):
    ok: bool
    result: Any = None
    error: Optional[WireError] = None
