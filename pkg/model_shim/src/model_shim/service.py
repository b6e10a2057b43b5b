"""HTTP service implementing the textseam wire protocol.

Two JSON POST endpoints: ``/v1/generate`` samples a continuation from
the generation model, ``/v1/label_tokens`` returns per-token 0/1 labels
with character offsets counted in Unicode scalar values.  Every error
response carries ``{"error": reason}``.

Model calls are serialized behind one lock; clients bound pressure with
their own in-flight limits, and no ordering is promised across requests.
"""

from __future__ import annotations

import hashlib
import threading
from typing import Union

import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .checkpoints import LoadedModels

InstanceId = Union[int, str]


class GenerateRequest(BaseModel):
    id: InstanceId
    prompt: str
    temperature: float = Field(default=1.0, ge=0.0)
    top_p: float = Field(default=1.0, gt=0.0, le=1.0)
    max_new_tokens: int = Field(default=512, ge=1, le=8192)


class LabelRequest(BaseModel):
    id: InstanceId
    text: str


def _request_seed(instance_id: InstanceId) -> int:
    # Sampling is reseeded per request id so repeated calls for the same
    # instance return the same text; ids, not wall clock, drive it.
    digest = hashlib.sha256(f"{instance_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _error(status: int, reason: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": reason})


def build_app(models: LoadedModels, auth_token: str | None = None) -> FastAPI:
    """Assemble the FastAPI application around a loaded model pair."""
    app = FastAPI(openapi_url=None)
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(part) for part in first.get("loc", ()) if part != "body")
        reason = first.get("msg", "invalid request")
        return _error(422, f"{where}: {reason}" if where else reason)

    @app.exception_handler(Exception)
    async def on_unhandled_error(request: Request, exc: Exception):
        return _error(500, f"{type(exc).__name__}: {exc}")

    def check_auth(request: Request) -> JSONResponse | None:
        if auth_token is None:
            return None
        header = request.headers.get("authorization", "")
        if header != f"Bearer {auth_token}":
            return _error(401, "missing or invalid bearer token")
        return None

    @app.post("/v1/generate")
    def generate(body: GenerateRequest, request: Request):
        denied = check_auth(request)
        if denied is not None:
            return denied
        tokenizer = models.generation_tokenizer
        encoding = tokenizer(body.prompt, return_tensors="pt", add_special_tokens=False)
        prompt_length = encoding["input_ids"].shape[1]
        if prompt_length == 0:
            return _error(422, "prompt has no tokens")
        if prompt_length >= models.generation_limit:
            return _error(
                413,
                f"prompt of {prompt_length} tokens leaves no room to generate "
                f"within the limit of {models.generation_limit}",
            )
        # max_new_tokens is a cap, not a demand: clip it to the positions
        # the prompt leaves free so default-sized requests always fit.
        budget = min(body.max_new_tokens, models.generation_limit - prompt_length)
        with lock, torch.no_grad():
            torch.manual_seed(_request_seed(body.id))
            output = models.generator.generate(
                encoding["input_ids"].to(models.device),
                attention_mask=encoding["attention_mask"].to(models.device),
                do_sample=body.temperature > 0.0,
                temperature=body.temperature if body.temperature > 0.0 else None,
                top_p=body.top_p,
                max_new_tokens=budget,
                pad_token_id=tokenizer.pad_token_id,
            )
        continuation = output[0, prompt_length:]
        text = tokenizer.decode(continuation, skip_special_tokens=True)
        return {"id": body.id, "text": text}

    @app.post("/v1/label_tokens")
    def label_tokens(body: LabelRequest, request: Request):
        denied = check_auth(request)
        if denied is not None:
            return denied
        tokenizer = models.labeler_tokenizer
        encoding = tokenizer(
            body.text,
            return_offsets_mapping=True,
            truncation=True,
            max_length=models.labeler_limit,
            add_special_tokens=False,
        )
        offsets = encoding["offset_mapping"]
        if not offsets:
            return {"id": body.id, "tokens": []}
        input_ids = torch.tensor([encoding["input_ids"]], device=models.device)
        with lock, torch.no_grad():
            logits = models.labeler(input_ids=input_ids).logits[0]
        labels = logits.argmax(-1).tolist()
        tokens = [
            {"start": start, "end": end, "label": int(label)}
            for (start, end), label in zip(offsets, labels)
        ]
        return {"id": body.id, "tokens": tokens}

    return app
