import os
import threading
import time
import uuid
from typing import Mapping, Optional

from fastapi import FastAPI, HTTPException, status
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from rules.rules import CORS_ORIGINS_ENV, DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_QUERIES, DEFAULT_MAX_STRATEGIES
from rera.automaton import simulate
from rera.equivalence import equivalent
from rera.learner import LearnResult, learn
from rera.serialization import AutomatonModel, automaton_from_document, automaton_to_model
from rera.teacher import SimulatedTeacher
from rera.validation import Limits, validate_limits, validate_max_constant
from rera.words import TimedWord


class MembershipRequest(BaseModel):
    automaton: AutomatonModel = Field(..., description="Automaton document in the .rera file format")
    word: str = Field(..., description='Timed word as space-separated delay:action pairs, e.g. "1.5:a 0:b"')


class MembershipResponse(BaseModel):
    accepted: bool
    verdict: str


class EquivalenceRequest(BaseModel):
    first: AutomatonModel
    second: AutomatonModel


class EquivalenceResponse(BaseModel):
    equivalent: bool
    counterexample: Optional[str] = None
    in_first: Optional[bool] = None
    in_second: Optional[bool] = None


class LearnRequest(BaseModel):
    target: AutomatonModel = Field(..., description="Hidden target automaton answered by the simulated teacher")
    K: int = Field(..., ge=0, description="Maximal constant used by the learner; at least the target's")
    max_queries: int = Field(default=DEFAULT_MAX_QUERIES, ge=1, description="Membership query budget")
    max_iterations: int = Field(default=DEFAULT_MAX_ITERATIONS, ge=1, description="Equivalence round budget")
    max_strategies: int = Field(default=DEFAULT_MAX_STRATEGIES, ge=1, description="Reset strategies tried per round")
    trace: bool = Field(default=False, description="Include the query trace in the response")


class LearnResponse(BaseModel):
    success: bool
    reason: str
    hypothesis: Optional[AutomatonModel] = None
    iterations: int
    membership_count: int
    distinct_membership_count: int
    equivalence_count: int
    statistics: dict[str, int]
    trace: Optional[list[str]] = None


class LearnJobStartResponse(BaseModel):
    job_id: str
    status: str


class LearnJobStatusResponse(BaseModel):
    job_id: str
    status: str
    elapsed_seconds: float
    iteration: int
    membership_count: int
    equivalence_count: int
    result: Optional[LearnResponse] = None
    error: Optional[str] = None


app = FastAPI(
    title="RERA Learner API",
    description="Membership, equivalence and active learning of reset-free event-recording automata.",
    version="0.1.0",
)


def cors_origins(environ: Mapping[str, str] = os.environ) -> list[str]:
    """Comma-separated browser origins allowed to call the API; none by default."""
    return [origin.strip() for origin in environ.get(CORS_ORIGINS_ENV, "").split(",") if origin.strip()]


if cors_origins():
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins(),
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

_LEARN_JOBS: dict[str, dict] = {}
_LEARN_JOBS_LOCK = threading.Lock()


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok"}


@app.post("/membership", response_model=MembershipResponse)
def membership(request: MembershipRequest) -> MembershipResponse:
    try:
        automaton = automaton_from_document(request.automaton)
        accepted = simulate(automaton, TimedWord.parse(request.word)).accepted
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return MembershipResponse(accepted=accepted, verdict="accept" if accepted else "reject")


@app.post("/equivalence", response_model=EquivalenceResponse)
def equivalence(request: EquivalenceRequest) -> EquivalenceResponse:
    try:
        result = equivalent(automaton_from_document(request.first), automaton_from_document(request.second))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    if result.equivalent:
        return EquivalenceResponse(equivalent=True)
    return EquivalenceResponse(
        equivalent=False,
        counterexample=str(result.counterexample),
        in_first=result.in_first,
        in_second=result.in_second,
    )


@app.post("/learn", response_model=LearnResponse)
def learn_sync(request: LearnRequest) -> LearnResponse:
    try:
        trace_log: Optional[list[str]] = [] if request.trace else None
        result = _run_learning(request, trace_log=trace_log)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return _build_learn_response(result, trace_log)


@app.post("/learn/jobs/start", response_model=LearnJobStartResponse, status_code=status.HTTP_202_ACCEPTED)
def learn_start(request: LearnRequest) -> LearnJobStartResponse:
    job_id = str(uuid.uuid4())
    job = {
        "job_id": job_id,
        "status": "queued",
        "created_at": time.time(),
        "started_at": None,
        "completed_at": None,
        "request": request,
        "result": None,
        "iteration": 0,
        "membership_count": 0,
        "equivalence_count": 0,
        "error": None,
        "cancel_event": threading.Event(),
    }

    with _LEARN_JOBS_LOCK:
        _LEARN_JOBS[job_id] = job

    thread = threading.Thread(target=_run_learn_job, args=(job_id,), daemon=True)
    thread.start()

    return LearnJobStartResponse(job_id=job_id, status="queued")


@app.get("/learn/jobs/{job_id}", response_model=LearnJobStatusResponse)
def learn_status(job_id: str) -> LearnJobStatusResponse:
    with _LEARN_JOBS_LOCK:
        job = _LEARN_JOBS.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="learn job not found")
        return _build_job_status_response(job)


@app.post("/learn/jobs/{job_id}/cancel", response_model=LearnJobStatusResponse)
def learn_cancel(job_id: str) -> LearnJobStatusResponse:
    with _LEARN_JOBS_LOCK:
        job = _LEARN_JOBS.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="learn job not found")
        if job["status"] in {"completed", "canceled", "failed"}:
            return _build_job_status_response(job)
        job["cancel_event"].set()
        if job["status"] == "queued":
            job["status"] = "canceled"
            job["completed_at"] = time.time()
        elif job["status"] == "running":
            job["status"] = "canceling"
        return _build_job_status_response(job)


def _run_learning(request: LearnRequest, trace_log=None, stop_requested=None, progress_callback=None) -> LearnResult:
    target = automaton_from_document(request.target)
    validate_max_constant(request.K, target)
    limits = validate_limits(
        Limits(
            max_queries=request.max_queries,
            max_iterations=request.max_iterations,
            max_strategies=request.max_strategies,
        )
    )
    return learn(
        SimulatedTeacher(target),
        target.alphabet,
        request.K,
        limits,
        trace_log=trace_log,
        stop_requested=stop_requested,
        progress_callback=progress_callback,
    )


def _run_learn_job(job_id: str) -> None:
    with _LEARN_JOBS_LOCK:
        job = _LEARN_JOBS.get(job_id)
        if job is None:
            return
        if job["status"] == "canceled":
            return
        job["status"] = "running"
        job["started_at"] = time.time()
        request = job["request"]
        cancel_event = job["cancel_event"]

    def on_progress(progress: dict[str, int]) -> None:
        with _LEARN_JOBS_LOCK:
            in_memory_job = _LEARN_JOBS.get(job_id)
            if in_memory_job is None:
                return
            for key in ("iteration", "membership_count", "equivalence_count"):
                in_memory_job[key] = max(in_memory_job[key], progress.get(key, in_memory_job[key]))

    try:
        result = _run_learning(request, stop_requested=cancel_event.is_set, progress_callback=on_progress)
    except ValueError as exc:
        with _LEARN_JOBS_LOCK:
            in_memory_job = _LEARN_JOBS.get(job_id)
            if in_memory_job is None:
                return
            in_memory_job["status"] = "failed"
            in_memory_job["error"] = str(exc)
            in_memory_job["completed_at"] = time.time()
        return
    except Exception as exc:  # pragma: no cover
        with _LEARN_JOBS_LOCK:
            in_memory_job = _LEARN_JOBS.get(job_id)
            if in_memory_job is None:
                return
            in_memory_job["status"] = "failed"
            in_memory_job["error"] = f"unexpected error: {exc}"
            in_memory_job["completed_at"] = time.time()
        return

    with _LEARN_JOBS_LOCK:
        in_memory_job = _LEARN_JOBS.get(job_id)
        if in_memory_job is None:
            return
        in_memory_job["result"] = result
        in_memory_job["status"] = "canceled" if cancel_event.is_set() else "completed"
        in_memory_job["membership_count"] = result.membership_count
        in_memory_job["equivalence_count"] = result.equivalence_count
        in_memory_job["iteration"] = result.iterations
        in_memory_job["completed_at"] = time.time()


def _build_learn_response(result: LearnResult, trace_log: Optional[list[str]] = None) -> LearnResponse:
    return LearnResponse(
        success=result.success,
        reason=result.reason,
        hypothesis=automaton_to_model(result.hypothesis) if result.hypothesis is not None else None,
        iterations=result.iterations,
        membership_count=result.membership_count,
        distinct_membership_count=result.distinct_membership_count,
        equivalence_count=result.equivalence_count,
        statistics=result.statistics,
        trace=trace_log,
    )


def _build_job_status_response(job: dict) -> LearnJobStatusResponse:
    now = time.time()
    if job["started_at"] is None:
        elapsed_seconds = 0.0
    elif job["completed_at"] is None:
        elapsed_seconds = now - job["started_at"]
    else:
        elapsed_seconds = job["completed_at"] - job["started_at"]

    result = job["result"]
    return LearnJobStatusResponse(
        job_id=job["job_id"],
        status=job["status"],
        elapsed_seconds=elapsed_seconds,
        iteration=job["iteration"],
        membership_count=job["membership_count"],
        equivalence_count=job["equivalence_count"],
        result=_build_learn_response(result) if result is not None else None,
        error=job.get("error"),
    )
