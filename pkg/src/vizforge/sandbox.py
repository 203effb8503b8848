"""Subprocess sandbox: run candidate code with caps, capture artifacts.

Each execution owns an ephemeral workspace and a fresh process group.
Termination is enforced at timeout + grace at the latest: SIGTERM to the
group at timeout, SIGKILL after grace. Results are values, not exceptions;
only store-ingestion failures are fatal.
"""

from __future__ import annotations

import json
import logging
import os
import resource
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import ProfileConfig
from .errors import PreconditionError
from .records import ValidationResult
from .store import CorpusStore

logger = logging.getLogger(__name__)

TAIL_CHARS = 4000

MEDIA_BY_SUFFIX = {
    ".png": "image",
    ".jpg": "image",
    ".jpeg": "image",
    ".svg": "image",
    ".gif": "video",
    ".mp4": "video",
    ".webm": "video",
    ".html": "html_snapshot",
}


def _tail(data: bytes) -> str:
    return data.decode("utf-8", errors="replace")[-TAIL_CHARS:]


def _limits(profile: ProfileConfig):
    def apply():
        os.setsid()  # own process group so the whole tree can be killed
        os.nice(10)  # busy candidates must not starve the supervisor's timers
        if profile.memory_mb:
            cap = profile.memory_mb * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
        if profile.cpu_seconds:
            resource.setrlimit(
                resource.RLIMIT_CPU, (profile.cpu_seconds, profile.cpu_seconds)
            )

    return apply


def _kill_group(proc: subprocess.Popen, sig: int) -> None:
    try:
        os.killpg(proc.pid, sig)
    except ProcessLookupError:
        pass


def execute(
    code: str,
    profile: ProfileConfig,
    store: Optional[CorpusStore] = None,
    created_by: str = "sandbox",
    resources: Optional[dict[str, bytes]] = None,
) -> ValidationResult:
    """Run `code` under `profile` in a throwaway workspace."""
    if profile.profile_id == "none":
        raise PreconditionError("profile 'none' performs no execution")

    workspace = Path(tempfile.mkdtemp(prefix="vizforge-sbx-"))
    started = time.monotonic()
    try:
        main = workspace / profile.main_filename
        main.write_text(code, encoding="utf-8")
        for name, data in (resources or {}).items():
            target = workspace / name
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)

        cmd = [
            arg.format(main=str(main), workspace=str(workspace), python=sys.executable)
            for arg in profile.command
        ]
        try:
            proc = subprocess.Popen(
                cmd,
                cwd=workspace,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                preexec_fn=_limits(profile),
                env={**os.environ, "MPLBACKEND": "Agg"},
            )
        except OSError as exc:
            return ValidationResult(
                passed=False,
                termination_reason="spawn_failure",
                stderr_tail=str(exc),
                duration=time.monotonic() - started,
            )

        # absolute deadlines so spawn and scheduling overhead cannot push the
        # total wall time past timeout + grace; SIGKILL fires with margin
        term_deadline = started + profile.timeout
        hard_deadline = started + profile.timeout + profile.grace - 0.3
        reason = "exit"
        try:
            out, err = proc.communicate(
                timeout=max(0.0, term_deadline - time.monotonic())
            )
        except subprocess.TimeoutExpired:
            reason = "timeout"
            _kill_group(proc, signal.SIGTERM)
            try:
                out, err = proc.communicate(
                    timeout=max(0.05, hard_deadline - time.monotonic())
                )
            except subprocess.TimeoutExpired:
                _kill_group(proc, signal.SIGKILL)
                out, err = proc.communicate()
        duration = time.monotonic() - started
        exit_code = proc.returncode

        if reason == "exit" and exit_code == -signal.SIGKILL:
            # killed by the kernel, most likely the memory cap
            reason = "resource_cap"

        artifacts: list[str] = []
        test_summary = None
        if reason == "exit" and exit_code == 0:
            for pattern in profile.artifact_globs:
                for path in sorted(workspace.glob(pattern)):
                    if path == main or not path.is_file():
                        continue
                    kind = MEDIA_BY_SUFFIX.get(path.suffix.lower(), "log")
                    if store is not None:
                        artifacts.append(
                            store.put_artifact(path.read_bytes(), kind, created_by)
                        )
            report = workspace / "test_report.json"
            if report.exists():
                try:
                    loaded = json.loads(report.read_text(encoding="utf-8"))
                    test_summary = {
                        "passed": int(loaded.get("passed", 0)),
                        "failed": int(loaded.get("failed", 0)),
                    }
                except (json.JSONDecodeError, ValueError):
                    logger.warning("unreadable test report in workspace")

        passed = (
            reason == "exit"
            and exit_code == 0
            and (not profile.requires_artifact or bool(artifacts))
            and (test_summary is None or test_summary["failed"] == 0)
        )
        return ValidationResult(
            passed=passed,
            termination_reason=reason,
            exit_code=exit_code if reason in ("exit", "resource_cap") else None,
            duration=duration,
            stdout_tail=_tail(out),
            stderr_tail=_tail(err),
            artifacts=artifacts,
            test_summary=test_summary,
        )
    finally:
        shutil.rmtree(workspace, ignore_errors=True)


@dataclass
class RetryDecision:
    action: str  # "retry" | "drop"
    feedback: Optional[str] = None


def route_failure(task, result: ValidationResult, max_retries: int) -> RetryDecision:
    """Turn a failed validation into a retry-with-feedback or a drop."""
    if result.passed:
        raise PreconditionError("route_failure called with a passing result")
    if task.attempt >= max_retries:
        return RetryDecision(action="drop")
    if result.termination_reason == "timeout":
        feedback = "execution timed out"
    elif result.termination_reason == "resource_cap":
        feedback = "execution exceeded its resource cap"
    elif result.termination_reason == "spawn_failure":
        feedback = "execution environment failed to start"
    else:
        feedback = result.stderr_tail[-1000:] or f"exited with code {result.exit_code}"
        if result.test_summary and result.test_summary["failed"]:
            feedback += f" ({result.test_summary['failed']} test(s) failed)"
    return RetryDecision(action="retry", feedback=feedback)
