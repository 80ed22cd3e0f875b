"""
HTTP API Routes - attrep
========================

Every command route hands the request body to ``services.core_service``, the
same layer the batch CLI calls. The routes hold no numerical logic: they
validate the body, resolve a RunConfig and translate exceptions to status codes.

ARCHITECTURE:
    HTTP client
           │
           ▼
    POST /api/<command>   (energy, tv, wasserstein, tile, minimize, flow)
           │
           ▼
    core_service.py (shared with attrep.py)

Results are returned, never written: the HTTP front end ignores ``out`` and
ATTREP_OUTPUT_DIR. Measures come inline (``uniform:``, ``delta:``, datum names,
grid objects); server file paths are rejected.
"""

import json
import logging
import os
import sys
import time
from typing import Any, Dict, Tuple

from flask import Blueprint, jsonify, request

sys.path.append(os.path.dirname(os.path.dirname(__file__)))
from services.core_service import COMMANDS, RunConfig, run_command
from services.data_io import dumps
from services.datums import get_datum_definitions
from services.errors import NumericalFailure
from services.settings import settings

logger = logging.getLogger(__name__)

bp = Blueprint("attrep_api", __name__)


# ==============================
# Request Validation Helpers
# ==============================
def _parse_json_body() -> Tuple[Dict[str, Any], int]:
    """Parse JSON request body."""
    body = request.get_json(silent=True)
    if body is None:
        body = {}
    if not isinstance(body, dict):
        return {}, 400
    return body, 200


def _plain(document: Dict[str, Any]) -> Dict[str, Any]:
    """Round-trip through the numpy-aware encoder so jsonify sees builtins only."""
    return json.loads(dumps(document))


# ==============================
# API Routes
# ==============================
@bp.route("/health", methods=["GET"])
def health():
    return jsonify({
        "status": "ok",
        "commands": sorted(COMMANDS),
        "settings": {"seed": settings.seed, "parallel_pairs": settings.parallel_pairs},
        "timestamp": time.time(),
    })


@bp.route("/datums", methods=["GET"])
def datums():
    """Built-in data usable as measure arguments."""
    return jsonify({"datums": get_datum_definitions()})


@bp.route("/<command>", methods=["POST"])
def run(command: str):
    """
    Run one command.

    Request:
        The RunConfig keys of the command, e.g.
        {"mu": "uniform:0:1", "omega": "uniform:1:2", "qa": 2, "qr": 2, "t_end": 3}

    Response:
        {"command": ..., "config": {...}, "result": {...}}
    """
    if command not in COMMANDS:
        return jsonify({"error": "Unknown command", "message": f"expected one of {sorted(COMMANDS)}"}), 404

    body, status = _parse_json_body()
    if status != 200:
        return jsonify({"error": "Invalid JSON body"}), 400
    body.pop("out", None)

    started = time.time()
    try:
        config = RunConfig.resolve(command, file_config=body, use_env_output=False, inline_only=True)
        document = run_command(config)
    except (ValueError, FileNotFoundError) as exc:
        logger.warning(f"[API] {command} rejected: {exc}")
        return jsonify({"error": "Invalid request", "message": str(exc)}), 400
    except (NumericalFailure, FloatingPointError) as exc:
        logger.error(f"[API] {command} failed: {exc}")
        return jsonify({"error": "Numerical failure", "message": str(exc)}), 500

    logger.info(f"[API] {command} done in {time.time() - started:.2f}s")
    return jsonify(_plain(document))
