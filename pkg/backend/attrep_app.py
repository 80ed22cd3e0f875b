"""
Flask Backend - attrep_app.py
=============================

HTTP entry point. Serves the same commands as the batch CLI through the shared
core service layer.

ARCHITECTURE:
┌─────────────────────────────────────────────┐
│               attrep_app.py                 │
│             (Flask Application)             │
├─────────────────────────────────────────────┤
│   /api/health   /api/datums   /api/<cmd>    │
│                      │                      │
│                      ▼                      │
│          ┌─────────────────────┐            │
│          │  services/          │            │
│          │  core_service.py    │            │
│          └─────────────────────┘            │
└─────────────────────────────────────────────┘

USAGE:
    python attrep_app.py

    Starts server on http://localhost:5001 (ATTREP_PORT)
"""

from flask import Flask, jsonify
from flask_cors import CORS

from api import api_bp
from services.settings import get_logger, settings

# ==============================
# Flask App Configuration
# ==============================
app = Flask(__name__)
CORS(app)

app.register_blueprint(api_bp, url_prefix="/api")


@app.route("/", methods=["GET"])
def index():
    return jsonify({
        "service": "attrep",
        "endpoints": ["/api/health", "/api/datums", "/api/<command>"],
    })


if __name__ == "__main__":
    logger = get_logger()
    logger.info(f"[API] starting attrep on port {settings.port}")
    app.run(debug=False, use_reloader=False, host="0.0.0.0", port=settings.port)
