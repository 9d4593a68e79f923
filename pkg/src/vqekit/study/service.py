"""HTTP face of the study: FastAPI app over a Study store.

Routes: GET /api/pair, POST /api/vote, GET /api/progress, GET /api/export,
GET /media/{clip_id}/{method_id}/{filename}, and optional static hosting of a
rater UI bundle at /. Errors come back as {code, message} JSON.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .store import Study, StudyError


def create_app(study: Study, ui_dir=None) -> FastAPI:
    app = FastAPI(title="vqekit study service")
    app.state.study = study

    @app.exception_handler(StudyError)
    async def study_error(request: Request, exc: StudyError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": str(exc)})

    @app.get("/api/pair")
    def get_pair(rater_id: str = ""):
        return study.next_pair(rater_id)

    @app.post("/api/vote")
    async def post_vote(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            return JSONResponse(status_code=400,
                                content={"code": "malformed_vote",
                                         "message": "body must be a JSON object"})
        ack = study.submit_vote(body)
        return JSONResponse(status_code=201, content=ack)

    @app.get("/api/progress")
    def get_progress():
        return study.progress()

    @app.get("/api/export")
    def get_export():
        return PlainTextResponse(study.export_votes(),
                                 media_type="application/jsonl")

    @app.get("/media/{clip_id}/{method_id}/{filename}")
    def get_media(clip_id: str, method_id: str, filename: str):
        path = study.media_path(clip_id, method_id, filename)
        return FileResponse(path, media_type="image/x-portable-pixmap")

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(study: Study, port: int = 8799, ui_dir=None, host: str = "127.0.0.1"):
    import uvicorn
    app = create_app(study, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
