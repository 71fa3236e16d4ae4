# FastAPI App Package
