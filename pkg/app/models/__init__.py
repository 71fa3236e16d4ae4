# Pydantic Models Package
