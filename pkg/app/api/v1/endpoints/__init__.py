# API Endpoints Package
