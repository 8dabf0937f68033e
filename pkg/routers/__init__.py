from routers.guarantees import router as guarantees_router
from routers.anonymize import router as publication_router

__all__ = [
    "guarantees_router",
    "publication_router",
]
