"""
Pydantic schemas for model specifications, experiment configuration and results
"""
