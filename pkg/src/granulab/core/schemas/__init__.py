"""All schemas for granulab models."""
